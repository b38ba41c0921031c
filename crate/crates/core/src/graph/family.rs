use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{Edge, MetricGraph, VelocityProfile, Vertex};

/// Parameterized graph families used as test corpora.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Directed cycle `v1 → v2 → … → vn → v1`, unit lengths, `c ≡ 1`, one
    /// buffer at `v1` with `k = 1`.
    Cycle(usize),
    /// `v1` forks into `n − 2` branches that merge at `vn`, which returns to
    /// `v1`. Equal split weights, `c ≡ 1`, buffer at `v1` with `k = 1`.
    ForkMerge(usize),
    /// Random strongly connected graph: a Hamiltonian cycle through a random
    /// vertex order plus random chords, random weights, lengths and
    /// velocities (constant or piecewise linear).
    RandomScc {
        n: usize,
        buffer_fraction: f64,
        seed: u64,
    },
}

pub fn generate_family(kind: Family) -> Result<MetricGraph> {
    match kind {
        Family::Cycle(n) => cycle(n),
        Family::ForkMerge(n) => fork_merge(n),
        Family::RandomScc {
            n,
            buffer_fraction,
            seed,
        } => random_scc(n, buffer_fraction, seed),
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("family size must be at least 2, got {n}")));
    }
    Ok(())
}

fn vid(i: usize) -> String {
    format!("v{}", i + 1)
}

fn unit_edge(id: usize, tail: usize, head: usize, weight: f64) -> Edge {
    Edge::new(format!("e{}", id + 1), vid(tail), vid(head), weight, VelocityProfile::constant(1.0))
}

pub(crate) fn cycle(n: usize) -> Result<MetricGraph> {
    check_size(n)?;
    let mut vertices: Vec<Vertex> = (0..n).map(|i| Vertex::plain(vid(i))).collect();
    vertices[0] = Vertex::buffered(vid(0), 1.0);
    let edges = (0..n).map(|i| unit_edge(i, i, (i + 1) % n, 1.0)).collect();
    Ok(MetricGraph::new(vertices, edges))
}

fn fork_merge(n: usize) -> Result<MetricGraph> {
    check_size(n)?;
    if n == 2 {
        return cycle(2);
    }
    let branches = n - 2;
    let merge = n - 1;
    let mut vertices: Vec<Vertex> = (0..n).map(|i| Vertex::plain(vid(i))).collect();
    vertices[0] = Vertex::buffered(vid(0), 1.0);
    let split = 1.0 / branches as f64;
    let mut edges = Vec::with_capacity(2 * branches + 1);
    for b in 0..branches {
        edges.push(unit_edge(edges.len(), 0, b + 1, split));
    }
    for b in 0..branches {
        edges.push(unit_edge(edges.len(), b + 1, merge, 1.0));
    }
    edges.push(unit_edge(edges.len(), merge, 0, 1.0));
    Ok(MetricGraph::new(vertices, edges))
}

fn random_scc(n: usize, buffer_fraction: f64, seed: u64) -> Result<MetricGraph> {
    check_size(n)?;
    if !(buffer_fraction > 0.0 && buffer_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "buffer fraction must lie in (0, 1], got {buffer_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut targets: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        targets[order[i]].push(order[(i + 1) % n]);
    }
    // chords
    if n > 2 {
        for v in 0..n {
            let extra = rng.random_range(0..=2usize);
            for _ in 0..extra {
                let w = rng.random_range(0..n);
                if w != v && !targets[v].contains(&w) {
                    targets[v].push(w);
                }
            }
        }
    }

    let n_buffers = ((buffer_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut buffered: Vec<usize> = (0..n).collect();
    buffered.shuffle(&mut rng);
    buffered.truncate(n_buffers);

    let vertices = (0..n)
        .map(|i| {
            if buffered.contains(&i) {
                Vertex::buffered(vid(i), rng.random_range(0.5..2.0))
            } else {
                Vertex::plain(vid(i))
            }
        })
        .collect();

    let mut edges = Vec::new();
    for (v, outs) in targets.iter().enumerate() {
        let raw: Vec<f64> = outs.iter().map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for (&w, r) in outs.iter().zip(&raw) {
            let velocity = if rng.random_bool(0.5) {
                VelocityProfile::constant(rng.random_range(0.5..2.0))
            } else {
                VelocityProfile::piecewise_linear(vec![
                    (0.0, rng.random_range(0.5..2.0)),
                    (rng.random_range(0.2..0.8), rng.random_range(0.5..2.0)),
                    (1.0, rng.random_range(0.5..2.0)),
                ])
            };
            let id = edges.len();
            edges.push(
                Edge::new(format!("e{}", id + 1), vid(v), vid(w), r / total, velocity)
                    .with_length(rng.random_range(0.5..2.0)),
            );
        }
    }
    Ok(MetricGraph::new(vertices, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate, Profile};

    #[test]
    fn cycle_two_matches_hand_built() {
        let g = cycle(2).unwrap();
        assert_eq!(g.vertices, vec![Vertex::buffered("v1", 1.0), Vertex::plain("v2")]);
        assert_eq!(g.edges.len(), 2);
        assert_eq!((g.edges[0].tail.as_str(), g.edges[0].head.as_str()), ("v1", "v2"));
        assert_eq!((g.edges[1].tail.as_str(), g.edges[1].head.as_str()), ("v2", "v1"));
    }

    #[test]
    fn families_pass_validation() {
        for kind in [
            Family::Cycle(2),
            Family::Cycle(5),
            Family::ForkMerge(2),
            Family::ForkMerge(3),
            Family::ForkMerge(4),
            Family::ForkMerge(7),
            Family::RandomScc { n: 2, buffer_fraction: 1.0, seed: 0 },
            Family::RandomScc { n: 10, buffer_fraction: 0.3, seed: 7 },
            Family::RandomScc { n: 40, buffer_fraction: 0.05, seed: 11 },
        ] {
            let g = generate_family(kind).unwrap();
            let r = validate(&g, Profile::Buffered);
            assert!(r.is_valid(), "{kind:?}: {}", r.summary());
        }
    }

    #[test]
    fn random_scc_is_deterministic() {
        let a = random_scc(12, 0.25, 99).unwrap();
        let b = random_scc(12, 0.25, 99).unwrap();
        let c = random_scc(12, 0.25, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(cycle(1), Err(Error::InvalidParameter(_))));
        assert!(matches!(fork_merge(0), Err(Error::InvalidParameter(_))));
        assert!(random_scc(5, 0.0, 1).is_err());
        assert!(random_scc(5, 1.5, 1).is_err());
    }
}
