#![allow(dead_code)]

use buffered_flow::graph::{Edge, MetricGraph, VelocityProfile, Vertex};
use buffered_flow::{generate_family, Family};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use buffered_flow::solver::random_state;

/// Cycle of `n` unit edges whose velocities all follow `velocity`.
pub fn cycle_with(n: usize, velocity: VelocityProfile) -> MetricGraph {
    let mut g = generate_family(Family::Cycle(n)).unwrap();
    for e in &mut g.edges {
        e.velocity = velocity.clone();
    }
    g
}

pub fn hat_velocity() -> VelocityProfile {
    VelocityProfile::piecewise_linear(vec![(0.0, 1.0), (0.4, 2.0), (1.0, 0.8)])
}

/// Disjoint union of random strongly connected pieces joined by a few
/// one-way bridges. The result satisfies the standing assumptions but is
/// strongly connected only if the bridges happen to link the pieces up.
pub fn mixed_graph(seed: u64) -> MetricGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = rng.random_range(1..=3);
    let mut vertices = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut members: Vec<Vec<String>> = Vec::new();
    for p in 0..pieces {
        let size = rng.random_range(2..=5);
        let g = generate_family(Family::RandomScc {
            n: size,
            buffer_fraction: 0.3,
            seed: rng.random(),
        })
        .unwrap();
        let rename = |id: &str| format!("p{p}_{id}");
        members.push(g.vertices.iter().map(|v| rename(&v.id)).collect());
        vertices.extend(g.vertices.into_iter().map(|v| Vertex { id: rename(&v.id), ..v }));
        edges.extend(g.edges.into_iter().map(|e| Edge {
            id: rename(&e.id),
            tail: rename(&e.tail),
            head: rename(&e.head),
            ..e
        }));
    }
    if pieces > 1 {
        let bridges = rng.random_range(0..=2 * pieces);
        for b in 0..bridges {
            let from = rng.random_range(0..pieces);
            let mut to = rng.random_range(0..pieces - 1);
            if to >= from {
                to += 1;
            }
            let tail = members[from][rng.random_range(0..members[from].len())].clone();
            let head = members[to][rng.random_range(0..members[to].len())].clone();
            if edges.iter().any(|e| e.tail == tail && e.head == head) {
                continue;
            }
            edges.push(Edge::new(format!("bridge{b}"), tail, head, 1.0, VelocityProfile::constant(1.0)));
        }
    }
    // renormalize the weights leaving each vertex
    for v in &vertices {
        let total: f64 = edges.iter().filter(|e| e.tail == v.id).map(|e| e.weight).sum();
        for e in edges.iter_mut().filter(|e| e.tail == v.id) {
            e.weight /= total;
        }
    }
    MetricGraph::new(vertices, edges)
}
