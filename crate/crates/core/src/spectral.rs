//! Connectivity, irreducibility and fixed vectors of the adjacency matrix 𝔹,
//! and the explicit equilibrium of the flow built from the fixed vector.
//!
//! For an irreducible 𝔹 with fixed vector `w`, the stationary states are the
//! multiples of
//!
//! ```text
//! u_e(x) = w_e / c̃_e(x),    b_v = (1 / k_v) Σ_e φ⁺_{ve} w_e
//! ```

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{MatrixBundle, MetricGraph};
use crate::solver::{apply_generator, FlowModel, FlowState, GeneratorPart};

/// Default residual tolerance for fixed vectors.
pub const FIXED_TOL: f64 = 1e-10;
/// Iteration cap for the averaged power iteration.
pub const MAX_POWER_ITERATIONS: usize = 1_000_000;

/// True iff every ordered vertex pair is joined by a directed path.
pub fn strongly_connected(graph: &MetricGraph) -> bool {
    let index = graph.vertex_index();
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(graph.vertices.len(), graph.edges.len());
    let nodes: Vec<_> = graph.vertices.iter().map(|_| g.add_node(())).collect();
    for e in &graph.edges {
        if let (Some(&t), Some(&h)) = (index.get(e.tail.as_str()), index.get(e.head.as_str())) {
            g.add_edge(nodes[t], nodes[h], ());
        }
    }
    !graph.vertices.is_empty() && tarjan_scc(&g).len() == 1
}

/// True iff the directed graph on edges given by the nonzero pattern of 𝔹
/// (`k → e` when `𝔹_{ek} ≠ 0`) is strongly connected.
pub fn is_irreducible(bundle: &MatrixBundle) -> bool {
    let ne = bundle.adjacency.ncols();
    if ne == 0 {
        return false;
    }
    let mut forward = vec![Vec::new(); ne];
    let mut backward = vec![Vec::new(); ne];
    for (e, k, v) in bundle.adjacency.iter() {
        if v != 0.0 {
            forward[k].push(e);
            backward[e].push(k);
        }
    }
    reaches_all(&forward) && reaches_all(&backward)
}

fn reaches_all(adjacent: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adjacent.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(k) = queue.pop_front() {
        for &e in &adjacent[k] {
            if !seen[e] {
                seen[e] = true;
                count += 1;
                queue.push_back(e);
            }
        }
    }
    count == adjacent.len()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedVectorMethod {
    CesaroPower,
    DirectSolve,
}

/// Nonnegative `w` with `𝔹 w = w` and `Σ w = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct FixedVector {
    pub entries: Vec<f64>,
    /// `‖𝔹 w − w‖₁`.
    pub residual: f64,
    pub iterations: usize,
    pub method: FixedVectorMethod,
}

/// Perron fixed vector of an irreducible 𝔹.
///
/// Runs power iteration from the uniform vector and averages blocks of
/// `4|E|` consecutive iterates, which also converges for periodic 𝔹 whose
/// period divides the block length. If the averaged residual stops
/// improving, the homogeneous system `(𝔹 − I) w = 0` with the normalization
/// `Σ w = 1` is solved directly.
pub fn perron_fixed_vector(bundle: &MatrixBundle, tol: f64) -> Result<FixedVector> {
    if !is_irreducible(bundle) {
        return Err(Error::NotIrreducible);
    }
    let w = fixed_vector(bundle, tol)?;
    if w.entries.iter().any(|&v| v <= 0.0) {
        return Err(Error::NoConvergence(w.iterations));
    }
    Ok(w)
}

/// Fixed vector of a column-stochastic 𝔹 without the irreducibility check.
pub fn fixed_vector(bundle: &MatrixBundle, tol: f64) -> Result<FixedVector> {
    let b = &bundle.adjacency;
    let ne = b.ncols();
    let window = 4 * ne;
    let residual_of = |w: &[f64]| -> f64 { b.mul_vec(w).iter().zip(w).map(|(bw, w)| (bw - w).abs()).sum() };

    let mut x = vec![1.0 / ne as f64; ne];
    let mut next = vec![0.0; ne];
    let mut iterations = 0usize;
    let mut history: Vec<f64> = Vec::new();

    while iterations < MAX_POWER_ITERATIONS {
        let mut sum = vec![0.0; ne];
        for _ in 0..window {
            for (s, v) in sum.iter_mut().zip(&x) {
                *s += v;
            }
            b.mul_vec_into(&x, &mut next);
            std::mem::swap(&mut x, &mut next);
        }
        iterations += window;
        let total: f64 = sum.iter().sum();
        let avg: Vec<f64> = sum.iter().map(|s| s / total).collect();
        let residual = residual_of(&avg);
        if residual <= tol {
            return Ok(FixedVector {
                entries: avg,
                residual,
                iterations,
                method: FixedVectorMethod::CesaroPower,
            });
        }
        history.push(residual);
        // stalled: less than a 1% gain over the last ten blocks
        let stalled = history.len() > 10 && residual > 0.99 * history[history.len() - 11];
        if stalled {
            break;
        }
        let total_x: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= total_x);
    }

    let entries = solve_homogeneous(&b.to_dense()).ok_or(Error::NoConvergence(iterations))?;
    let residual = residual_of(&entries);
    if residual > tol {
        return Err(Error::NoConvergence(iterations));
    }
    Ok(FixedVector {
        entries,
        residual,
        iterations,
        method: FixedVectorMethod::DirectSolve,
    })
}

/// Solves `(B − I) w = 0`, `Σ w = 1` by replacing the last row with ones.
fn solve_homogeneous(b: &DMatrix<f64>) -> Option<Vec<f64>> {
    let ne = b.nrows();
    let mut m = b - DMatrix::identity(ne, ne);
    for j in 0..ne {
        m[(ne - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(ne);
    rhs[ne - 1] = 1.0;
    let w = m.lu().solve(&rhs)?;
    let total: f64 = w.iter().sum();
    Some(w.iter().map(|v| v / total).collect())
}

/// Dimension of the null space of `𝔹 − I`, counting singular values below
/// `tol` (dense SVD).
pub fn fixed_space_dimension(bundle: &MatrixBundle, tol: f64) -> usize {
    let ne = bundle.num_edges();
    let m = bundle.adjacency.to_dense() - DMatrix::identity(ne, ne);
    m.singular_values().iter().filter(|s| **s <= tol).count()
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitEigenvalue {
    pub present: bool,
    /// A fixed vector of 𝔹 witnessing the eigenvalue 1.
    pub certificate: Vec<f64>,
    pub residual: f64,
}

/// For a finite column-stochastic 𝔹 the eigenvalue 1 is always present
/// (𝟙 is fixed by 𝔹ᵀ); this returns it together with a fixed vector of 𝔹.
pub fn has_unit_eigenvalue(bundle: &MatrixBundle) -> UnitEigenvalue {
    match fixed_vector(bundle, FIXED_TOL) {
        Ok(w) => UnitEigenvalue {
            present: true,
            residual: w.residual,
            certificate: w.entries,
        },
        Err(_) => {
            // 𝟙ᵀ(𝔹 − I) = 0, so 𝔹 − I is singular; take the smallest right singular vector
            let ne = bundle.num_edges();
            let m = bundle.adjacency.to_dense() - DMatrix::identity(ne, ne);
            let svd = m.clone().svd(false, true);
            let v_t = svd.v_t.expect("requested");
            let (idx, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (i, s)| if *s < best.1 { (i, *s) } else { best });
            let row: Vec<f64> = v_t.row(idx).iter().copied().collect();
            let total: f64 = row.iter().sum();
            let certificate: Vec<f64> = row.iter().map(|v| v / total).collect();
            let residual = (m * DVector::from_column_slice(&certificate)).abs().sum();
            UnitEigenvalue {
                present: true,
                certificate,
                residual,
            }
        }
    }
}

/// Stationary state scaled to a prescribed total mass, sampled as cell
/// averages on the solver grid.
#[derive(Debug, Clone)]
pub struct EquilibriumState {
    pub state: FlowState,
    /// Scale applied to the unit-fixed-vector state.
    pub alpha: f64,
    pub fixed_vector: Vec<f64>,
}

impl EquilibriumState {
    pub fn edge_density(&self, e: usize) -> &[f64] {
        self.state.edge(e)
    }

    pub fn buffer_levels(&self) -> &[f64] {
        &self.state.buffers
    }

    pub fn total_mass(&self) -> f64 {
        self.state.total_mass()
    }
}

/// Builds `u_e = α w_e / c̃_e`, `b_v = (α / k_v) Σ_e φ⁺_{ve} w_e` with `α`
/// chosen so that the discrete total mass equals `target_mass`.
pub fn equilibrium_state(model: &FlowModel, w: &FixedVector, target_mass: f64) -> Result<EquilibriumState> {
    if !(target_mass > 0.0 && target_mass.is_finite()) {
        return Err(Error::ZeroMass(target_mass));
    }
    let ne = model.num_edges();
    if w.entries.len() != ne {
        return Err(Error::DimensionMismatch {
            expected: ne,
            found: w.entries.len(),
        });
    }
    let grid = &model.grid;
    let n = grid.cells();
    let mut state = model.zero_state();
    for e in 0..ne {
        let profile = &grid.edge(e).profile;
        let we = w.entries[e];
        for (i, u) in state.edge_mut(e).iter_mut().enumerate() {
            *u = we * profile.mean_reciprocal(grid.interface(i), grid.interface(i + 1));
        }
    }
    let bundle = &model.bundle;
    for (e, &h) in bundle.head.iter().enumerate() {
        if let Some(slot) = bundle.buffer_slot[h] {
            state.buffers[slot] += w.entries[e];
        }
    }
    for (b, k) in state.buffers.iter_mut().zip(&bundle.buffer_rates) {
        *b /= k;
    }
    debug_assert_eq!(state.cells.len(), ne * n);
    let alpha = target_mass / state.total_mass();
    Ok(EquilibriumState {
        state: state.scaled(alpha),
        alpha,
        fixed_vector: w.entries.clone(),
    })
}

/// `‖A_h f‖₁` for the solver's discrete generator.
pub fn kernel_residual(model: &FlowModel, state: &FlowState) -> Result<f64> {
    Ok(apply_generator(model, state, GeneratorPart::Full)?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_matrices, generate_family, Edge, Family, VelocityProfile, Vertex};

    fn bundle(kind: Family) -> MatrixBundle {
        build_matrices(&generate_family(kind).unwrap()).unwrap()
    }

    /// Two 2-cycles joined by a single one-way edge a2 → b1.
    pub(crate) fn bridged_cycles() -> MetricGraph {
        let c = || VelocityProfile::constant(1.0);
        MetricGraph::new(
            vec![
                Vertex::buffered("a1", 1.0),
                Vertex::plain("a2"),
                Vertex::buffered("b1", 1.0),
                Vertex::plain("b2"),
            ],
            vec![
                Edge::new("a12", "a1", "a2", 1.0, c()),
                Edge::new("a21", "a2", "a1", 0.5, c()),
                Edge::new("bridge", "a2", "b1", 0.5, c()),
                Edge::new("b12", "b1", "b2", 1.0, c()),
                Edge::new("b21", "b2", "b1", 1.0, c()),
            ],
        )
    }

    #[test]
    fn connectivity_examples() {
        assert!(strongly_connected(&generate_family(Family::Cycle(3)).unwrap()));
        assert!(strongly_connected(&generate_family(Family::ForkMerge(4)).unwrap()));
        let g = bridged_cycles();
        assert!(!strongly_connected(&g));
        assert!(!is_irreducible(&build_matrices(&g).unwrap()));
        assert!(is_irreducible(&bundle(Family::Cycle(2))));
    }

    #[test]
    fn perron_of_permutations() {
        let w = perron_fixed_vector(&bundle(Family::Cycle(2)), FIXED_TOL).unwrap();
        assert_eq!(w.entries, vec![0.5, 0.5]);
        let w = perron_fixed_vector(&bundle(Family::Cycle(3)), FIXED_TOL).unwrap();
        for v in &w.entries {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn perron_rejects_reducible() {
        let b = build_matrices(&bridged_cycles()).unwrap();
        assert!(matches!(perron_fixed_vector(&b, FIXED_TOL), Err(Error::NotIrreducible)));
    }

    #[test]
    fn unit_eigenvalue_certificate() {
        let u = has_unit_eigenvalue(&bundle(Family::Cycle(2)));
        assert!(u.present);
        assert_eq!(u.certificate, vec![0.5, 0.5]);
        let u = has_unit_eigenvalue(&build_matrices(&bridged_cycles()).unwrap());
        assert!(u.present && u.residual < 1e-9);
    }

    #[test]
    fn equilibrium_rejects_nonpositive_mass() {
        let m = FlowModel::new(generate_family(Family::Cycle(2)).unwrap(), 8).unwrap();
        let w = perron_fixed_vector(&m.bundle, FIXED_TOL).unwrap();
        assert!(matches!(equilibrium_state(&m, &w, 0.0), Err(Error::ZeroMass(_))));
        assert!(matches!(equilibrium_state(&m, &w, -1.0), Err(Error::ZeroMass(_))));
    }

    #[test]
    fn kernel_residual_of_zero_state() {
        let m = FlowModel::new(generate_family(Family::Cycle(2)).unwrap(), 8).unwrap();
        assert_eq!(kernel_residual(&m, &m.zero_state()).unwrap(), 0.0);
        let wrong = FlowState::zeros(3, 1, 8);
        assert!(matches!(kernel_residual(&m, &wrong), Err(Error::DimensionMismatch { .. })));
    }
}
