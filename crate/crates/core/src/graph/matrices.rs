use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

use super::{validate, MetricGraph, Profile};

/// Tolerance for matrix identities (column sums, block decomposition).
pub const MAT_TOL: f64 = 1e-12;

/// Incidence and adjacency matrices of a metric graph.
///
/// Vertex rows follow graph order; buffer columns of `b_buf` follow the order
/// of buffered vertices in the graph.
#[derive(Debug, Clone)]
pub struct MatrixBundle {
    /// Φ⁻, V×E: 1 where the vertex is the tail of the edge.
    pub phi_out: SparseMatrix,
    /// Φ⁺, V×E: 1 where the vertex is the head of the edge.
    pub phi_in: SparseMatrix,
    /// Φ_w⁻, V×E: edge weight where the vertex is the tail.
    pub phi_out_weighted: SparseMatrix,
    /// 𝔹_NB, E×E: routing through unbuffered vertices.
    pub b_nb: SparseMatrix,
    /// 𝔹_B, E×B: routing of buffer emissions.
    pub b_buf: SparseMatrix,
    /// 𝔹 = (Φ_w⁻)ᵀ Φ⁺, E×E, column-stochastic.
    pub adjacency: SparseMatrix,

    pub tail: Vec<usize>,
    pub head: Vec<usize>,
    /// Vertex index of each buffer.
    pub buffered: Vec<usize>,
    /// Rate `k_v` of each buffer.
    pub buffer_rates: Vec<f64>,
    /// For each vertex, its buffer slot (if any).
    pub buffer_slot: Vec<Option<usize>>,
}

impl MatrixBundle {
    pub fn num_edges(&self) -> usize {
        self.tail.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.buffer_slot.len()
    }

    pub fn num_buffers(&self) -> usize {
        self.buffered.len()
    }

    /// Rows of Φ⁺ belonging to buffered vertices, (Φ⁺)_B.
    pub fn phi_in_buffered(&self) -> SparseMatrix {
        self.phi_in.select_rows(&self.buffered)
    }

    pub fn unbuffered_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| self.buffer_slot[v].is_none())
            .collect()
    }
}

/// Builds every matrix of the bundle from the graph. The graph must satisfy
/// the structural assumptions (buffers are optional here).
pub fn build_matrices(graph: &MetricGraph) -> Result<MatrixBundle> {
    let report = validate(graph, Profile::Unbuffered);
    if !report.is_valid() {
        return Err(Error::InvalidGraph(report.summary()));
    }
    let index = graph.vertex_index();
    let nv = graph.vertices.len();
    let ne = graph.edges.len();

    let tail: Vec<usize> = graph.edges.iter().map(|e| index[e.tail.as_str()]).collect();
    let head: Vec<usize> = graph.edges.iter().map(|e| index[e.head.as_str()]).collect();

    let phi_out = SparseMatrix::from_triplets(
        nv,
        ne,
        &tail.iter().enumerate().map(|(e, &v)| (v, e, 1.0)).collect::<Vec<_>>(),
    );
    let phi_in = SparseMatrix::from_triplets(
        nv,
        ne,
        &head.iter().enumerate().map(|(e, &v)| (v, e, 1.0)).collect::<Vec<_>>(),
    );
    let phi_out_weighted = SparseMatrix::from_triplets(
        nv,
        ne,
        &graph
            .edges
            .iter()
            .enumerate()
            .map(|(e, edge)| (tail[e], e, edge.weight))
            .collect::<Vec<_>>(),
    );

    let buffered = graph.buffered_vertices();
    let buffer_rates = buffered
        .iter()
        .map(|&v| graph.vertices[v].buffer.expect("buffered vertex").k)
        .collect();
    let mut buffer_slot = vec![None; nv];
    for (slot, &v) in buffered.iter().enumerate() {
        buffer_slot[v] = Some(slot);
    }
    let unbuffered: Vec<usize> = (0..nv).filter(|&v| buffer_slot[v].is_none()).collect();

    let b_nb = phi_out_weighted
        .select_rows(&unbuffered)
        .transpose()
        .matmul(&phi_in.select_rows(&unbuffered));
    let b_buf = phi_out_weighted.select_rows(&buffered).transpose();
    let adjacency = phi_out_weighted.transpose().matmul(&phi_in);

    Ok(MatrixBundle {
        phi_out,
        phi_in,
        phi_out_weighted,
        b_nb,
        b_buf,
        adjacency,
        tail,
        head,
        buffered,
        buffer_rates,
        buffer_slot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_family, Family};
    use nalgebra::DMatrix;

    #[test]
    fn two_cycle_adjacency_is_swap() {
        let b = build_matrices(&generate_family(Family::Cycle(2)).unwrap()).unwrap();
        assert_eq!(b.adjacency.to_dense(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn three_cycle_adjacency_is_cyclic_permutation() {
        let b = build_matrices(&generate_family(Family::Cycle(3)).unwrap()).unwrap();
        // e1: v1→v2, e2: v2→v3, e3: v3→v1; outflow of e1 feeds e2, etc.
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(b.adjacency.to_dense(), expected);
    }

    #[test]
    fn fork_merge_adjacency_by_hand() {
        // e1: v1→v2 (0.5), e2: v1→v3 (0.5), e3: v2→v4, e4: v3→v4, e5: v4→v1
        let b = build_matrices(&generate_family(Family::ForkMerge(4)).unwrap()).unwrap();
        let mut expected = DMatrix::zeros(5, 5);
        expected[(0, 4)] = 0.5; // e5 arrives at v1 = tail of e1
        expected[(1, 4)] = 0.5; // ... and tail of e2
        expected[(2, 0)] = 1.0; // e1 arrives at v2 = tail of e3
        expected[(3, 1)] = 1.0;
        expected[(4, 2)] = 1.0;
        expected[(4, 3)] = 1.0;
        assert_eq!(b.adjacency.to_dense(), expected);
        for s in b.adjacency.col_sums() {
            assert!((s - 1.0).abs() <= MAT_TOL);
        }
    }

    #[test]
    fn invalid_graph_rejected() {
        let mut g = generate_family(Family::Cycle(2)).unwrap();
        g.edges[0].weight = 0.5;
        assert!(matches!(build_matrices(&g), Err(Error::InvalidGraph(_))));
    }
}
