//! Metric graphs with buffered vertices.
//!
//! Edges are parameterized over `[0, l]` with the tail at `x = l` and the
//! head at `x = 0`; mass therefore moves toward decreasing `x`.

mod family;
mod matrices;
mod validate;
mod velocity;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use family::{generate_family, Family};
pub use matrices::{build_matrices, MatrixBundle, MAT_TOL};
pub use validate::{validate, Profile, ValidationReport, Violation, WEIGHT_TOL};
pub use velocity::VelocityProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferSpec {
    /// Emission rate; a buffer holding `b` emits `k * b` per unit time.
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vertex {
    pub id: String,
    #[serde(default)]
    pub buffer: Option<BufferSpec>,
}

impl Vertex {
    pub fn plain(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            buffer: None,
        }
    }

    pub fn buffered(id: impl Into<String>, k: f64) -> Self {
        Self {
            id: id.into(),
            buffer: Some(BufferSpec { k }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub length: f64,
    pub weight: f64,
    pub velocity: VelocityProfile,
}

impl Edge {
    pub fn new(
        id: impl Into<String>,
        tail: impl Into<String>,
        head: impl Into<String>,
        weight: f64,
        velocity: VelocityProfile,
    ) -> Self {
        Self {
            id: id.into(),
            tail: tail.into(),
            head: head.into(),
            length: 1.0,
            weight,
            velocity,
        }
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    /// Velocity on the normalized coordinate, `l * c`.
    pub fn scaled_velocity(&self) -> VelocityProfile {
        if self.length == 1.0 {
            self.velocity.clone()
        } else {
            self.velocity.scaled(self.length)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

impl MetricGraph {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Self {
        Self { vertices, edges }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn vertex_index(&self) -> HashMap<&str, usize> {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), i))
            .collect()
    }

    /// Indices of buffered vertices in vertex order.
    pub fn buffered_vertices(&self) -> Vec<usize> {
        self.vertices
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.buffer.map(|_| i))
            .collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.edges.iter().all(|e| e.length == 1.0)
    }

    /// Smallest and largest velocity over all edges on the normalized coordinate.
    pub fn velocity_bounds(&self) -> (f64, f64) {
        self.edges.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| {
            let v = e.scaled_velocity();
            (lo.min(v.min()), hi.max(v.max()))
        })
    }

    /// Copy of the graph with the given vertex buffered at rate `k`.
    pub fn with_buffer(mut self, vertex: &str, k: f64) -> Self {
        if let Some(v) = self.vertices.iter_mut().find(|v| v.id == vertex) {
            v.buffer = Some(BufferSpec { k });
        }
        self
    }

    /// Copy of the graph with every buffer removed.
    pub fn without_buffers(mut self) -> Self {
        for v in &mut self.vertices {
            v.buffer = None;
        }
        self
    }
}

/// Rescales every edge to unit length, folding the length into the velocity
/// (`c̃ = l c`). Densities keep their values on the rescaled coordinate.
pub fn normalize_edges(graph: &MetricGraph) -> MetricGraph {
    let edges = graph
        .edges
        .iter()
        .map(|e| Edge {
            velocity: e.scaled_velocity(),
            length: 1.0,
            ..e.clone()
        })
        .collect();
    MetricGraph {
        vertices: graph.vertices.clone(),
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_scales_velocity() {
        let g = MetricGraph::new(
            vec![Vertex::buffered("v1", 1.0), Vertex::plain("v2")],
            vec![
                Edge::new("e1", "v1", "v2", 1.0, VelocityProfile::constant(1.0)).with_length(2.0),
                Edge::new("e2", "v2", "v1", 1.0, VelocityProfile::piecewise_linear(vec![(0.0, 1.0), (1.0, 3.0)]))
                    .with_length(0.5),
            ],
        );
        let n = normalize_edges(&g);
        assert!(n.is_normalized());
        assert_eq!(n.edges[0].velocity, VelocityProfile::constant(2.0));
        assert_eq!(
            n.edges[1].velocity,
            VelocityProfile::piecewise_linear(vec![(0.0, 0.5), (1.0, 1.5)])
        );
        assert_eq!(normalize_edges(&n), n);
    }

    #[test]
    fn unit_length_edge_unchanged() {
        let g = family::cycle(3).unwrap();
        assert_eq!(normalize_edges(&g), g);
    }

    #[test]
    fn json_rejects_unknown_fields() {
        let text = r#"{"vertices":[{"id":"a","buffer":null,"colour":1}],"edges":[]}"#;
        assert!(MetricGraph::from_json(text).is_err());
        let text = r#"{"vertices":[{"id":"a","buffer":{"k":2}}],"edges":[],"extra":0}"#;
        assert!(MetricGraph::from_json(text).is_err());
    }

    #[test]
    fn json_reads_spec_layout() {
        let text = r#"{
            "vertices": [{"id":"v1","buffer":{"k":1}}, {"id":"v2","buffer":null}],
            "edges": [
                {"id":"e1","tail":"v1","head":"v2","length":1,"weight":1,"velocity":{"kind":"constant","c":1}},
                {"id":"e2","tail":"v2","head":"v1","length":1,"weight":1,"velocity":{"kind":"pwl","nodes":[[0,1],[1,2]]}}
            ]
        }"#;
        let g = MetricGraph::from_json(text).unwrap();
        assert_eq!(g.vertices[0].buffer, Some(BufferSpec { k: 1.0 }));
        assert_eq!(MetricGraph::from_json(&g.to_json()).unwrap(), g);
    }
}
