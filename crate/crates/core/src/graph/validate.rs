use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::MetricGraph;

/// Absolute tolerance on `Σ w = 1` at each vertex.
pub const WEIGHT_TOL: f64 = 1e-9;

/// Which standing assumptions to enforce. `Buffered` additionally requires at
/// least one buffered vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Buffered,
    Unbuffered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyGraph,
    DuplicateVertex { vertex: String },
    DuplicateEdge { edge: String },
    UnknownEndpoint { edge: String, vertex: String },
    Loop { edge: String },
    MultipleEdges { edges: Vec<String> },
    BadLength { edge: String, length: f64 },
    BadWeight { edge: String, weight: f64 },
    BadVelocity { edge: String, reason: String },
    BadBufferRate { vertex: String, k: f64 },
    NoOutgoing { vertex: String },
    NoIncoming { vertex: String },
    WeightSum { vertex: String, sum: f64 },
    NoBuffer,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyGraph => write!(f, "graph needs at least one vertex and one edge"),
            Self::DuplicateVertex { vertex } => write!(f, "duplicate vertex id {vertex}"),
            Self::DuplicateEdge { edge } => write!(f, "duplicate edge id {edge}"),
            Self::UnknownEndpoint { edge, vertex } => {
                write!(f, "edge {edge} references unknown vertex {vertex}")
            }
            Self::Loop { edge } => write!(f, "edge {edge} is a loop"),
            Self::MultipleEdges { edges } => {
                write!(f, "multiple edges with the same tail and head: {}", edges.join(", "))
            }
            Self::BadLength { edge, length } => write!(f, "edge {edge} has non-positive length {length}"),
            Self::BadWeight { edge, weight } => write!(f, "edge {edge} has weight {weight} outside (0, 1]"),
            Self::BadVelocity { edge, reason } => write!(f, "edge {edge}: {reason}"),
            Self::BadBufferRate { vertex, k } => write!(f, "buffer at {vertex} has non-positive rate {k}"),
            Self::NoOutgoing { vertex } => write!(f, "non-degenerate fails at {vertex}: no outgoing edge"),
            Self::NoIncoming { vertex } => write!(f, "non-degenerate fails at {vertex}: no incoming edge"),
            Self::WeightSum { vertex, sum } => write!(f, "weights at {vertex} sum to {sum} ≠ 1"),
            Self::NoBuffer => write!(f, "no buffered vertex"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Out-degree per vertex, in vertex order.
    pub out_degree: Vec<(String, usize)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks the standing assumptions on `graph`. Never fails; every problem is
/// a report entry.
pub fn validate(graph: &MetricGraph, profile: Profile) -> ValidationReport {
    let mut violations = Vec::new();

    if graph.vertices.is_empty() || graph.edges.is_empty() {
        violations.push(Violation::EmptyGraph);
    }

    let mut seen = HashSet::new();
    for v in &graph.vertices {
        if !seen.insert(v.id.as_str()) {
            violations.push(Violation::DuplicateVertex { vertex: v.id.clone() });
        }
        if let Some(b) = v.buffer {
            if !(b.k.is_finite() && b.k > 0.0) {
                violations.push(Violation::BadBufferRate { vertex: v.id.clone(), k: b.k });
            }
        }
    }

    let index = graph.vertex_index();
    let mut out_degree = vec![0usize; graph.vertices.len()];
    let mut in_degree = vec![0usize; graph.vertices.len()];
    let mut weight_sum = vec![0.0f64; graph.vertices.len()];
    let mut edge_ids = HashSet::new();
    let mut by_pair: HashMap<(&str, &str), Vec<String>> = HashMap::new();

    for e in &graph.edges {
        if !edge_ids.insert(e.id.as_str()) {
            violations.push(Violation::DuplicateEdge { edge: e.id.clone() });
        }
        for end in [&e.tail, &e.head] {
            if !index.contains_key(end.as_str()) {
                violations.push(Violation::UnknownEndpoint {
                    edge: e.id.clone(),
                    vertex: end.clone(),
                });
            }
        }
        if e.tail == e.head {
            violations.push(Violation::Loop { edge: e.id.clone() });
        }
        by_pair
            .entry((e.tail.as_str(), e.head.as_str()))
            .or_default()
            .push(e.id.clone());
        if !(e.length.is_finite() && e.length > 0.0) {
            violations.push(Violation::BadLength { edge: e.id.clone(), length: e.length });
        }
        if !(e.weight.is_finite() && e.weight > 0.0 && e.weight <= 1.0) {
            violations.push(Violation::BadWeight { edge: e.id.clone(), weight: e.weight });
        }
        if let Some(reason) = e.velocity.check() {
            violations.push(Violation::BadVelocity { edge: e.id.clone(), reason });
        }
        if let Some(&t) = index.get(e.tail.as_str()) {
            out_degree[t] += 1;
            weight_sum[t] += e.weight;
        }
        if let Some(&h) = index.get(e.head.as_str()) {
            in_degree[h] += 1;
        }
    }

    let mut multiple: Vec<Vec<String>> = by_pair.into_values().filter(|ids| ids.len() > 1).collect();
    multiple.sort();
    violations.extend(multiple.into_iter().map(|edges| Violation::MultipleEdges { edges }));

    for (i, v) in graph.vertices.iter().enumerate() {
        if out_degree[i] == 0 {
            violations.push(Violation::NoOutgoing { vertex: v.id.clone() });
        } else if (weight_sum[i] - 1.0).abs() > WEIGHT_TOL {
            violations.push(Violation::WeightSum {
                vertex: v.id.clone(),
                sum: weight_sum[i],
            });
        }
        if in_degree[i] == 0 {
            violations.push(Violation::NoIncoming { vertex: v.id.clone() });
        }
    }

    if profile == Profile::Buffered && graph.vertices.iter().all(|v| v.buffer.is_none()) {
        violations.push(Violation::NoBuffer);
    }

    ValidationReport {
        violations,
        out_degree: graph
            .vertices
            .iter()
            .zip(out_degree)
            .map(|(v, d)| (v.id.clone(), d))
            .collect(),
    }
}
