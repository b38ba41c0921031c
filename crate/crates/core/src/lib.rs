//! Buffered transport flows on finite metric graphs.
//!
//! Mass moves along the edges of a directed metric graph at prescribed
//! velocities, is split at vertices according to edge weights, and may be
//! held in vertex buffers that release it at rate `k_v`. The crate builds
//! the incidence and adjacency matrices, integrates the flow with an upwind
//! finite-volume scheme, constructs the stationary state from the Perron
//! vector of the adjacency matrix, and evaluates resolvents of the
//! generator.

pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod resolvent;
pub mod solver;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{
    build_matrices, generate_family, normalize_edges, validate, Edge, Family, MatrixBundle, MetricGraph, Profile,
    VelocityProfile, Vertex,
};
pub use solver::{simulate, FlowModel, FlowState, Observers, StepPolicy};
pub use spectral::{equilibrium_state, is_irreducible, perron_fixed_vector, strongly_connected, EquilibriumState};
