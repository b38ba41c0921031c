//! Explicit finite-volume integration of the buffered flow system.
//!
//! On each normalized edge the density obeys `∂_t u = ∂_x(c̃ u)`, so mass
//! travels from the tail (`x = 1`) to the head (`x = 0`). The leftward flux
//! through interface `i` is `F_i = c̃(x_i) u_i` (upwind: cell `i` lies on the
//! tail side of the interface). The inflow flux at the tail, `F_n`, is set by
//! the boundary coupling
//!
//! ```text
//! φ = 𝔹_NB (c̃(0) u(0)) + 𝔹_B (k b)
//! ```
//!
//! and the flux leaving at the head feeds buffers or unbuffered vertices.

mod grid;
mod state;

use crate::diagnostics::{Trajectory, TrajectoryRow};
use crate::error::{Error, Result};
use crate::graph::{build_matrices, MatrixBundle, MetricGraph};
use crate::spectral::EquilibriumState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use grid::{Discretization, EdgeGrid, StepPolicy};
pub use state::FlowState;

/// Graph, matrices and grid bundled for repeated use.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub graph: MetricGraph,
    pub bundle: MatrixBundle,
    pub grid: Discretization,
}

impl FlowModel {
    pub fn new(graph: MetricGraph, cells: usize) -> Result<Self> {
        let bundle = build_matrices(&graph)?;
        let grid = Discretization::new(&graph, cells)?;
        Ok(Self { graph, bundle, grid })
    }

    pub fn num_edges(&self) -> usize {
        self.bundle.num_edges()
    }

    pub fn num_buffers(&self) -> usize {
        self.bundle.num_buffers()
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    pub fn zero_state(&self) -> FlowState {
        FlowState::zeros(self.num_edges(), self.num_buffers(), self.cells())
    }

    /// Length of the flattened state vector.
    pub fn dimension(&self) -> usize {
        self.num_edges() * self.cells() + self.num_buffers()
    }

    pub fn check_state(&self, state: &FlowState) -> Result<()> {
        state.same_shape(&self.zero_state())
    }

    pub fn time_step(&self, policy: &StepPolicy) -> Result<f64> {
        policy.time_step(&self.grid, &self.bundle.buffer_rates)
    }
}

/// Which part of the discrete generator to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorPart {
    /// `A_h`: transport, boundary coupling, buffer loss and buffer inflow.
    Full,
    /// `C_h`: like `A_h` but without the edge-to-buffer inflow.
    Unperturbed,
    /// `(A − C)_h`: only the edge-to-buffer inflow.
    Perturbation,
}

/// Flux leaving each edge at its head, `c̃_e(0) u_{e,0}`.
pub fn head_outflow(model: &FlowModel, state: &FlowState) -> Vec<f64> {
    (0..model.num_edges())
        .map(|e| model.grid.head_velocity(e) * state.edge(e)[0])
        .collect()
}

/// Inflow flux at the tail of every edge,
/// `φ = 𝔹_NB · outflow + 𝔹_B · (k_v b_v)`.
pub fn boundary_inflows(model: &FlowModel, state: &FlowState) -> Result<Vec<f64>> {
    model.check_state(state)?;
    let outflow = head_outflow(model, state);
    Ok(inflow_from(model, &outflow, &state.buffers))
}

fn inflow_from(model: &FlowModel, outflow: &[f64], buffers: &[f64]) -> Vec<f64> {
    let bundle = &model.bundle;
    let mut phi = bundle.b_nb.mul_vec(outflow);
    let emission: Vec<f64> = buffers
        .iter()
        .zip(&bundle.buffer_rates)
        .map(|(b, k)| k * b)
        .collect();
    for (p, q) in phi.iter_mut().zip(bundle.b_buf.mul_vec(&emission)) {
        *p += q;
    }
    phi
}

/// Mass flux arriving at each buffer, `(Φ⁺)_B · outflow`.
pub fn buffer_inflows(model: &FlowModel, outflow: &[f64]) -> Vec<f64> {
    let mut inflow = vec![0.0; model.num_buffers()];
    for (e, &h) in model.bundle.head.iter().enumerate() {
        if let Some(slot) = model.bundle.buffer_slot[h] {
            inflow[slot] += outflow[e];
        }
    }
    inflow
}

/// Applies (part of) the discrete generator to `state`.
pub fn apply_generator(model: &FlowModel, state: &FlowState, part: GeneratorPart) -> Result<FlowState> {
    model.check_state(state)?;
    let n = model.cells();
    let inv_dx = n as f64;
    let outflow = head_outflow(model, state);
    let mut out = model.zero_state();
    out.t = state.t;

    if part != GeneratorPart::Perturbation {
        let phi = inflow_from(model, &outflow, &state.buffers);
        for e in 0..model.num_edges() {
            let c = &model.grid.edge(e).interface_velocity;
            let u = state.edge(e);
            let du = out.edge_mut(e);
            for i in 0..n {
                let upstream = if i + 1 < n { c[i + 1] * u[i + 1] } else { phi[e] };
                du[i] = inv_dx * (upstream - c[i] * u[i]);
            }
        }
        for (slot, (b, k)) in state.buffers.iter().zip(&model.bundle.buffer_rates).enumerate() {
            out.buffers[slot] = -k * b;
        }
    }
    if part != GeneratorPart::Unperturbed {
        for (slot, inflow) in buffer_inflows(model, &outflow).into_iter().enumerate() {
            out.buffers[slot] += inflow;
        }
    }
    Ok(out)
}

/// Reusable explicit Euler stepper; keeps scratch vectors between steps.
#[derive(Debug)]
pub struct Stepper<'a> {
    model: &'a FlowModel,
    dt: f64,
    outflow: Vec<f64>,
    next: FlowState,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a FlowModel, policy: &StepPolicy) -> Result<Self> {
        let dt = model.time_step(policy)?;
        Ok(Self {
            model,
            dt,
            outflow: vec![0.0; model.num_edges()],
            next: model.zero_state(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` in place by one step.
    pub fn advance(&mut self, state: &mut FlowState) {
        let model = self.model;
        let n = model.cells();
        let ratio = self.dt * n as f64;
        for e in 0..model.num_edges() {
            self.outflow[e] = model.grid.head_velocity(e) * state.edge(e)[0];
        }
        let phi = inflow_from(model, &self.outflow, &state.buffers);

        for e in 0..model.num_edges() {
            let c = &model.grid.edge(e).interface_velocity;
            let u = state.edge(e);
            let next = self.next.edge_mut(e);
            // u_i (1 − r c_i) + r F_{i+1}: both terms are nonnegative under the CFL bound
            for i in 0..n {
                let upstream = if i + 1 < n { c[i + 1] * u[i + 1] } else { phi[e] };
                next[i] = u[i] * (1.0 - ratio * c[i]) + ratio * upstream;
            }
        }
        let inflow = buffer_inflows(model, &self.outflow);
        for (slot, k) in model.bundle.buffer_rates.iter().enumerate() {
            let b = state.buffers[slot];
            self.next.buffers[slot] = b * (1.0 - self.dt * k) + self.dt * inflow[slot];
        }
        self.next.t = state.t + self.dt;
        std::mem::swap(state, &mut self.next);
    }
}

/// One explicit step of the upwind scheme.
pub fn step(model: &FlowModel, state: &FlowState, policy: &StepPolicy) -> Result<FlowState> {
    model.check_state(state)?;
    let mut stepper = Stepper::new(model, policy)?;
    let mut next = state.clone();
    stepper.advance(&mut next);
    Ok(next)
}

/// What to record while simulating.
#[derive(Debug, Clone, Copy)]
pub struct Observers<'a> {
    /// Record a row every `cadence` steps (the initial and final states are
    /// always recorded).
    pub cadence: usize,
    pub equilibrium: Option<&'a EquilibriumState>,
    pub edge_masses: bool,
}

impl Default for Observers<'_> {
    fn default() -> Self {
        Self {
            cadence: 1,
            equilibrium: None,
            edge_masses: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub final_state: FlowState,
    pub steps: usize,
    pub dt: f64,
}

/// Integrates from `init` until `t ≥ horizon` (measured from `init.t`).
pub fn simulate(
    model: &FlowModel,
    init: &FlowState,
    horizon: f64,
    policy: &StepPolicy,
    observers: Observers<'_>,
) -> Result<Simulation> {
    model.check_state(init)?;
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be finite and nonnegative, got {horizon}")));
    }
    if observers.cadence == 0 {
        return Err(Error::InvalidParameter("observer cadence must be positive".into()));
    }
    if let Some(eq) = observers.equilibrium {
        model.check_state(&eq.state)?;
    }
    let mut stepper = Stepper::new(model, policy)?;
    let dt = stepper.dt();
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    let t0 = init.t;

    let record = |state: &FlowState| -> Result<TrajectoryRow> {
        Ok(TrajectoryRow {
            t: state.t,
            total_mass: state.total_mass(),
            min_value: state.min_value(),
            distance: observers.equilibrium.map(|eq| state.distance(&eq.state)).transpose()?,
            edge_masses: if observers.edge_masses {
                state.edge_masses()
            } else {
                Vec::new()
            },
        })
    };

    let mut state = init.clone();
    let mut rows = vec![record(&state)?];
    for k in 1..=steps {
        stepper.advance(&mut state);
        // avoid drift from repeated addition
        state.t = t0 + k as f64 * dt;
        if k % observers.cadence == 0 || k == steps {
            rows.push(record(&state)?);
        }
    }
    Ok(Simulation {
        trajectory: Trajectory {
            rows,
            dt,
            cadence: observers.cadence,
        },
        final_state: state,
        steps,
        dt,
    })
}

pub fn total_mass(state: &FlowState) -> f64 {
    state.total_mass()
}

/// Seeded nonnegative state with cell and buffer values uniform on `[0, 1)`,
/// rescaled to total mass `mass`.
pub fn random_state(model: &FlowModel, seed: u64, mass: f64) -> FlowState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = model.zero_state();
    s.cells.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
    s.buffers.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
    let m = s.total_mass();
    s.scaled(mass / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_family, Family};

    fn two_cycle(n: usize) -> FlowModel {
        FlowModel::new(generate_family(Family::Cycle(2)).unwrap(), n).unwrap()
    }

    #[test]
    fn buffer_emission_feeds_outgoing_edge() {
        let m = two_cycle(8);
        let mut s = m.zero_state();
        s.buffers[0] = 1.0;
        assert_eq!(boundary_inflows(&m, &s).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn kirchhoff_pass_through() {
        let m = two_cycle(8);
        let mut s = m.zero_state();
        // c = 1, so the head trace of e1 equals its first cell
        s.edge_mut(0)[0] = 0.4;
        let phi = boundary_inflows(&m, &s).unwrap();
        assert_eq!(phi, vec![0.0, 0.4]);
    }

    #[test]
    fn fork_splits_by_weight() {
        let m = FlowModel::new(generate_family(Family::ForkMerge(4)).unwrap().without_buffers(), 8).unwrap();
        let mut s = m.zero_state();
        // e5 ends at v1, which forks into e1 and e2
        s.edge_mut(4)[0] = 1.0;
        let phi = boundary_inflows(&m, &s).unwrap();
        assert_eq!(phi, vec![0.5, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_state_stays_zero() {
        let m = two_cycle(16);
        let next = step(&m, &m.zero_state(), &StepPolicy::default()).unwrap();
        assert!(next.cells.iter().chain(&next.buffers).all(|v| *v == 0.0));
    }

    #[test]
    fn point_mass_moves_one_cell_at_unit_courant() {
        let m = two_cycle(16);
        let dt = 1.0 / 16.0;
        let mut s = m.zero_state();
        s.edge_mut(0)[5] = 16.0; // unit mass in cell 5
        let next = step(&m, &s, &StepPolicy::fixed(dt)).unwrap();
        assert_eq!(next.edge(0)[4], 16.0);
        assert_eq!(next.edge(0)[5], 0.0);
        assert!((next.total_mass() - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn point_mass_partial_courant_by_hand() {
        let m = two_cycle(16);
        let dt = 0.5 / 16.0; // Courant number 1/2
        let mut s = m.zero_state();
        s.edge_mut(0)[5] = 16.0;
        let next = step(&m, &s, &StepPolicy::fixed(dt)).unwrap();
        assert_eq!(next.edge(0)[5], 8.0);
        assert_eq!(next.edge(0)[4], 8.0);
        assert!((next.total_mass() - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn head_outflow_enters_buffer() {
        let m = two_cycle(4);
        let dt = 0.25;
        let mut s = m.zero_state();
        s.edge_mut(1)[0] = 4.0; // unit mass at the head of e2 (head v1, buffered)
        let next = step(&m, &s, &StepPolicy::fixed(dt)).unwrap();
        assert_eq!(next.edge(1)[0], 0.0);
        assert_eq!(next.buffers[0], 1.0);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let m = two_cycle(16);
        let err = step(&m, &m.zero_state(), &StepPolicy::fixed(0.1)).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    #[test]
    fn generator_parts_add_up() {
        let m = FlowModel::new(generate_family(Family::RandomScc { n: 6, buffer_fraction: 0.5, seed: 4 }).unwrap(), 10).unwrap();
        let mut s = m.zero_state();
        for (i, v) in s.cells.iter_mut().enumerate() {
            *v = ((i * 37) % 11) as f64 / 7.0;
        }
        for (i, b) in s.buffers.iter_mut().enumerate() {
            *b = 0.3 + i as f64;
        }
        let full = apply_generator(&m, &s, GeneratorPart::Full).unwrap();
        let c = apply_generator(&m, &s, GeneratorPart::Unperturbed).unwrap();
        let p = apply_generator(&m, &s, GeneratorPart::Perturbation).unwrap();
        let sum = c.add_scaled(1.0, &p).unwrap();
        assert!(full.distance(&sum).unwrap() < 1e-12);
        // the generator conserves mass: 1ᵀ A_h f = 0
        assert!(full.total_mass().abs() < 1e-10 * s.norm().max(1.0) * m.cells() as f64);
    }

    #[test]
    fn simulate_records_initial_and_final_rows() {
        let m = two_cycle(16);
        let mut s = m.zero_state();
        s.buffers[0] = 1.0;
        let run = simulate(&m, &s, 1.0, &StepPolicy::default(), Observers { cadence: 7, ..Default::default() }).unwrap();
        let rows = &run.trajectory.rows;
        assert_eq!(rows[0].t, 0.0);
        assert!(rows.last().unwrap().t >= 1.0);
        assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(run.final_state.t, rows.last().unwrap().t);
    }
}
