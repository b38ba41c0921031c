//! Convergence measurements on simulated trajectories.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{FlowModel, FlowState, StepPolicy, Stepper};
use crate::spectral::{equilibrium_state, perron_fixed_vector, EquilibriumState, FIXED_TOL};

/// CSV header of trajectory files.
pub const CSV_HEADER: &str = "t,total_mass,min_value,distance,rate_window_flag";

/// Default period-detection tolerance relative to the initial mass.
pub const PERIOD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub total_mass: f64,
    pub min_value: f64,
    pub distance: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub edge_masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    /// Solver step.
    pub dt: f64,
    /// Steps between recorded rows.
    pub cadence: usize,
}

impl Trajectory {
    /// Nominal time between consecutive rows.
    pub fn spacing(&self) -> f64 {
        self.dt * self.cadence as f64
    }

    pub fn final_distance(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.distance)
    }

    /// Largest relative deviation of `total_mass` from its initial value.
    pub fn mass_drift(&self) -> f64 {
        let Some(first) = self.rows.first() else { return 0.0 };
        let m0 = first.total_mass;
        self.rows
            .iter()
            .map(|r| (r.total_mass - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.rows.iter().map(|r| r.min_value).fold(f64::INFINITY, f64::min)
    }

    /// Renders the CSV file; rows whose time lies in `window` get flag 1.
    pub fn to_csv(&self, window: Option<(f64, f64)>) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let flag = window.is_some_and(|(a, b)| r.t >= a && r.t <= b) as u8;
            let distance = r.distance.map(|d| d.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", r.t, r.total_mass, r.min_value, distance, flag);
        }
        out
    }
}

/// Checks a trajectory CSV against the declared schema: header, five
/// columns, numeric fields, strictly increasing `t`. Returns the row count.
pub fn check_csv(text: &str) -> std::result::Result<usize, String> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err("missing or wrong header".into());
    }
    let mut last_t = f64::NEG_INFINITY;
    let mut count = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format!("row {i}: expected 5 columns, found {}", fields.len()));
        }
        let t: f64 = fields[0].parse().map_err(|_| format!("row {i}: bad t"))?;
        if t <= last_t {
            return Err(format!("row {i}: t not increasing"));
        }
        last_t = t;
        for f in &fields[1..3] {
            f.parse::<f64>().map_err(|_| format!("row {i}: bad number {f}"))?;
        }
        if !fields[3].is_empty() {
            fields[3].parse::<f64>().map_err(|_| format!("row {i}: bad distance"))?;
        }
        if fields[4] != "0" && fields[4] != "1" {
            return Err(format!("row {i}: bad flag"));
        }
        count += 1;
    }
    Ok(count)
}

/// L¹ distance between a state and an equilibrium on the same grid.
pub fn distance_to_equilibrium(state: &FlowState, eq: &EquilibriumState) -> Result<f64> {
    state.distance(&eq.state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Slope of `ln(distance)` against `t`.
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares slope of `ln(distance)` over rows with `t ∈ [t0, t1]`.
///
/// A perfectly flat series reports `r_squared = 1`.
pub fn fit_decay_rate(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let points: Vec<(f64, f64)> = traj
        .rows
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1)
        .filter_map(|r| r.distance.filter(|d| *d > 0.0).map(|d| (r.t, d.ln())))
        .collect();
    if points.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 rows with positive distance in the window, found {}",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sty: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let rate = sty / stt;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - mean_y - rate * (p.0 - mean_t)).powi(2))
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * m * mean_y.abs().max(1.0) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(DecayFit {
        rate,
        r_squared,
        points: points.len(),
    })
}

/// Smallest lag `τ` (a multiple of the row spacing) with
/// `sup |s(t + τ) − s(t)| ≤ tol` over the second half of the trajectory,
/// where `s` collects the distance and the per-edge masses of each row.
///
/// A constant trajectory reports the row spacing itself.
pub fn detect_period(traj: &Trajectory, tol: f64) -> Option<f64> {
    let spacing = traj.spacing();
    let mut rows: &[TrajectoryRow] = &traj.rows;
    // the last row may sit off the sampling lattice
    if rows.len() >= 2 {
        let last = rows.len() - 1;
        if ((rows[last].t - rows[last - 1].t) - spacing).abs() > 1e-9 * spacing.max(1.0) {
            rows = &rows[..last];
        }
    }
    let signal: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.distance.iter().chain(&r.edge_masses).copied().collect())
        .collect();
    if signal.first().is_none_or(|s| s.is_empty()) {
        return None;
    }
    let tail = &signal[signal.len() / 2..];
    (1..=tail.len() / 2)
        .find(|&lag| {
            (0..tail.len() - lag).all(|j| {
                tail[j]
                    .iter()
                    .zip(&tail[j + lag])
                    .all(|(a, b)| (b - a).abs() <= tol)
            })
        })
        .map(|lag| lag as f64 * spacing)
}

/// Rows in the second half of the trajectory whose distance exceeds the
/// previous row's by more than `tol`. Recorded, not asserted: the decay is
/// not known to be monotone.
pub fn tail_increases(traj: &Trajectory, tol: f64) -> usize {
    let distances: Vec<f64> = traj.rows.iter().filter_map(|r| r.distance).collect();
    let tail = &distances[distances.len() / 2..];
    tail.windows(2).filter(|w| w[1] > w[0] + tol).count()
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    /// Largest terminal distance over the basis; a probe of the operator
    /// norm of `T(t) − P`, not the norm itself.
    pub sup_distance: f64,
    pub distances: Vec<f64>,
    pub labels: Vec<String>,
    pub horizon: f64,
}

/// Unit-mass initial states: one indicator per buffer (at most
/// `basis_size − 1` of them when `basis_size > 1`) and evenly spaced
/// single-cell indicators for the rest.
pub fn probe_basis(model: &FlowModel, basis_size: usize) -> Vec<(String, FlowState)> {
    let n = model.cells();
    let total_cells = model.num_edges() * n;
    let n_buffers = if basis_size > 1 {
        model.num_buffers().min(basis_size - 1)
    } else {
        0
    };
    let n_cells = (basis_size - n_buffers).min(total_cells);
    let mut basis = Vec::with_capacity(n_cells + n_buffers);
    for j in 0..n_cells {
        let idx = (2 * j + 1) * total_cells / (2 * n_cells);
        let mut s = model.zero_state();
        s.cells[idx] = n as f64;
        let (e, i) = (idx / n, idx % n);
        basis.push((format!("{}[{}]", model.graph.edges[e].id, i), s));
    }
    for slot in 0..n_buffers {
        let mut s = model.zero_state();
        s.buffers[slot] = 1.0;
        let v = model.bundle.buffered[slot];
        basis.push((format!("buffer {}", model.graph.vertices[v].id), s));
    }
    basis
}

/// Simulates every probe-basis state to `horizon` and reports the largest
/// terminal distance to the unit-mass equilibrium.
pub fn operator_norm_probe(
    model: &FlowModel,
    basis_size: usize,
    horizon: f64,
    policy: &StepPolicy,
) -> Result<ProbeReport> {
    if basis_size == 0 {
        return Err(Error::InvalidParameter("basis size must be positive".into()));
    }
    let w = perron_fixed_vector(&model.bundle, FIXED_TOL)?;
    let eq = equilibrium_state(model, &w, 1.0)?;
    let dt = model.time_step(policy)?;
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;

    let basis = probe_basis(model, basis_size);
    let distances: Vec<f64> = basis
        .par_iter()
        .map(|(_, init)| -> Result<f64> {
            let mut stepper = Stepper::new(model, policy)?;
            let mut state = init.clone();
            for _ in 0..steps {
                stepper.advance(&mut state);
            }
            distance_to_equilibrium(&state, &eq)
        })
        .collect::<Result<_>>()?;
    Ok(ProbeReport {
        sup_distance: distances.iter().copied().fold(0.0, f64::max),
        labels: basis.into_iter().map(|(l, _)| l).collect(),
        distances,
        horizon,
    })
}
