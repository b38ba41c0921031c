use crate::error::{Error, Result};
use crate::graph::{MetricGraph, VelocityProfile};

/// Uniform finite-volume grid on every normalized edge.
///
/// Cell `i` covers `[i/n, (i+1)/n]`; cell 0 touches the head (`x = 0`) and
/// cell `n − 1` the tail (`x = 1`).
#[derive(Debug, Clone)]
pub struct Discretization {
    n: usize,
    dx: f64,
    edges: Vec<EdgeGrid>,
    c_min: f64,
    c_max: f64,
}

#[derive(Debug, Clone)]
pub struct EdgeGrid {
    /// Velocity on the normalized coordinate (`l c`).
    pub profile: VelocityProfile,
    /// `c̃(x_i)` at the `n + 1` interfaces.
    pub interface_velocity: Vec<f64>,
}

impl Discretization {
    pub fn new(graph: &MetricGraph, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 cells per edge, got {n}")));
        }
        let dx = 1.0 / n as f64;
        let edges: Vec<EdgeGrid> = graph
            .edges
            .iter()
            .map(|e| {
                let profile = e.scaled_velocity();
                let interface_velocity = (0..=n).map(|i| profile.eval(i as f64 * dx)).collect();
                EdgeGrid {
                    profile,
                    interface_velocity,
                }
            })
            .collect();
        let (c_min, c_max) = edges
            .iter()
            .flat_map(|e| e.interface_velocity.iter().copied())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c), hi.max(c)));
        if !(c_min > 0.0 && c_max.is_finite()) {
            return Err(Error::InvalidParameter("sampled velocities must be positive and finite".into()));
        }
        Ok(Self {
            n,
            dx,
            edges,
            c_min,
            c_max,
        })
    }

    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: usize) -> &EdgeGrid {
        &self.edges[e]
    }

    pub fn interface(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// Smallest sampled interface velocity.
    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    /// Largest sampled interface velocity.
    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// `c̃_e(0)`, the velocity at the head of edge `e`.
    pub fn head_velocity(&self, e: usize) -> f64 {
        self.edges[e].interface_velocity[0]
    }
}

/// Explicit time-step policy: `dt = θ · min(dx / c_max, 1 / k_max)` unless a
/// fixed step is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub theta: f64,
    pub fixed_dt: Option<f64>,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            theta: 0.9,
            fixed_dt: None,
        }
    }
}

impl StepPolicy {
    pub fn with_theta(theta: f64) -> Self {
        Self {
            theta,
            fixed_dt: None,
        }
    }

    pub fn fixed(dt: f64) -> Self {
        Self {
            theta: 1.0,
            fixed_dt: Some(dt),
        }
    }

    /// Largest step that keeps every interface Courant number and every
    /// `dt k_v` at most one.
    pub fn stability_limit(grid: &Discretization, buffer_rates: &[f64]) -> f64 {
        let k_max = buffer_rates.iter().copied().fold(0.0, f64::max);
        let transport = grid.dx() / grid.c_max();
        if k_max > 0.0 {
            transport.min(1.0 / k_max)
        } else {
            transport
        }
    }

    pub fn time_step(&self, grid: &Discretization, buffer_rates: &[f64]) -> Result<f64> {
        let limit = Self::stability_limit(grid, buffer_rates);
        match self.fixed_dt {
            Some(dt) => {
                let courant_ok = dt * grid.c_max() * grid.cells() as f64 <= 1.0;
                let buffer_ok = buffer_rates.iter().all(|k| dt * k <= 1.0);
                if !(dt > 0.0 && courant_ok && buffer_ok) {
                    return Err(Error::CflViolation { dt, limit });
                }
                Ok(dt)
            }
            None => {
                if !(self.theta > 0.0 && self.theta <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "CFL fraction must lie in (0, 1], got {}",
                        self.theta
                    )));
                }
                Ok(self.theta * limit)
            }
        }
    }
}
