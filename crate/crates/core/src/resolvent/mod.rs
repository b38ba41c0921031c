//! Resolvents of the unperturbed generator `C` and the full generator `A`.
//!
//! On an edge, `(λ − C) f = g` reads `λ u − (c̃ u)' = w`, whose solutions are
//!
//! ```text
//! u(x) = e^{D(x)} μ + e^{D(x)} ∫_x^1 (w / c̃) e^{−D},   D(x) = ∫_0^x (λ − c̃') / c̃
//! ```
//!
//! with `μ ∈ ℝ^E` fixed by the boundary coupling. Buffers decouple:
//! `b_v = z_v / (λ + k_v)`. The full generator differs from `C` by the
//! edge-to-buffer inflow, so `R(λ, A)` is the Neumann series
//! `Σ_k (R(λ, C)(A − C))^k R(λ, C)`.

mod surrogate;

pub use surrogate::{
    check_pair, lambda_grid, matrix_exponential, matrix_perturbation_check, neumann_resolvent, random_pair,
    PairCheck, SurrogateReport, EXP_TIMES,
};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{apply_generator, buffer_inflows, head_outflow, FlowModel, FlowState, GeneratorPart};

/// Largest state dimension for which the dense direct solve is attempted.
pub const DIRECT_MAX_DIM: usize = 4096;
/// Default number of Neumann terms before giving up.
pub const DEFAULT_MAX_TERMS: usize = 200;
/// Consecutive non-decreasing term norms that count as divergence.
pub const STALL_TERMS: usize = 5;
/// `exp(D)` is refused beyond this exponent.
const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone)]
pub struct ResolventInput {
    pub lambda: f64,
    /// Right-hand side `g`: cell values on the edges and buffer scalars.
    pub rhs: FlowState,
}

impl ResolventInput {
    pub fn new(lambda: f64, rhs: FlowState) -> Self {
        Self { lambda, rhs }
    }

    /// Samples `w_e` at cell midpoints; `z` gives the buffer components.
    pub fn from_fn(model: &FlowModel, lambda: f64, w: impl Fn(usize, f64) -> f64, z: &[f64]) -> Result<Self> {
        let mut rhs = model.zero_state();
        if z.len() != rhs.buffers.len() {
            return Err(Error::DimensionMismatch {
                expected: rhs.buffers.len(),
                found: z.len(),
            });
        }
        let dx = model.grid.dx();
        for e in 0..model.num_edges() {
            for (i, v) in rhs.edge_mut(e).iter_mut().enumerate() {
                *v = w(e, (i as f64 + 0.5) * dx);
            }
        }
        rhs.buffers.copy_from_slice(z);
        Ok(Self { lambda, rhs })
    }

    fn check(&self, model: &FlowModel) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        model.check_state(&self.rhs)?;
        if self.rhs.cells.iter().chain(&self.rhs.buffers).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("right-hand side has non-finite samples".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventOutput {
    #[serde(skip)]
    pub f: FlowState,
    /// The constant vector `μ` of the closed form; `None` for series output.
    pub mu: Option<Vec<f64>>,
    /// `‖(λ − C_h) f − g‖` for `resolvent_c`, `‖(λ − A_h) f − g‖` for the series.
    pub residual: f64,
    /// Number of Neumann terms summed (1 for the closed form).
    pub terms: usize,
}

/// `(λ − G_h) f − g` in norm, for the chosen part of the discrete generator.
pub fn discrete_residual(
    model: &FlowModel,
    lambda: f64,
    f: &FlowState,
    g: &FlowState,
    part: GeneratorPart,
) -> Result<f64> {
    let gf = apply_generator(model, f, part)?;
    let lhs = f.scaled(lambda).add_scaled(-1.0, &gf)?;
    lhs.distance(g)
}

/// `λ / c_max − sup|c̃'| / c_min`; positive values put `λ` in the range
/// where the boundary system is diagonally dominant. Conservative and
/// reported for information only.
pub fn a_priori_margin(model: &FlowModel, lambda: f64) -> f64 {
    let grid = &model.grid;
    let n = grid.cells();
    let slope = (0..model.num_edges())
        .flat_map(|e| {
            let p = &grid.edge(e).profile;
            (0..n).map(move |i| p.slope_at((i as f64 + 0.5) / n as f64).abs())
        })
        .fold(0.0, f64::max);
    lambda / grid.c_max() - slope / grid.c_min()
}

struct EdgeQuadrature {
    /// `D` at the interfaces.
    d: Vec<f64>,
    /// `∫_{x_i}^1 (w / c̃) e^{−D}` at the interfaces.
    tail: Vec<f64>,
}

fn edge_quadrature(model: &FlowModel, e: usize, lambda: f64, w: &[f64]) -> EdgeQuadrature {
    let grid = &model.grid;
    let n = grid.cells();
    let dx = grid.dx();
    let eg = grid.edge(e);
    let c = &eg.interface_velocity;
    let mut d = vec![0.0; n + 1];
    for i in 0..n {
        let slope = eg.profile.slope_at(grid.interface(i) + 0.5 * dx);
        d[i + 1] = d[i] + 0.5 * dx * ((lambda - slope) / c[i] + (lambda - slope) / c[i + 1]);
    }
    let mut tail = vec![0.0; n + 1];
    for i in (0..n).rev() {
        tail[i] = tail[i + 1] + 0.5 * dx * w[i] * ((-d[i]).exp() / c[i] + (-d[i + 1]).exp() / c[i + 1]);
    }
    EdgeQuadrature { d, tail }
}

/// Closed-form resolvent of `C` with trapezoidal quadrature for `D` and the
/// tail integrals; the output holds cell averages of `u`.
pub fn resolvent_c(model: &FlowModel, input: &ResolventInput) -> Result<ResolventOutput> {
    input.check(model)?;
    let lambda = input.lambda;
    let ne = model.num_edges();
    let n = model.cells();
    let bundle = &model.bundle;
    let grid = &model.grid;

    let quads: Vec<EdgeQuadrature> = (0..ne)
        .into_par_iter()
        .map(|e| edge_quadrature(model, e, lambda, input.rhs.edge(e)))
        .collect();
    let exponent = quads.iter().map(|q| q.d[n]).fold(f64::NEG_INFINITY, f64::max);
    if !(exponent <= MAX_EXPONENT) {
        return Err(Error::QuadratureOverflow { lambda, exponent });
    }

    let buffers: Vec<f64> = input
        .rhs
        .buffers
        .iter()
        .zip(&bundle.buffer_rates)
        .map(|(z, k)| z / (lambda + k))
        .collect();
    let emission: Vec<f64> = buffers.iter().zip(&bundle.buffer_rates).map(|(b, k)| k * b).collect();

    // diag(c̃(1) p) μ − 𝔹_NB diag(c̃(0)) μ = 𝔹_NB (c̃(0) q) + 𝔹_B (k b)
    let c0: Vec<f64> = (0..ne).map(|e| grid.head_velocity(e)).collect();
    let mut m = -(bundle.b_nb.to_dense() * DMatrix::from_diagonal(&DVector::from_column_slice(&c0)));
    for (e, q) in quads.iter().enumerate() {
        m[(e, e)] += grid.edge(e).interface_velocity[n] * q.d[n].exp();
    }
    let c0q: Vec<f64> = (0..ne).map(|e| c0[e] * quads[e].tail[0]).collect();
    let rhs: Vec<f64> = bundle
        .b_nb
        .mul_vec(&c0q)
        .iter()
        .zip(bundle.b_buf.mul_vec(&emission))
        .map(|(a, b)| a + b)
        .collect();
    let mu = solve_checked(m, &rhs).ok_or(Error::SystemSingular { lambda })?;

    let mut f = model.zero_state();
    f.t = input.rhs.t;
    for (e, q) in quads.iter().enumerate() {
        let trace: Vec<f64> = (0..=n).map(|i| q.d[i].exp() * (mu[e] + q.tail[i])).collect();
        for (i, u) in f.edge_mut(e).iter_mut().enumerate() {
            *u = 0.5 * (trace[i] + trace[i + 1]);
        }
    }
    f.buffers = buffers;
    let residual = discrete_residual(model, lambda, &f, &input.rhs, GeneratorPart::Unperturbed)?;
    Ok(ResolventOutput {
        f,
        mu: Some(mu),
        residual,
        terms: 1,
    })
}

/// LU solve that treats a tiny relative pivot as singular.
fn solve_checked(m: DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let scale = m.amax();
    let lu = m.lu();
    let pivots = lu.u().diagonal();
    if !(scale > 0.0) || pivots.iter().any(|p| !(p.abs() > 1e-13 * scale)) {
        return None;
    }
    let x = lu.solve(&DVector::from_column_slice(rhs))?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Exact inverse of `λ − C_h` for the upwind generator.
///
/// Each edge is swept from the tail: `u_i = a_i + s_i φ_e` with `φ` the
/// unknown tail inflow, which then solves the `E × E` system
/// `(I − 𝔹_NB diag(c̃(0) s_0)) φ = 𝔹_NB (c̃(0) a_0) + 𝔹_B (k b)`.
pub fn discrete_resolvent_c(model: &FlowModel, lambda: f64, g: &FlowState) -> Result<FlowState> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    model.check_state(g)?;
    let ne = model.num_edges();
    let n = model.cells();
    let r = n as f64;
    let bundle = &model.bundle;

    let mut a = model.zero_state();
    let mut s = model.zero_state();
    for e in 0..ne {
        let c = &model.grid.edge(e).interface_velocity;
        let w = g.edge(e);
        let (ae, se) = (a.edge_mut(e), s.edge_mut(e));
        // the tail cell receives φ_e directly
        let denom = lambda + r * c[n - 1];
        ae[n - 1] = w[n - 1] / denom;
        se[n - 1] = r / denom;
        for i in (0..n - 1).rev() {
            let denom = lambda + r * c[i];
            ae[i] = (w[i] + r * c[i + 1] * ae[i + 1]) / denom;
            se[i] = r * c[i + 1] * se[i + 1] / denom;
        }
    }
    let buffers: Vec<f64> = g
        .buffers
        .iter()
        .zip(&bundle.buffer_rates)
        .map(|(z, k)| z / (lambda + k))
        .collect();
    let emission: Vec<f64> = buffers.iter().zip(&bundle.buffer_rates).map(|(b, k)| k * b).collect();

    let c0: Vec<f64> = (0..ne).map(|e| model.grid.head_velocity(e)).collect();
    let gain: Vec<f64> = (0..ne).map(|e| c0[e] * s.edge(e)[0]).collect();
    let m = DMatrix::identity(ne, ne)
        - bundle.b_nb.to_dense() * DMatrix::from_diagonal(&DVector::from_column_slice(&gain));
    let c0a: Vec<f64> = (0..ne).map(|e| c0[e] * a.edge(e)[0]).collect();
    let rhs: Vec<f64> = bundle
        .b_nb
        .mul_vec(&c0a)
        .iter()
        .zip(bundle.b_buf.mul_vec(&emission))
        .map(|(x, y)| x + y)
        .collect();
    let phi = solve_checked(m, &rhs).ok_or(Error::SystemSingular { lambda })?;

    let mut f = a;
    for (e, p) in phi.iter().enumerate() {
        for (u, si) in f.edge_mut(e).iter_mut().zip(s.edge(e)) {
            *u += si * p;
        }
    }
    f.buffers = buffers;
    f.t = g.t;
    Ok(f)
}

/// `(A − C)_h f`: head outflow deposited into the buffers, zero on edges.
pub fn perturbation(model: &FlowModel, f: &FlowState) -> FlowState {
    let mut out = model.zero_state();
    out.buffers = buffer_inflows(model, &head_outflow(model, f));
    out.t = f.t;
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesOptions {
    /// Stop once a term has norm at most `tol`.
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

/// Neumann series for `R(λ, A)` built on the discrete `R(λ, C_h)`.
pub fn resolvent_a_series(model: &FlowModel, input: &ResolventInput, tol: f64) -> Result<ResolventOutput> {
    resolvent_a_series_with(
        model,
        input,
        &SeriesOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn resolvent_a_series_with(
    model: &FlowModel,
    input: &ResolventInput,
    options: &SeriesOptions,
) -> Result<ResolventOutput> {
    input.check(model)?;
    let lambda = input.lambda;
    let mut term = discrete_resolvent_c(model, lambda, &input.rhs)?;
    let mut sum = term.clone();
    let mut norm = term.norm();
    let mut ratio = f64::NAN;
    let mut terms = 1;
    let mut stalled = 0;
    while norm > options.tol {
        if terms >= options.max_terms {
            return Err(Error::SeriesDiverging {
                lambda,
                terms,
                reason: format!(
                    "term budget of {} exhausted with last term norm {norm:.3e} (term ratio {ratio:.4})",
                    options.max_terms
                ),
            });
        }
        term = discrete_resolvent_c(model, lambda, &perturbation(model, &term))?;
        let next = term.norm();
        terms += 1;
        if !next.is_finite() {
            return Err(Error::SeriesDiverging {
                lambda,
                terms,
                reason: "term norm is not finite".into(),
            });
        }
        stalled = if next >= norm { stalled + 1 } else { 0 };
        if stalled >= STALL_TERMS {
            return Err(Error::SeriesDiverging {
                lambda,
                terms,
                reason: format!("term norms failed to decrease for {STALL_TERMS} consecutive terms"),
            });
        }
        ratio = next / norm;
        norm = next;
        sum = sum.add_scaled(1.0, &term)?;
    }
    let residual = discrete_residual(model, lambda, &sum, &input.rhs, GeneratorPart::Full)?;
    Ok(ResolventOutput {
        f: sum,
        mu: None,
        residual,
        terms,
    })
}

/// Dense matrix of a part of the discrete generator in the flattened
/// `[cells…, buffers…]` coordinates.
pub fn generator_matrix(model: &FlowModel, part: GeneratorPart) -> Result<DMatrix<f64>> {
    let dim = model.dimension();
    let template = model.zero_state();
    let columns: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut unit = vec![0.0; dim];
            unit[j] = 1.0;
            apply_generator(model, &template.reshape_like(&unit), part).map(|s| s.to_vec())
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(dim, dim, |i, j| columns[j][i]))
}

/// Solves `(λ − A_h) f = g` by dense LU; the independent check on the series.
pub fn direct_resolvent_a(model: &FlowModel, input: &ResolventInput) -> Result<FlowState> {
    input.check(model)?;
    let dim = model.dimension();
    if dim > DIRECT_MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "direct solve limited to dimension {DIRECT_MAX_DIM}, got {dim}"
        )));
    }
    let a = generator_matrix(model, GeneratorPart::Full)?;
    let m = DMatrix::identity(dim, dim) * input.lambda - a;
    let x = solve_checked(m, &input.rhs.to_vec()).ok_or(Error::SystemSingular { lambda: input.lambda })?;
    let mut f = input.rhs.reshape_like(&x);
    f.t = input.rhs.t;
    Ok(f)
}
