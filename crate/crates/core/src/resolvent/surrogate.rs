//! Matrix-scale surrogate of the perturbation argument.
//!
//! `A₀` has nonnegative off-diagonal entries and column sums `−ℓ_j < 0`;
//! `B₀ = p ℓᵀ` with `p` a probability vector, so `𝟙ᵀ(A₀ + B₀) = 0` and
//! `A₀ + B₀` generates a stochastic matrix semigroup.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Times at which `exp((A₀ + B₀) t)` is checked.
pub const EXP_TIMES: [f64; 4] = [0.1, 1.0, 5.0, 20.0];

const NEUMANN_TOL: f64 = 1e-10;
const COLUMN_TOL: f64 = 1e-10;
const ENTRY_FLOOR: f64 = -1e-12;
/// Series are evaluated where `‖R(λ, A₀) B₀‖₁` is at most this.
const TEST_CONTRACTION: f64 = 0.5;

/// Log-spaced `λ` values from `1e-3` to `1e3`.
pub fn lambda_grid() -> Vec<f64> {
    (0..=60).map(|j| 10f64.powf(-3.0 + j as f64 / 10.0)).collect()
}

fn norm_l1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max)
}

fn resolvent(a0: &DMatrix<f64>, lambda: f64) -> Option<DMatrix<f64>> {
    let d = a0.nrows();
    (DMatrix::identity(d, d) * lambda - a0).try_inverse()
}

/// `matrix exp` by scaling and squaring with a Padé approximant.
pub fn matrix_exponential(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

/// `Σ_k (R(λ, A₀) B₀)^k R(λ, A₀)`, summed until a term falls below
/// `tol · ‖sum‖₁`. Returns the sum and the number of terms, or `None` if the
/// resolvent does not exist or the budget runs out.
pub fn neumann_resolvent(
    a0: &DMatrix<f64>,
    b0: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
    max_terms: usize,
) -> Option<(DMatrix<f64>, usize)> {
    let r = resolvent(a0, lambda)?;
    let k = &r * b0;
    let mut term = r.clone();
    let mut sum = r;
    for terms in 1..=max_terms {
        if norm_l1(&term) <= tol * norm_l1(&sum) {
            return Some((sum, terms));
        }
        term = &k * &term;
        sum += &term;
    }
    None
}

/// Draws a pair `(A₀, B₀)` of size `dim`.
pub fn random_pair(dim: usize, rng: &mut impl Rng) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a0 = DMatrix::zeros(dim, dim);
    let leak: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..1.0)).collect();
    for j in 0..dim {
        let mut col = 0.0;
        for i in (0..dim).filter(|&i| i != j) {
            if rng.random_bool(0.5) {
                let v = rng.random_range(0.0..1.0);
                a0[(i, j)] = v;
                col += v;
            }
        }
        a0[(j, j)] = -(col + leak[j]);
    }
    let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(1e-3..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let b0 = DMatrix::from_fn(dim, dim, |i, j| raw[i] / total * leak[j]);
    (a0, b0)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairCheck {
    pub dim: usize,
    /// Smallest grid `λ` with `‖R(λ, A₀) B₀‖₁ < 1`.
    pub threshold: Option<f64>,
    /// `λ` values where the series was compared with the inverse.
    pub series_lambdas: Vec<f64>,
    /// Largest entrywise gap between series and inverse, relative to the
    /// inverse's largest entry.
    pub neumann_error: f64,
    pub neumann_terms: usize,
    /// `sup_λ λ ‖R(λ, A₀)‖₁` over the grid.
    pub resolvent_bound: f64,
    /// Largest `|Σ_i exp(Mt)_{ij} − 1|` over columns and check times.
    pub exp_column_error: f64,
    pub exp_min_entry: f64,
    pub passed: bool,
}

/// Runs the three checks on one pair.
pub fn check_pair(a0: &DMatrix<f64>, b0: &DMatrix<f64>) -> PairCheck {
    let grid = lambda_grid();
    let contraction: Vec<Option<f64>> = grid
        .iter()
        .map(|&l| resolvent(a0, l).map(|r| norm_l1(&(r * b0))))
        .collect();
    let threshold = grid
        .iter()
        .zip(&contraction)
        .find(|(_, c)| c.is_some_and(|c| c < 1.0))
        .map(|(l, _)| *l);
    let test_lambda = grid
        .iter()
        .zip(&contraction)
        .find(|(_, c)| c.is_some_and(|c| c <= TEST_CONTRACTION))
        .map(|(l, _)| *l);

    let mut series_lambdas = Vec::new();
    let mut neumann_error: f64 = 0.0;
    let mut neumann_terms = 0;
    let mut series_ok = test_lambda.is_some();
    if let Some(l0) = test_lambda {
        for lambda in [l0, 10.0 * l0] {
            series_lambdas.push(lambda);
            let d = a0.nrows();
            let direct = (DMatrix::identity(d, d) * lambda - a0 - b0).try_inverse();
            match (neumann_resolvent(a0, b0, lambda, 1e-16, 10_000), direct) {
                (Some((sum, terms)), Some(inv)) => {
                    let scale = inv.amax().max(f64::MIN_POSITIVE);
                    neumann_error = neumann_error.max((sum - &inv).amax() / scale);
                    neumann_terms = neumann_terms.max(terms);
                }
                _ => series_ok = false,
            }
        }
    }

    let resolvent_bound = grid
        .iter()
        .map(|&l| resolvent(a0, l).map_or(f64::INFINITY, |r| l * norm_l1(&r)))
        .fold(0.0, f64::max);

    let generator = a0 + b0;
    let mut exp_column_error: f64 = 0.0;
    let mut exp_min_entry = f64::INFINITY;
    for t in EXP_TIMES {
        let e = matrix_exponential(&(&generator * t));
        for col in e.column_iter() {
            exp_column_error = exp_column_error.max((col.sum() - 1.0).abs());
        }
        exp_min_entry = exp_min_entry.min(e.min());
    }

    let passed = series_ok
        && neumann_error <= NEUMANN_TOL
        && resolvent_bound.is_finite()
        && exp_column_error <= COLUMN_TOL
        && exp_min_entry >= ENTRY_FLOOR;
    PairCheck {
        dim: a0.nrows(),
        threshold,
        series_lambdas,
        neumann_error,
        neumann_terms,
        resolvent_bound,
        exp_column_error,
        exp_min_entry,
        passed,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurrogateReport {
    pub max_dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub passed: usize,
    pub max_neumann_error: f64,
    pub max_exp_column_error: f64,
    pub min_exp_entry: f64,
    pub sup_resolvent_bound: f64,
    pub pairs: Vec<PairCheck>,
}

impl SurrogateReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.trials
    }
}

/// `trials` random pairs with sizes drawn uniformly from `[2, dim]`.
pub fn matrix_perturbation_check(dim: usize, trials: usize, seed: u64) -> Result<SurrogateReport> {
    if !(2..=50).contains(&dim) {
        return Err(Error::InvalidParameter(format!("dim must lie in [2, 50], got {dim}")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let pairs: Vec<PairCheck> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let d = rng.random_range(2..=dim);
            let (a0, b0) = random_pair(d, &mut rng);
            check_pair(&a0, &b0)
        })
        .collect();
    Ok(SurrogateReport {
        max_dim: dim,
        trials,
        seed,
        passed: pairs.iter().filter(|p| p.passed).count(),
        max_neumann_error: pairs.iter().map(|p| p.neumann_error).fold(0.0, f64::max),
        max_exp_column_error: pairs.iter().map(|p| p.exp_column_error).fold(0.0, f64::max),
        min_exp_entry: pairs.iter().map(|p| p.exp_min_entry).fold(f64::INFINITY, f64::min),
        sup_resolvent_bound: pairs.iter().map(|p| p.resolvent_bound).fold(0.0, f64::max),
        pairs,
    })
}
