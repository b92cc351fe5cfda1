//! Weighted-l1 penalized linear and logistic regression.
//!
//! The objective is `loss(b0, beta) + rho * sum_d w_d |beta_d|` with an
//! always-unpenalized intercept `b0`. Losses are averaged over the `n` rows:
//!
//! * squared error: `1/(2n) sum_i (y_i - b0 - x_i' beta)^2`
//! * logistic: `1/n sum_i [log(1 + exp(eta_i)) - y_i eta_i]`
//!
//! [`fit_weighted_l1`] is the production coordinate-descent solver;
//! [`reference_prox`] is an independent accelerated proximal-gradient solver
//! for small problems that also handles the overlapping group penalty.

mod cd;
pub mod reference;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use reference::{reference_prox, ReferencePenalty, REFERENCE_MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    SquaredError,
    LogisticNll,
}

/// One penalized regression.
#[derive(Debug, Clone)]
pub struct PenalizedProblem {
    /// n x d design (no intercept column).
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub loss: Loss,
    /// Nonnegative per-column penalty weights; 0 leaves a column unpenalized.
    pub weights: Vec<f64>,
    /// Coordinate groups for the overlapping group penalty (reference solver only).
    pub groups: Option<Vec<Vec<usize>>>,
    pub intercept: bool,
}

impl PenalizedProblem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, loss: Loss, weights: Vec<f64>) -> Result<Self> {
        let problem = Self {
            x,
            y,
            loss,
            weights,
            groups: None,
            intercept: true,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_groups(mut self, groups: Vec<Vec<usize>>) -> Result<Self> {
        self.groups = Some(groups);
        self.validate()?;
        Ok(self)
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.len() != self.x.nrows() {
            return Err(Error::Dimension(format!(
                "{} responses for {} rows",
                self.y.len(),
                self.x.nrows()
            )));
        }
        if self.weights.len() != self.x.ncols() {
            return Err(Error::Dimension(format!(
                "{} weights for {} columns",
                self.weights.len(),
                self.x.ncols()
            )));
        }
        if self.x.nrows() == 0 {
            return Err(Error::InvalidInput("problem has no rows".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(
                "penalty weights must be finite and nonnegative".into(),
            ));
        }
        if self.loss == Loss::LogisticNll && self.y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidInput("logistic response must be 0/1".into()));
        }
        if let Some(groups) = &self.groups {
            if groups.iter().flatten().any(|&c| c >= self.d()) {
                return Err(Error::Dimension("group index out of range".into()));
            }
        }
        Ok(())
    }

    /// Linear predictor `b0 + X beta`.
    pub fn predictor(&self, coefs: &[f64], intercept: f64) -> DVector<f64> {
        let beta = DVector::from_column_slice(coefs);
        let mut eta = &self.x * beta;
        eta.add_scalar_mut(intercept);
        eta
    }

    /// Average loss at `(intercept, coefs)`.
    pub fn loss_value(&self, coefs: &[f64], intercept: f64) -> f64 {
        let eta = self.predictor(coefs, intercept);
        loss_from_predictor(self.loss, &self.y, &eta)
    }

    /// Gradient of the average loss with respect to `(coefs, intercept)`.
    pub fn gradient(&self, coefs: &[f64], intercept: f64) -> (DVector<f64>, f64) {
        let eta = self.predictor(coefs, intercept);
        let resid = self.loss_derivative(&eta);
        let n = self.n() as f64;
        (self.x.tr_mul(&resid) / n, resid.sum() / n)
    }

    /// dLoss_i / d eta_i (without the 1/n).
    fn loss_derivative(&self, eta: &DVector<f64>) -> DVector<f64> {
        match self.loss {
            Loss::SquaredError => eta - &self.y,
            Loss::LogisticNll => DVector::from_fn(eta.len(), |i, _| sigmoid(eta[i]) - self.y[i]),
        }
    }

    /// Weighted-l1 objective.
    pub fn objective(&self, coefs: &[f64], intercept: f64, rho: f64) -> f64 {
        let penalty = l1_penalty(&self.weights, coefs);
        let loss = self.loss_value(coefs, intercept);
        if penalty == 0.0 {
            loss
        } else {
            loss + rho * penalty
        }
    }

    /// Largest violation of the weighted-l1 optimality conditions, including
    /// the intercept's zero-gradient condition.
    pub fn kkt_residual(&self, coefs: &[f64], intercept: f64, rho: f64) -> f64 {
        let (grad, g0) = self.gradient(coefs, intercept);
        let mut worst = if self.intercept { g0.abs() } else { 0.0 };
        for d in 0..self.d() {
            let t = if self.weights[d] > 0.0 {
                rho * self.weights[d]
            } else {
                0.0
            };
            let r = if coefs[d] != 0.0 {
                (grad[d] + t * coefs[d].signum()).abs()
            } else {
                (grad[d].abs() - t).max(0.0)
            };
            worst = worst.max(r);
        }
        worst
    }

    /// Smallest `rho` at which every penalized coefficient is zero.
    pub fn rho_max(&self) -> Result<f64> {
        let base = fit_weighted_l1(self, f64::INFINITY, None, &SolverOptions::default())?;
        let (grad, _) = self.gradient(&base.coefs, base.intercept);
        Ok((0..self.d())
            .filter(|&d| self.weights[d] > 0.0)
            .map(|d| grad[d].abs() / self.weights[d])
            .fold(0.0, f64::max))
    }
}

pub(crate) fn l1_penalty(weights: &[f64], coefs: &[f64]) -> f64 {
    weights
        .iter()
        .zip(coefs)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, b)| w * b.abs())
        .sum()
}

pub(crate) fn loss_from_predictor(loss: Loss, y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    match loss {
        Loss::SquaredError => 0.5 * (y - eta).norm_squared() / n,
        Loss::LogisticNll => {
            eta.iter()
                .zip(y.iter())
                .map(|(&e, &yi)| softplus(e) - yi * e)
                .sum::<f64>()
                / n
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Maximum coordinate update (standardized scale) that counts as converged.
    pub tol: f64,
    /// Required KKT residual of a converged fit.
    pub kkt_tol: f64,
    /// Budget of coordinate sweeps per fit.
    pub max_sweeps: usize,
    /// Budget of Newton steps per logistic fit.
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            kkt_tol: 1e-7,
            max_sweeps: 10_000,
            max_newton: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub coefs: Vec<f64>,
    pub intercept: f64,
    pub rho: f64,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

impl FitResult {
    pub fn support(&self) -> Vec<usize> {
        (0..self.coefs.len())
            .filter(|&d| self.coefs[d] != 0.0)
            .collect()
    }
}

/// Minimize `loss + rho * sum_d w_d |beta_d|` by cyclic coordinate descent,
/// optionally warm-started from `init = (coefs, intercept)`.
///
/// Fits that exhaust the iteration budget come back with `converged = false`.
pub fn fit_weighted_l1(
    problem: &PenalizedProblem,
    rho: f64,
    init: Option<(&[f64], f64)>,
    options: &SolverOptions,
) -> Result<FitResult> {
    problem.validate()?;
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::InvalidInput(format!(
            "rho must be nonnegative, got {rho}"
        )));
    }
    if let Some((c, _)) = init {
        if c.len() != problem.d() {
            return Err(Error::Dimension(format!(
                "warm start has {} coefficients for {}",
                c.len(),
                problem.d()
            )));
        }
    }
    Ok(cd::Standardized::new(problem).fit(rho, init, options))
}

/// Fits along a strictly descending `rho` grid, each warm-started from the
/// previous one.
pub fn fit_path(
    problem: &PenalizedProblem,
    grid: &[f64],
    options: &SolverOptions,
) -> Result<Vec<FitResult>> {
    problem.validate()?;
    if grid.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidInput(
            "rho grid must be strictly descending".into(),
        ));
    }
    let std = cd::Standardized::new(problem);
    let mut out: Vec<FitResult> = Vec::with_capacity(grid.len());
    for &rho in grid {
        if rho.is_nan() || rho < 0.0 {
            return Err(Error::InvalidInput(format!(
                "rho must be nonnegative, got {rho}"
            )));
        }
        let init = out.last().map(|f| (f.coefs.as_slice(), f.intercept));
        out.push(std.fit(rho, init, options));
    }
    Ok(out)
}

/// `len` log-spaced values from `rho_max` down to `ratio * rho_max`.
pub fn default_grid(rho_max: f64, len: usize, ratio: f64) -> Vec<f64> {
    match len {
        0 => vec![],
        1 => vec![rho_max],
        _ => {
            let lo = ratio.ln();
            (0..len)
                .map(|i| rho_max * (lo * i as f64 / (len - 1) as f64).exp())
                .collect()
        }
    }
}

/// Number of grid points used when none is given.
pub const DEFAULT_GRID_LEN: usize = 50;
/// Ratio of the last to the first grid point.
pub const DEFAULT_GRID_RATIO: f64 = 0.01;
