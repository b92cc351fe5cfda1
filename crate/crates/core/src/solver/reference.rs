//! Accelerated proximal gradient (FISTA with adaptive restart) on the raw
//! parameterization, for small problems only.
//!
//! For the overlapping group penalty `rho * sum_G ||beta_G||_2` the proximal
//! map has no closed form. It is computed through its dual: each group keeps
//! its own copy `u_G` of the overlapping coordinates, constrained to the ball
//! `||u_G|| <= t`, and the copies are updated one group at a time by
//! projection. The primal prox is `v - sum_G E_G u_G`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{soft_threshold, FitResult, Loss, PenalizedProblem};
use crate::error::{Error, Result};

/// Largest number of columns accepted by [`reference_prox`].
pub const REFERENCE_MAX_DIM: usize = 500;

const GRADIENT_MAP_TOL: f64 = 1e-10;
const MAX_ITER: usize = 500_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferencePenalty {
    /// `rho * sum_d w_d |beta_d|`
    WeightedL1,
    /// `rho * sum_G ||beta_G||_2` over `problem.groups`
    OverlapGroupL2,
}

/// Penalty value (without `rho`).
pub fn penalty_value(problem: &PenalizedProblem, penalty: ReferencePenalty, coefs: &[f64]) -> f64 {
    match penalty {
        ReferencePenalty::WeightedL1 => super::l1_penalty(&problem.weights, coefs),
        ReferencePenalty::OverlapGroupL2 => problem
            .groups
            .iter()
            .flatten()
            .map(|g| g.iter().map(|&c| coefs[c] * coefs[c]).sum::<f64>().sqrt())
            .sum(),
    }
}

struct GroupProx {
    groups: Vec<Vec<usize>>,
    duals: Vec<Vec<f64>>,
}

impl GroupProx {
    fn new(groups: &[Vec<usize>]) -> Self {
        Self {
            groups: groups.to_vec(),
            duals: groups.iter().map(|g| vec![0.0; g.len()]).collect(),
        }
    }

    fn apply(&mut self, v: &[f64], radius: f64) -> Vec<f64> {
        let mut x = v.to_vec();
        for (g, u) in self.groups.iter().zip(&self.duals) {
            for (&c, &uc) in g.iter().zip(u) {
                x[c] -= uc;
            }
        }
        for _ in 0..10_000 {
            let mut change = 0.0f64;
            for (g, u) in self.groups.iter().zip(self.duals.iter_mut()) {
                let a: Vec<f64> = g.iter().zip(u.iter()).map(|(&c, &uc)| x[c] + uc).collect();
                let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let shrink = if norm > radius { radius / norm } else { 1.0 };
                for (k, &c) in g.iter().enumerate() {
                    let nu = a[k] * shrink;
                    change = change.max((nu - u[k]).abs());
                    u[k] = nu;
                    x[c] = a[k] - nu;
                }
            }
            if change <= 1e-15 * (1.0 + radius) {
                break;
            }
        }
        x
    }
}

/// Solve the penalized problem with FISTA. Intended as an oracle for small
/// problems (`d <= REFERENCE_MAX_DIM`).
pub fn reference_prox(
    problem: &PenalizedProblem,
    rho: f64,
    penalty: ReferencePenalty,
) -> Result<FitResult> {
    problem.validate()?;
    let d = problem.d();
    if d > REFERENCE_MAX_DIM {
        return Err(Error::SizeCap {
            size: d,
            cap: REFERENCE_MAX_DIM,
        });
    }
    if rho.is_nan() || rho < 0.0 {
        return Err(Error::InvalidInput(format!(
            "rho must be nonnegative, got {rho}"
        )));
    }
    let mut group_prox = match penalty {
        ReferencePenalty::WeightedL1 => None,
        ReferencePenalty::OverlapGroupL2 => {
            let groups = problem.groups.as_ref().ok_or_else(|| {
                Error::InvalidInput("group penalty needs coordinate groups".into())
            })?;
            Some(GroupProx::new(groups))
        }
    };

    let lipschitz = lipschitz(problem);
    let step = 1.0 / lipschitz;
    let mut prox = |v: &[f64]| -> Vec<f64> {
        match group_prox.as_mut() {
            None => v
                .iter()
                .zip(&problem.weights)
                .map(|(&vi, &w)| soft_threshold(vi, step * rho * w))
                .collect(),
            Some(gp) => {
                if rho.is_infinite() {
                    let mut out = v.to_vec();
                    for &c in gp.groups.iter().flatten() {
                        out[c] = 0.0;
                    }
                    out
                } else {
                    gp.apply(v, step * rho)
                }
            }
        }
    };

    let mut x = vec![0.0; d];
    let mut x0 = 0.0;
    if problem.intercept {
        let m = problem.y.mean();
        x0 = match problem.loss {
            Loss::SquaredError => m,
            Loss::LogisticNll => {
                let m = m.clamp(1e-10, 1.0 - 1e-10);
                (m / (1.0 - m)).ln()
            }
        };
    }
    let mut y = x.clone();
    let mut y0 = x0;
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let (grad, g0) = problem.gradient(&y, y0);
        let v: Vec<f64> = y
            .iter()
            .zip(grad.iter())
            .map(|(yi, gi)| yi - step * gi)
            .collect();
        let xn = prox(&v);
        let xn0 = if problem.intercept {
            y0 - step * g0
        } else {
            0.0
        };

        let gmap = xn
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold((xn0 - y0).abs(), f64::max)
            * lipschitz;

        // Restart momentum when it points against the last step.
        let dot: f64 = y
            .iter()
            .zip(&xn)
            .zip(&x)
            .map(|((yi, a), b)| (yi - a) * (a - b))
            .sum::<f64>()
            + (y0 - xn0) * (xn0 - x0);
        let tn = if dot > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let mom = if dot > 0.0 { 0.0 } else { (t - 1.0) / tn };
        y = xn.iter().zip(&x).map(|(a, b)| a + mom * (a - b)).collect();
        y0 = xn0 + mom * (xn0 - x0);
        x = xn;
        x0 = xn0;
        t = tn;
        if gmap <= GRADIENT_MAP_TOL {
            converged = true;
            break;
        }
    }
    let pen = penalty_value(problem, penalty, &x);
    let loss = problem.loss_value(&x, x0);
    Ok(FitResult {
        objective: if pen == 0.0 { loss } else { loss + rho * pen },
        coefs: x,
        intercept: x0,
        rho,
        converged,
        iterations,
    })
}

fn lipschitz(problem: &PenalizedProblem) -> f64 {
    let n = problem.n();
    let d = problem.d();
    let cols = if problem.intercept { d + 1 } else { d };
    let mut a = DMatrix::from_element(n, cols, 1.0);
    a.view_mut((0, 0), (n, d)).copy_from(&problem.x);
    let gram = a.tr_mul(&a) / n as f64;
    let top = top_eigenvalue(&gram);
    let scale = match problem.loss {
        Loss::SquaredError => 1.0,
        Loss::LogisticNll => 0.25,
    };
    (top * scale).max(1e-12)
}

fn top_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let e = m.clone().symmetric_eigen();
    let top = e.eigenvalues.iter().copied().fold(0.0, f64::max);
    // Slack for rounding in the eigensolver.
    top * (1.0 + 1e-10) + f64::EPSILON
}
