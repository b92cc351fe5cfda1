//! Cyclic coordinate descent on internally standardized columns.
//!
//! Columns are centered (when an intercept is fitted) and scaled to unit mean
//! square. Raw-scale penalty weights are folded into the standardized
//! thresholds as `w_d / s_d`, so the optimized problem is an exact
//! reparameterization of the raw one. The logistic loss is handled by a
//! proximal-Newton outer loop: IRLS weights give a weighted quadratic model
//! that is minimized by the same coordinate-descent kernel, followed by a
//! backtracking step on the true objective.

use nalgebra::{DMatrix, DVector};

use super::{
    loss_from_predictor, sigmoid, soft_threshold, FitResult, Loss, PenalizedProblem, SolverOptions,
};

const MIN_IRLS_WEIGHT: f64 = 1e-5;
const FINEST_TOL: f64 = 1e-13;

pub(super) struct Standardized<'a> {
    problem: &'a PenalizedProblem,
    xs: DMatrix<f64>,
    center: Vec<f64>,
    /// Zero marks a constant column that is held at zero.
    scale: Vec<f64>,
}

struct State {
    beta: Vec<f64>,
    b0: f64,
    /// Linear predictor on the standardized design.
    eta: DVector<f64>,
}

impl<'a> Standardized<'a> {
    pub(super) fn new(problem: &'a PenalizedProblem) -> Self {
        let n = problem.n() as f64;
        let d = problem.d();
        let mut xs = problem.x.clone();
        let mut center = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for c in 0..d {
            let mut col = xs.column_mut(c);
            if problem.intercept {
                center[c] = col.sum() / n;
                col.add_scalar_mut(-center[c]);
            }
            let s = (col.norm_squared() / n).sqrt();
            if s > 1e-12 * (1.0 + center[c].abs()) {
                scale[c] = s;
                col /= s;
            } else {
                col.fill(0.0);
            }
        }
        Self {
            problem,
            xs,
            center,
            scale,
        }
    }

    fn thresholds(&self, rho: f64) -> Vec<f64> {
        self.problem
            .weights
            .iter()
            .zip(&self.scale)
            .map(|(&w, &s)| {
                if s == 0.0 {
                    f64::INFINITY
                } else if w == 0.0 {
                    0.0
                } else {
                    rho * w / s
                }
            })
            .collect()
    }

    fn to_standard(&self, coefs: &[f64], intercept: f64) -> State {
        let beta: Vec<f64> = coefs
            .iter()
            .zip(&self.scale)
            .map(|(&b, &s)| b * s)
            .collect();
        let b0 = intercept
            + coefs
                .iter()
                .zip(&self.center)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        let eta = self.predictor(&beta, b0);
        State { beta, b0, eta }
    }

    fn predictor(&self, beta: &[f64], b0: f64) -> DVector<f64> {
        let mut eta = DVector::from_element(self.problem.n(), b0);
        for (c, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                eta.axpy(b, &self.xs.column(c), 1.0);
            }
        }
        eta
    }

    fn to_raw(&self, state: &State) -> (Vec<f64>, f64) {
        let coefs: Vec<f64> = state
            .beta
            .iter()
            .zip(&self.scale)
            .map(|(&b, &s)| if s == 0.0 { 0.0 } else { b / s })
            .collect();
        let intercept = state.b0
            - coefs
                .iter()
                .zip(&self.center)
                .map(|(b, m)| b * m)
                .sum::<f64>();
        (coefs, intercept)
    }

    fn std_objective(&self, eta: &DVector<f64>, beta: &[f64], thresholds: &[f64]) -> f64 {
        let pen: f64 = beta
            .iter()
            .zip(thresholds)
            .filter(|(b, _)| **b != 0.0)
            .map(|(b, t)| t * b.abs())
            .sum();
        loss_from_predictor(self.problem.loss, &self.problem.y, eta) + pen
    }

    pub(super) fn fit(
        &self,
        rho: f64,
        init: Option<(&[f64], f64)>,
        options: &SolverOptions,
    ) -> FitResult {
        let problem = self.problem;
        let mut state = match init {
            Some((c, b0)) => self.to_standard(c, b0),
            None => {
                let b0 = match (problem.intercept, problem.loss) {
                    (false, _) => 0.0,
                    (true, Loss::SquaredError) => problem.y.mean(),
                    (true, Loss::LogisticNll) => {
                        let m = problem.y.mean().clamp(1e-10, 1.0 - 1e-10);
                        (m / (1.0 - m)).ln()
                    }
                };
                let beta = vec![0.0; problem.d()];
                let eta = DVector::from_element(problem.n(), b0);
                State { beta, b0, eta }
            }
        };
        for (c, &s) in self.scale.iter().enumerate() {
            if s == 0.0 {
                state.beta[c] = 0.0;
            }
        }
        let thresholds = self.thresholds(rho);
        let mut budget = Budget {
            sweeps: 0,
            newton: 0,
            max_sweeps: options.max_sweeps,
            max_newton: options.max_newton,
        };

        let mut tol = options.tol;
        let converged = loop {
            let ok = match problem.loss {
                Loss::SquaredError => self.solve_squared(&mut state, &thresholds, tol, &mut budget),
                Loss::LogisticNll => self.solve_logistic(&mut state, &thresholds, tol, &mut budget),
            };
            if !ok {
                break false;
            }
            let (coefs, intercept) = self.to_raw(&state);
            if problem.kkt_residual(&coefs, intercept, rho) <= options.kkt_tol {
                break true;
            }
            if tol <= FINEST_TOL {
                break false;
            }
            tol = (tol * 0.1).max(FINEST_TOL);
        };

        let (coefs, intercept) = self.to_raw(&state);
        FitResult {
            objective: problem.objective(&coefs, intercept, rho),
            coefs,
            intercept,
            rho,
            converged,
            iterations: budget.sweeps,
        }
    }

    fn solve_squared(
        &self,
        state: &mut State,
        thresholds: &[f64],
        tol: f64,
        budget: &mut Budget,
    ) -> bool {
        let n = self.problem.n();
        let mut resid: DVector<f64> = &self.problem.y - &state.eta;
        let v = vec![1.0; self.problem.d()];
        let ok = self.weighted_cd(
            None,
            &v,
            &mut resid,
            &mut state.beta,
            &mut state.b0,
            thresholds,
            tol,
            budget,
        );
        state.eta = &self.problem.y - &resid;
        debug_assert_eq!(state.eta.len(), n);
        ok
    }

    fn solve_logistic(
        &self,
        state: &mut State,
        thresholds: &[f64],
        tol: f64,
        budget: &mut Budget,
    ) -> bool {
        let problem = self.problem;
        let n = problem.n();
        let nf = n as f64;
        let mut current = self.std_objective(&state.eta, &state.beta, thresholds);
        loop {
            if budget.newton >= budget.max_newton || budget.sweeps >= budget.max_sweeps {
                return false;
            }
            budget.newton += 1;

            let mut w = vec![0.0; n];
            let mut resid = DVector::zeros(n);
            for i in 0..n {
                let p = sigmoid(state.eta[i]);
                w[i] = (p * (1.0 - p)).max(MIN_IRLS_WEIGHT);
                resid[i] = (problem.y[i] - p) / w[i];
            }
            let v: Vec<f64> = (0..problem.d())
                .map(|c| {
                    let col = self.xs.column(c);
                    col.iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / nf
                })
                .collect();
            let working: DVector<f64> = &state.eta + &resid;

            let mut beta = state.beta.clone();
            let mut b0 = state.b0;
            if !self.weighted_cd(
                Some(&w),
                &v,
                &mut resid,
                &mut beta,
                &mut b0,
                thresholds,
                tol,
                budget,
            ) {
                return false;
            }
            let eta_new = &working - &resid;

            // Backtrack along the Newton direction until the objective does not increase.
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let cand_beta: Vec<f64> = state
                    .beta
                    .iter()
                    .zip(&beta)
                    .map(|(o, b)| o + step * (b - o))
                    .collect();
                let cand_eta = &state.eta + (&eta_new - &state.eta) * step;
                let obj = self.std_objective(&cand_eta, &cand_beta, thresholds);
                if obj <= current + 1e-13 * current.abs().max(1.0) {
                    accepted = Some((cand_beta, state.b0 + step * (b0 - state.b0), cand_eta, obj));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand_beta, cand_b0, cand_eta, obj)) = accepted else {
                // No descent along the direction: the quadratic model is already stationary.
                return true;
            };
            let change = cand_beta
                .iter()
                .zip(&state.beta)
                .map(|(a, b)| (a - b).abs())
                .fold((cand_b0 - state.b0).abs(), f64::max);
            state.beta = cand_beta;
            state.b0 = cand_b0;
            state.eta = cand_eta;
            current = obj;
            if change < tol {
                return true;
            }
        }
    }

    /// Coordinate descent on `1/(2n) sum_i w_i (r_i)^2 + sum_d t_d |beta_d|`,
    /// where `resid` holds the unweighted working residuals and `v[d]` is the
    /// weighted mean square of column `d`.
    #[allow(clippy::too_many_arguments)]
    fn weighted_cd(
        &self,
        w: Option<&[f64]>,
        v: &[f64],
        resid: &mut DVector<f64>,
        beta: &mut [f64],
        b0: &mut f64,
        thresholds: &[f64],
        tol: f64,
        budget: &mut Budget,
    ) -> bool {
        let n = self.problem.n();
        let nf = n as f64;
        let d = self.problem.d();
        let wsum: f64 = w.map_or(nf, |w| w.iter().sum());
        let all: Vec<usize> = (0..d)
            .filter(|&c| self.scale[c] > 0.0 && thresholds[c].is_finite())
            .collect();

        let sweep =
            |set: &[usize], beta: &mut [f64], b0: &mut f64, resid: &mut DVector<f64>| -> f64 {
                let mut max_change = 0.0f64;
                for &c in set {
                    if v[c] <= 0.0 {
                        continue;
                    }
                    let col = self.xs.column(c);
                    let grad = match w {
                        None => col.dot(resid) / nf,
                        Some(w) => {
                            col.iter()
                                .zip(resid.iter())
                                .zip(w)
                                .map(|((x, r), wi)| wi * x * r)
                                .sum::<f64>()
                                / nf
                        }
                    };
                    let old = beta[c];
                    let new = soft_threshold(grad + v[c] * old, thresholds[c]) / v[c];
                    if new != old {
                        let delta = new - old;
                        match w {
                            None => resid.axpy(-delta, &col, 1.0),
                            Some(_) => {
                                for i in 0..n {
                                    resid[i] -= delta * col[i];
                                }
                            }
                        }
                        beta[c] = new;
                        max_change = max_change.max(delta.abs());
                    }
                }
                if self.problem.intercept {
                    let delta = match w {
                        None => resid.sum() / nf,
                        Some(w) => resid.iter().zip(w).map(|(r, wi)| r * wi).sum::<f64>() / wsum,
                    };
                    if delta != 0.0 {
                        resid.add_scalar_mut(-delta);
                        *b0 += delta;
                        max_change = max_change.max(delta.abs());
                    }
                }
                max_change
            };

        loop {
            if budget.sweeps >= budget.max_sweeps {
                return false;
            }
            budget.sweeps += 1;
            if sweep(&all, beta, b0, resid) < tol {
                return true;
            }
            let active: Vec<usize> = all.iter().copied().filter(|&c| beta[c] != 0.0).collect();
            loop {
                if budget.sweeps >= budget.max_sweeps {
                    return false;
                }
                budget.sweeps += 1;
                if sweep(&active, beta, b0, resid) < tol {
                    break;
                }
            }
        }
    }
}

struct Budget {
    sweeps: usize,
    newton: usize,
    max_sweeps: usize,
    max_newton: usize,
}
