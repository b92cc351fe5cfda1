//! The simplified conditional Gaussian model for binary `Z` and continuous `Y`:
//!
//! ```text
//! log f(z, y) = lambda0 + sum_j lambda_j z_j + sum_{j<k} lambda_jk z_j z_k
//!             + y' (eta0 + sum_j eta_j z_j)
//!             - 1/2 y' (Phi0 + sum_j Phi_j z_j) y
//! ```
//!
//! with `diag(Phi_j) = 0`. `lambda0` is kept on the log scale.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Coord, Edge, MarkovGraph, MixedDims};

/// Default cap on `q` for exact enumeration of the `2^q` cells.
pub const DEFAULT_MAX_Q: usize = 20;

/// Largest `q` for which positive definiteness is certified by enumeration.
pub const PD_ENUMERATION_MAX_Q: usize = 12;

/// Margin of the diagonal-dominance certificate.
pub const PD_MARGIN: f64 = 0.1;

/// Full parameter set of the simplified binary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsJson", into = "ParamsJson")]
pub struct CgParams {
    pub lambda0: f64,
    /// `lambda_j`, length q.
    pub lambda: DVector<f64>,
    /// `lambda_jk`, symmetric q x q with zero diagonal.
    pub lambda_pair: DMatrix<f64>,
    /// `eta_0`, length p.
    pub eta0: DVector<f64>,
    /// `eta_j^gamma`, q x p.
    pub eta: DMatrix<f64>,
    /// `Phi_0`, symmetric p x p.
    pub phi0: DMatrix<f64>,
    /// `Phi_j`, q symmetric p x p matrices with zero diagonal.
    pub phi: Vec<DMatrix<f64>>,
}

/// `(g_z, h_z, K_z)` of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTriple {
    pub g: f64,
    pub h: DVector<f64>,
    pub k: DMatrix<f64>,
}

/// `(P_z, xi_z, Sigma_z)` of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMoments {
    pub prob: f64,
    pub log_prob: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// How positive definiteness of every cell precision was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdCertificate {
    Enumerated,
    DiagonalDominance,
}

impl CgParams {
    /// All-zero parameters except `Phi0 = I`.
    pub fn zeros(q: usize, p: usize) -> Self {
        Self {
            lambda0: 0.0,
            lambda: DVector::zeros(q),
            lambda_pair: DMatrix::zeros(q, q),
            eta0: DVector::zeros(p),
            eta: DMatrix::zeros(q, p),
            phi0: DMatrix::identity(p, p),
            phi: vec![DMatrix::zeros(p, p); q],
        }
    }

    pub fn q(&self) -> usize {
        self.lambda.len()
    }

    pub fn p(&self) -> usize {
        self.eta0.len()
    }

    pub fn dims(&self) -> MixedDims {
        MixedDims::binary(self.q(), self.p())
    }

    /// Shape, symmetry and zero-diagonal checks.
    pub fn validate(&self) -> Result<()> {
        let (q, p) = (self.q(), self.p());
        let shape = |name: &str, m: &DMatrix<f64>, r: usize, c: usize| {
            if m.shape() != (r, c) {
                Err(Error::Dimension(format!(
                    "{name} is {:?}, expected {:?}",
                    m.shape(),
                    (r, c)
                )))
            } else {
                Ok(())
            }
        };
        if q + p == 0 {
            return Err(Error::InvalidParams("empty model".into()));
        }
        shape("lambdaPair", &self.lambda_pair, q, q)?;
        shape("eta", &self.eta, q, p)?;
        shape("phi0", &self.phi0, p, p)?;
        if self.phi.len() != q {
            return Err(Error::Dimension(format!(
                "{} phi matrices for q = {q}",
                self.phi.len()
            )));
        }
        for (j, m) in self.phi.iter().enumerate() {
            shape(&format!("phi[{j}]"), m, p, p)?;
        }
        if self.lambda_pair != self.lambda_pair.transpose() {
            return Err(Error::InvalidParams("lambdaPair is not symmetric".into()));
        }
        if self.lambda_pair.diagonal().iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidParams(
                "lambdaPair has a nonzero diagonal".into(),
            ));
        }
        if self.phi0 != self.phi0.transpose() {
            return Err(Error::InvalidParams("phi0 is not symmetric".into()));
        }
        for (j, m) in self.phi.iter().enumerate() {
            if *m != m.transpose() {
                return Err(Error::InvalidParams(format!("phi[{j}] is not symmetric")));
            }
            if m.diagonal().iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidParams(format!(
                    "phi[{j}] has a nonzero diagonal"
                )));
            }
        }
        let all = std::iter::once(self.lambda0)
            .chain(self.lambda.iter().copied())
            .chain(self.lambda_pair.iter().copied())
            .chain(self.eta0.iter().copied())
            .chain(self.eta.iter().copied())
            .chain(self.phi0.iter().copied())
            .chain(self.phi.iter().flat_map(|m| m.iter().copied()));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Value at a coordinate of the binary parameterization.
    pub fn get(&self, coord: Coord) -> f64 {
        match coord {
            Coord::Lambda { j, .. } => self.lambda[j],
            Coord::LambdaPair { j, k, .. } => self.lambda_pair[(j, k)],
            Coord::Eta0 { gamma } => self.eta0[gamma],
            Coord::Eta { j, gamma, .. } => self.eta[(j, gamma)],
            Coord::Phi0 { gamma, mu } => self.phi0[(gamma, mu)],
            Coord::Phi { j, gamma, mu, .. } => self.phi[j][(gamma, mu)],
        }
    }

    /// Write a coordinate, keeping symmetric storage symmetric.
    pub fn set(&mut self, coord: Coord, value: f64) {
        match coord {
            Coord::Lambda { j, .. } => self.lambda[j] = value,
            Coord::LambdaPair { j, k, .. } => {
                self.lambda_pair[(j, k)] = value;
                self.lambda_pair[(k, j)] = value;
            }
            Coord::Eta0 { gamma } => self.eta0[gamma] = value,
            Coord::Eta { j, gamma, .. } => self.eta[(j, gamma)] = value,
            Coord::Phi0 { gamma, mu } => {
                self.phi0[(gamma, mu)] = value;
                self.phi0[(mu, gamma)] = value;
            }
            Coord::Phi { j, gamma, mu, .. } => {
                self.phi[j][(gamma, mu)] = value;
                self.phi[j][(mu, gamma)] = value;
            }
        }
    }

    fn check_z(&self, z: &[u8]) -> Result<()> {
        if z.len() != self.q() {
            return Err(Error::Dimension(format!(
                "z has length {}, q = {}",
                z.len(),
                self.q()
            )));
        }
        if z.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput("z must be binary".into()));
        }
        Ok(())
    }

    fn check_y(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.p() {
            return Err(Error::Dimension(format!(
                "y has length {}, p = {}",
                y.len(),
                self.p()
            )));
        }
        Ok(())
    }

    /// `g_z` without the `lambda0` term.
    fn discrete_part(&self, z: &[u8]) -> f64 {
        let q = self.q();
        let mut g = 0.0;
        for j in 0..q {
            if z[j] == 1 {
                g += self.lambda[j];
                for k in 0..j {
                    if z[k] == 1 {
                        g += self.lambda_pair[(j, k)];
                    }
                }
            }
        }
        g
    }

    fn h_and_k(&self, z: &[u8]) -> (DVector<f64>, DMatrix<f64>) {
        let mut h = self.eta0.clone();
        let mut k = self.phi0.clone();
        for (j, &zj) in z.iter().enumerate() {
            if zj == 1 {
                h += self.eta.row(j).transpose();
                k += &self.phi[j];
            }
        }
        (h, k)
    }

    /// Canonical parameters of cell `z`; fails if `K_z` is not positive definite.
    pub fn canonical_at(&self, z: &[u8]) -> Result<CanonicalTriple> {
        self.check_z(z)?;
        let (h, k) = self.h_and_k(z);
        if self.p() > 0 && Cholesky::new(k.clone()).is_none() {
            return Err(Error::NotPositiveDefinite {
                cell: z.iter().map(|&v| v as u32).collect(),
            });
        }
        Ok(CanonicalTriple {
            g: self.lambda0 + self.discrete_part(z),
            h,
            k,
        })
    }

    /// Cell probability, conditional mean and covariance of cell `z`.
    pub fn moments_at(&self, z: &[u8]) -> Result<CellMoments> {
        let t = self.canonical_at(z)?;
        let p = self.p();
        let chol = cholesky(&t.k, z)?;
        let mean = chol.solve(&t.h);
        let cov = chol.inverse();
        let log_prob = t.g + gaussian_log_mass(&chol, &t.h, &mean, p);
        Ok(CellMoments {
            prob: log_prob.exp(),
            log_prob,
            mean,
            cov,
        })
    }

    /// Log cell masses with `lambda0` excluded, in cell order (bit `j` of the
    /// cell index is `z_j`).
    fn unnormalized_log_masses(&self, max_q: usize) -> Result<Vec<f64>> {
        let q = self.q();
        check_cap(q, max_q)?;
        let p = self.p();
        cells(q)
            .map(|z| {
                let (h, k) = self.h_and_k(&z);
                let chol = cholesky(&k, &z)?;
                let mean = chol.solve(&h);
                Ok(self.discrete_part(&z) + gaussian_log_mass(&chol, &h, &mean, p))
            })
            .collect()
    }

    /// Cell probabilities `P_z` in cell order under the stored `lambda0`.
    pub fn cell_probabilities(&self, max_q: usize) -> Result<Vec<f64>> {
        let lm = self.unnormalized_log_masses(max_q)?;
        Ok(lm.iter().map(|l| (l + self.lambda0).exp()).collect())
    }

    /// Replace `lambda0` so the cell probabilities sum to one.
    pub fn normalize(&self, max_q: usize) -> Result<CgParams> {
        self.validate()?;
        let lm = self.unnormalized_log_masses(max_q)?;
        let mut out = self.clone();
        out.lambda0 = -log_sum_exp(&lm);
        Ok(out)
    }

    /// `log f(z, y)` under the stored `lambda0`.
    pub fn log_density(&self, z: &[u8], y: &[f64]) -> Result<f64> {
        self.check_z(z)?;
        self.check_y(y)?;
        let (h, k) = self.h_and_k(z);
        let y = DVector::from_column_slice(y);
        Ok(self.lambda0 + self.discrete_part(z) + h.dot(&y) - 0.5 * (&k * &y).dot(&y))
    }

    /// Log-odds of `Z_j = 1` against `Z_j = 0` given the other variables.
    pub fn log_odds(&self, z: &[u8], y: &[f64], j: usize) -> Result<f64> {
        self.check_z(z)?;
        self.check_y(y)?;
        if j >= self.q() {
            return Err(Error::Dimension(format!(
                "discrete index {j} >= q = {}",
                self.q()
            )));
        }
        let y = DVector::from_column_slice(y);
        let mut v = self.lambda[j];
        for k in (0..self.q()).filter(|&k| k != j) {
            v += self.lambda_pair[(j, k)] * z[k] as f64;
        }
        v += self.eta.row(j).transpose().dot(&y);
        v -= 0.5 * (&self.phi[j] * &y).dot(&y);
        Ok(v)
    }

    /// Conditional mean and variance of `Y_gamma` given `Z = z` and the other
    /// continuous coordinates of `y` (`y[gamma]` is ignored).
    pub fn conditional_continuous(&self, z: &[u8], y: &[f64], gamma: usize) -> Result<(f64, f64)> {
        self.check_z(z)?;
        self.check_y(y)?;
        if gamma >= self.p() {
            return Err(Error::Dimension(format!(
                "continuous index {gamma} >= p = {}",
                self.p()
            )));
        }
        let kgg = self.phi0[(gamma, gamma)];
        if kgg <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                cell: z.iter().map(|&v| v as u32).collect(),
            });
        }
        let mut num = self.eta0[gamma];
        for (j, &zj) in z.iter().enumerate() {
            num += self.eta[(j, gamma)] * zj as f64;
        }
        for mu in (0..self.p()).filter(|&mu| mu != gamma) {
            let mut coef = self.phi0[(gamma, mu)];
            for (j, &zj) in z.iter().enumerate() {
                coef += self.phi[j][(gamma, mu)] * zj as f64;
            }
            num -= coef * y[mu];
        }
        Ok((num / kgg, 1.0 / kgg))
    }

    /// Certify that `K_z` is positive definite for every cell.
    pub fn certify_pd(&self) -> Result<PdCertificate> {
        if self.q() <= PD_ENUMERATION_MAX_Q {
            if self.p() == 0 {
                return Ok(PdCertificate::Enumerated);
            }
            for z in cells(self.q()) {
                let (_, k) = self.h_and_k(&z);
                cholesky(&k, &z)?;
            }
            Ok(PdCertificate::Enumerated)
        } else if self.diagonally_dominant(PD_MARGIN) {
            Ok(PdCertificate::DiagonalDominance)
        } else {
            Err(Error::InvalidParams(format!(
                "q = {} is too large to enumerate and Phi0 is not diagonally dominant with margin {PD_MARGIN}",
                self.q()
            )))
        }
    }

    /// `Phi0[g][g] >= sum_{m != g} (|Phi0[g][m]| + sum_j |Phi_j[g][m]|) + margin` on every row.
    pub fn diagonally_dominant(&self, margin: f64) -> bool {
        (0..self.p()).all(|g| self.phi0[(g, g)] >= dominance_row_sum(self, g) + margin)
    }

    /// Set the diagonal of `Phi0` to the off-diagonal row mass plus `margin`.
    pub fn set_dominant_diagonal(&mut self, margin: f64) {
        for g in 0..self.p() {
            self.phi0[(g, g)] = dominance_row_sum(self, g) + margin;
        }
    }

    /// Implied Markov graph: an edge is present iff some coordinate of its group
    /// exceeds `tol` in absolute value.
    pub fn graph(&self, tol: f64) -> MarkovGraph {
        graph_of(self, tol)
    }
}

fn dominance_row_sum(params: &CgParams, g: usize) -> f64 {
    (0..params.p())
        .filter(|&m| m != g)
        .map(|m| {
            params.phi0[(g, m)].abs() + params.phi.iter().map(|pj| pj[(g, m)].abs()).sum::<f64>()
        })
        .sum()
}

/// Markov graph implied by the parameter zero pattern.
pub fn graph_of(params: &CgParams, tol: f64) -> MarkovGraph {
    let dims = params.dims();
    let mut edges: Vec<Edge> = Vec::new();
    for coord in dims.interaction_coords() {
        if params.get(coord).abs() > tol {
            edges.extend(coord.edges());
        }
    }
    MarkovGraph::from_edges(dims, edges).expect("coordinates are in range")
}

/// Log of `(2 pi)^{p/2} det(K)^{-1/2} exp(h' K^{-1} h / 2)`.
fn gaussian_log_mass(
    chol: &Cholesky<f64, Dyn>,
    h: &DVector<f64>,
    mean: &DVector<f64>,
    p: usize,
) -> f64 {
    let log_det: f64 = chol
        .l_dirty()
        .diagonal()
        .iter()
        .take(p)
        .map(|d| d.ln())
        .sum::<f64>()
        * 2.0;
    0.5 * p as f64 * (2.0 * PI).ln() - 0.5 * log_det + 0.5 * h.dot(mean)
}

pub(crate) fn cholesky(k: &DMatrix<f64>, z: &[u8]) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(k.clone()).ok_or_else(|| Error::NotPositiveDefinite {
        cell: z.iter().map(|&v| v as u32).collect(),
    })
}

pub(crate) fn check_cap(q: usize, max_q: usize) -> Result<()> {
    if q > max_q {
        return Err(Error::EnumerationCap {
            cells: 1u128 << q.min(127),
            cap: 1u128 << max_q.min(127),
        });
    }
    Ok(())
}

/// All binary cells of length `q`; bit `j` of the running index is `z_j`.
pub fn cells(q: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..1usize << q).map(move |idx| cell_from_index(idx, q))
}

pub fn cell_from_index(idx: usize, q: usize) -> Vec<u8> {
    (0..q).map(|j| ((idx >> j) & 1) as u8).collect()
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ParamsJson {
    q: usize,
    p: usize,
    lambda0: f64,
    lambda: Vec<f64>,
    lambda_pair: Vec<Vec<f64>>,
    eta0: Vec<f64>,
    eta: Vec<Vec<f64>>,
    phi0: Vec<Vec<f64>>,
    phi: Vec<Vec<Vec<f64>>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from(rows: &[Vec<f64>], r: usize, c: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension(format!("{name} must be {r} x {c}")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl From<CgParams> for ParamsJson {
    fn from(p: CgParams) -> Self {
        ParamsJson {
            q: p.q(),
            p: p.p(),
            lambda0: p.lambda0,
            lambda: p.lambda.iter().copied().collect(),
            lambda_pair: rows_of(&p.lambda_pair),
            eta0: p.eta0.iter().copied().collect(),
            eta: rows_of(&p.eta),
            phi0: rows_of(&p.phi0),
            phi: p.phi.iter().map(rows_of).collect(),
        }
    }
}

impl TryFrom<ParamsJson> for CgParams {
    type Error = Error;

    fn try_from(j: ParamsJson) -> Result<Self> {
        let (q, p) = (j.q, j.p);
        if j.lambda.len() != q || j.eta0.len() != p || j.phi.len() != q {
            return Err(Error::Dimension(
                "parameter vector lengths disagree with q, p".into(),
            ));
        }
        let params = CgParams {
            lambda0: j.lambda0,
            lambda: DVector::from_vec(j.lambda),
            lambda_pair: matrix_from(&j.lambda_pair, q, q, "lambdaPair")?,
            eta0: DVector::from_vec(j.eta0),
            eta: matrix_from(&j.eta, q, p, "eta")?,
            phi0: matrix_from(&j.phi0, p, p, "phi0")?,
            phi: j
                .phi
                .iter()
                .enumerate()
                .map(|(i, m)| matrix_from(m, p, p, &format!("phi[{i}]")))
                .collect::<Result<_>>()?,
        };
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_params(q: usize, p: usize, rng: &mut impl Rng) -> CgParams {
        let mut params = CgParams::zeros(q, p);
        let dims = params.dims();
        for j in 0..q {
            params.lambda[j] = rng.random_range(-1.0..1.0);
        }
        for g in 0..p {
            params.eta0[g] = rng.random_range(-1.0..1.0);
        }
        for c in dims.interaction_coords() {
            params.set(c, rng.random_range(-1.0..1.0));
        }
        params.set_dominant_diagonal(0.5);
        params
    }

    #[test]
    fn canonical_at_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = random_params(2, 2, &mut rng);
        for z in cells(2) {
            let t = params.canonical_at(&z).unwrap();
            let mut g = params.lambda0;
            let mut h = [params.eta0[0], params.eta0[1]];
            let mut k = [
                [params.phi0[(0, 0)], params.phi0[(0, 1)]],
                [params.phi0[(1, 0)], params.phi0[(1, 1)]],
            ];
            for j in 0..2 {
                let zj = z[j] as f64;
                g += params.lambda[j] * zj;
                for kk in 0..j {
                    g += params.lambda_pair[(j, kk)] * zj * z[kk] as f64;
                }
                for a in 0..2 {
                    h[a] += params.eta[(j, a)] * zj;
                    for b in 0..2 {
                        k[a][b] += params.phi[j][(a, b)] * zj;
                    }
                }
            }
            assert_abs_diff_eq!(t.g, g, epsilon = 1e-14);
            for a in 0..2 {
                assert_abs_diff_eq!(t.h[a], h[a], epsilon = 1e-14);
                for b in 0..2 {
                    assert_abs_diff_eq!(t.k[(a, b)], k[a][b], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn zero_cell_ignores_discrete_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = random_params(3, 2, &mut rng);
        let t = params.canonical_at(&[0, 0, 0]).unwrap();
        assert_eq!(t.g, params.lambda0);
        assert_eq!(t.h, params.eta0);
        assert_eq!(t.k, params.phi0);

        let gauss = random_params(0, 2, &mut rng);
        let t = gauss.canonical_at(&[]).unwrap();
        assert_eq!((t.g, &t.h, &t.k), (gauss.lambda0, &gauss.eta0, &gauss.phi0));
    }

    #[test]
    fn identity_precision_moments() {
        let mut params = CgParams::zeros(0, 2);
        params.eta0 = DVector::from_vec(vec![1.0, 2.0]);
        let m = params.moments_at(&[]).unwrap();
        assert_abs_diff_eq!(m.mean[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.mean[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            (m.cov - DMatrix::<f64>::identity(2, 2)).norm(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn canonical_at_rejects_bad_input() {
        let mut params = CgParams::zeros(1, 2);
        assert!(matches!(
            params.canonical_at(&[0, 1]),
            Err(Error::Dimension(_))
        ));
        params.phi[0][(0, 1)] = 5.0;
        params.phi[0][(1, 0)] = 5.0;
        assert!(params.canonical_at(&[0]).is_ok());
        assert!(matches!(
            params.canonical_at(&[1]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn normalize_closed_form_single_pair() {
        // q = 1, p = 1, lambda_1 = 1, eta = 0: P_z = sqrt(2 pi / K_z) exp(lambda_1 z + h_z^2 / (2 K_z)).
        let mut params = CgParams::zeros(1, 1);
        params.lambda[0] = 1.0;
        params.phi0[(0, 0)] = 2.0;
        let norm = params.normalize(DEFAULT_MAX_Q).unwrap();
        let by_hand = (2.0 * PI / 2.0).sqrt() * (1.0 + 1f64.exp());
        assert_abs_diff_eq!(norm.lambda0, -by_hand.ln(), epsilon = 1e-13);

        let again = norm.normalize(DEFAULT_MAX_Q).unwrap();
        assert_abs_diff_eq!(again.lambda0, norm.lambda0, epsilon = 1e-12);
        let total: f64 = norm.cell_probabilities(DEFAULT_MAX_Q).unwrap().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normalize_respects_cap() {
        let params = CgParams::zeros(5, 1);
        assert!(matches!(
            params.normalize(4),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn pure_gaussian_log_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = random_params(0, 3, &mut rng)
            .normalize(DEFAULT_MAX_Q)
            .unwrap();
        let m = params.moments_at(&[]).unwrap();
        let y = [0.3, -0.2, 1.1];
        let d = DVector::from_column_slice(&y) - &m.mean;
        let chol = Cholesky::new(m.cov.clone()).unwrap();
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let expected = -0.5 * (3.0 * (2.0 * PI).ln() + log_det + d.dot(&chol.solve(&d)));
        assert_abs_diff_eq!(
            params.log_density(&[], &y).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pure_ising_normalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = random_params(4, 0, &mut rng)
            .normalize(DEFAULT_MAX_Q)
            .unwrap();
        let total: f64 = params
            .cell_probabilities(DEFAULT_MAX_Q)
            .unwrap()
            .iter()
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert_eq!(params.certify_pd().unwrap(), PdCertificate::Enumerated);
    }

    #[test]
    fn graph_of_cases() {
        let params = CgParams::zeros(2, 3);
        assert_eq!(params.graph(0.0).num_edges(), 0);

        let mut one = params.clone();
        one.set(Coord::phi0(0, 1), 0.5);
        let g = one.graph(0.0);
        assert_eq!(g.num_edges(), 1);
        assert!(g.has_edge(crate::Node::Continuous(0), crate::Node::Continuous(1)));

        let mut tri = params.clone();
        tri.set(Coord::phi(1, 0, 2), -0.3);
        let g = tri.graph(0.0);
        use crate::Node::{Continuous as Y, Discrete as Z};
        assert_eq!(g.num_edges(), 3);
        assert!(g.has_edge(Z(1), Y(0)) && g.has_edge(Z(1), Y(2)) && g.has_edge(Y(0), Y(2)));
        assert_eq!(tri.graph(0.5).num_edges(), 0);
    }

    #[test]
    fn validate_catches_asymmetry_and_diagonals() {
        let mut params = CgParams::zeros(2, 2);
        params.phi[0][(0, 0)] = 1.0;
        assert!(params.validate().is_err());
        let mut params = CgParams::zeros(2, 2);
        params.lambda_pair[(0, 1)] = 1.0;
        assert!(params.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let params = random_params(2, 3, &mut rng);
        let s = serde_json::to_string(&params).unwrap();
        assert!(s.contains("\"lambdaPair\""));
        let back: CgParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn diagonal_dominance_certificate_for_large_q() {
        let mut params = CgParams::zeros(13, 2);
        for j in 0..13 {
            params.set(Coord::phi(j, 0, 1), 0.5);
        }
        params.phi0 = DMatrix::identity(2, 2);
        assert!(params.certify_pd().is_err());
        params.set_dominant_diagonal(PD_MARGIN);
        assert_eq!(
            params.certify_pd().unwrap(),
            PdCertificate::DiagonalDominance
        );
    }
}
