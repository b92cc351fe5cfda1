//! Node-wise conditional regressions and their aggregation into a graph
//! estimate.
//!
//! * A discrete node `Z_j` is regressed (logistic) on the other discrete
//!   indicators, every `Y_gamma` and every product `Y_gamma Y_mu`
//!   (`gamma < mu`). The product coefficient estimates `-Phi_j^{gamma mu}`.
//! * A continuous node `Y_gamma` is regressed (least squares) on the
//!   discrete indicators, the other `Y_mu` and the products `Y_mu Z_j`. The
//!   coefficients are proportional to the model parameters; multiplying by
//!   `1 / MSE` recovers the original scale.
//!
//! Penalty weights are 1 on main effects and 2 on the products, which belong to
//! two edge groups each. Parameters estimated by several regressions are
//! combined by keeping the estimate with the largest magnitude.
//!
//! Discrete variables with `K > 2` levels use `K - 1` indicator columns
//! (code 0 is the baseline) and one logistic regression per non-baseline
//! level against the baseline, fitted on the rows at those two levels.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::MixedDataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{render_dot, Coord, DotStyle, Edge, MarkovGraph, MixedDims, Node};
use crate::model::CgParams;
use crate::solver::{self, FitResult, Loss, PenalizedProblem, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyVariant {
    /// Weights 1 on main effects, 2 on interaction products.
    #[default]
    Weighted,
    /// Weight 1 everywhere.
    Regular,
    /// Main effects only; interaction columns are left out.
    Simple,
}

impl std::str::FromStr for PenaltyVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted" => Ok(Self::Weighted),
            "regular" => Ok(Self::Regular),
            "simple" => Ok(Self::Simple),
            _ => Err(Error::InvalidInput(format!(
                "unknown penalty variant {s:?}"
            ))),
        }
    }
}

impl PenaltyVariant {
    fn interaction_weight(self) -> Option<f64> {
        match self {
            Self::Weighted => Some(2.0),
            Self::Regular => Some(1.0),
            Self::Simple => None,
        }
    }
}

/// Scale on which the penalty weights act.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyScale {
    /// Weights multiply the coefficients of unit-variance columns, i.e. raw
    /// weights are scaled by each column's standard deviation.
    #[default]
    Standardized,
    /// Weights multiply the coefficients of the columns as given.
    Raw,
}

impl std::str::FromStr for PenaltyScale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standardized" => Ok(Self::Standardized),
            "raw" => Ok(Self::Raw),
            _ => Err(Error::InvalidInput(format!("unknown penalty scale {s:?}"))),
        }
    }
}

impl NodeProblem {
    /// Multiply each penalty weight by the standard deviation of its column.
    pub fn standardize_weights(&mut self) {
        let x = &self.problem.x;
        let n = x.nrows() as f64;
        for (c, w) in self.problem.weights.iter_mut().enumerate() {
            let col = x.column(c);
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            *w *= sd;
        }
    }
}

/// Response of a node regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// `Z_j` at `level` against the baseline.
    Discrete {
        j: usize,
        level: u32,
    },
    Continuous {
        gamma: usize,
    },
}

impl Target {
    pub fn node(&self) -> Node {
        match *self {
            Target::Discrete { j, .. } => Node::Discrete(j),
            Target::Continuous { gamma } => Node::Continuous(gamma),
        }
    }
}

/// One design column: `coefficient = sign * value(coord)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub coord: Coord,
    pub sign: f64,
    pub weight: f64,
    pub interaction: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRegressionSpec {
    pub target: Target,
    pub predictors: Vec<Predictor>,
    /// Rows of the dataset used by this regression.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct NodeProblem {
    pub problem: PenalizedProblem,
    pub spec: NodeRegressionSpec,
}

fn indicator(code: u32, level: u32) -> f64 {
    (code == level) as u8 as f64
}

fn discrete_target_name(data: &MixedDataset, j: usize, level: u32) -> String {
    if data.levels()[j] == 2 {
        data.discrete_name(j).to_string()
    } else {
        format!("{}[level {}]", data.discrete_name(j), level + 1)
    }
}

fn build_discrete(
    data: &MixedDataset,
    j: usize,
    level: u32,
    variant: PenaltyVariant,
) -> Result<NodeProblem> {
    let (q, p) = (data.q(), data.p());
    let levels = data.levels();
    if j >= q {
        return Err(Error::Dimension(format!("discrete index {j} >= q = {q}")));
    }
    if level == 0 || level >= levels[j] {
        return Err(Error::InvalidInput(format!(
            "level {level} is not a non-baseline level of {}",
            data.discrete_name(j)
        )));
    }
    let rows: Vec<usize> = (0..data.n())
        .filter(|&i| data.z[(i, j)] == 0 || data.z[(i, j)] == level)
        .collect();
    let y = DVector::from_iterator(
        rows.len(),
        rows.iter().map(|&i| indicator(data.z[(i, j)], level)),
    );
    let ones = y.sum();
    if ones == 0.0 || ones == y.len() as f64 {
        return Err(Error::SingleClass(discrete_target_name(data, j, level)));
    }

    let mut predictors = Vec::new();
    let mut columns: Vec<Box<dyn Fn(usize) -> f64 + '_>> = Vec::new();
    for k in (0..q).filter(|&k| k != j) {
        for lk in 1..levels[k] {
            predictors.push(Predictor {
                coord: Coord::lambda_pair_levels(j, k, level, lk),
                sign: 1.0,
                weight: 1.0,
                interaction: false,
            });
            columns.push(Box::new(move |i| indicator(data.z[(i, k)], lk)));
        }
    }
    for gamma in 0..p {
        predictors.push(Predictor {
            coord: Coord::Eta { j, level, gamma },
            sign: 1.0,
            weight: 1.0,
            interaction: false,
        });
        columns.push(Box::new(move |i| data.y[(i, gamma)]));
    }
    if let Some(w2) = variant.interaction_weight() {
        for gamma in 0..p {
            for mu in (gamma + 1)..p {
                predictors.push(Predictor {
                    coord: Coord::phi_level(j, level, gamma, mu),
                    sign: -1.0,
                    weight: w2,
                    interaction: true,
                });
                columns.push(Box::new(move |i| data.y[(i, gamma)] * data.y[(i, mu)]));
            }
        }
    }
    finish(
        rows,
        y,
        Loss::LogisticNll,
        Target::Discrete { j, level },
        predictors,
        columns,
    )
}

fn build_continuous(
    data: &MixedDataset,
    gamma: usize,
    variant: PenaltyVariant,
) -> Result<NodeProblem> {
    let (q, p) = (data.q(), data.p());
    let levels = data.levels();
    if gamma >= p {
        return Err(Error::Dimension(format!(
            "continuous index {gamma} >= p = {p}"
        )));
    }
    let rows: Vec<usize> = (0..data.n()).collect();
    let y = data.y.column(gamma).into_owned();

    let mut predictors = Vec::new();
    let mut columns: Vec<Box<dyn Fn(usize) -> f64 + '_>> = Vec::new();
    for j in 0..q {
        for level in 1..levels[j] {
            predictors.push(Predictor {
                coord: Coord::Eta { j, level, gamma },
                sign: 1.0,
                weight: 1.0,
                interaction: false,
            });
            columns.push(Box::new(move |i| indicator(data.z[(i, j)], level)));
        }
    }
    for mu in (0..p).filter(|&mu| mu != gamma) {
        predictors.push(Predictor {
            coord: Coord::phi0(gamma, mu),
            sign: -1.0,
            weight: 1.0,
            interaction: false,
        });
        columns.push(Box::new(move |i| data.y[(i, mu)]));
    }
    if let Some(w2) = variant.interaction_weight() {
        for j in 0..q {
            for level in 1..levels[j] {
                for mu in (0..p).filter(|&mu| mu != gamma) {
                    predictors.push(Predictor {
                        coord: Coord::phi_level(j, level, gamma, mu),
                        sign: -1.0,
                        weight: w2,
                        interaction: true,
                    });
                    columns.push(Box::new(move |i| {
                        data.y[(i, mu)] * indicator(data.z[(i, j)], level)
                    }));
                }
            }
        }
    }
    finish(
        rows,
        y,
        Loss::SquaredError,
        Target::Continuous { gamma },
        predictors,
        columns,
    )
}

fn finish(
    rows: Vec<usize>,
    y: DVector<f64>,
    loss: Loss,
    target: Target,
    predictors: Vec<Predictor>,
    columns: Vec<Box<dyn Fn(usize) -> f64 + '_>>,
) -> Result<NodeProblem> {
    let x = DMatrix::from_fn(rows.len(), columns.len(), |r, c| columns[c](rows[r]));
    let weights = predictors.iter().map(|p| p.weight).collect();
    Ok(NodeProblem {
        problem: PenalizedProblem::new(x, y, loss, weights)?,
        spec: NodeRegressionSpec {
            target,
            predictors,
            rows,
        },
    })
}

/// Logistic regression of binary `Z_j` on `[Z_{-j} | Y | Y_gamma Y_mu (gamma < mu)]`.
pub fn build_logistic(
    data: &MixedDataset,
    j: usize,
    variant: PenaltyVariant,
) -> Result<NodeProblem> {
    if data.levels().get(j).is_some_and(|&k| k != 2) {
        return Err(Error::InvalidInput(format!(
            "{} is not binary",
            data.discrete_name(j)
        )));
    }
    build_discrete(data, j, 1, variant)
}

/// Linear regression of `Y_gamma` on `[Z | Y_{-gamma} | Y_mu Z_j]`.
pub fn build_linear(
    data: &MixedDataset,
    gamma: usize,
    variant: PenaltyVariant,
) -> Result<NodeProblem> {
    build_continuous(data, gamma, variant)
}

/// All node regressions for data with general discrete variables: one
/// logistic regression per non-baseline level of each discrete variable,
/// then one linear regression per continuous variable.
pub fn build_categorical(data: &MixedDataset, variant: PenaltyVariant) -> Result<Vec<NodeProblem>> {
    check_levels_observed(data)?;
    let mut out = Vec::new();
    for (j, &k) in data.levels().iter().enumerate() {
        for level in 1..k {
            out.push(build_discrete(data, j, level, variant)?);
        }
    }
    for gamma in 0..data.p() {
        out.push(build_continuous(data, gamma, variant)?);
    }
    Ok(out)
}

fn check_levels_observed(data: &MixedDataset) -> Result<()> {
    for (j, &k) in data.levels().iter().enumerate() {
        for level in 0..k {
            if !data.z.column(j).iter().any(|&c| c == level) {
                return Err(Error::UnobservedLevel {
                    column: data.discrete_name(j).to_string(),
                    level: level + 1,
                });
            }
        }
    }
    Ok(())
}

/// Fitted coefficients of a linear regression, in the proportional
/// parameterization, with the residual variance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeParams {
    pub gamma: usize,
    pub intercept: f64,
    pub coefs: Vec<(Coord, f64)>,
    /// Mean squared residual (denominator n); estimates `1 / K^{gamma gamma}`.
    pub residual_variance: f64,
}

impl TildeParams {
    pub fn from_fit(node: &NodeProblem, fit: &FitResult) -> Result<Self> {
        let Target::Continuous { gamma } = node.spec.target else {
            return Err(Error::InvalidInput(
                "scale recovery applies to linear regressions".into(),
            ));
        };
        let pred = node.problem.predictor(&fit.coefs, fit.intercept);
        let mse = (&node.problem.y - pred).norm_squared() / node.problem.n() as f64;
        let coefs = node
            .spec
            .predictors
            .iter()
            .zip(&fit.coefs)
            .map(|(p, &b)| (p.coord, p.sign * b))
            .collect();
        Ok(Self {
            gamma,
            intercept: fit.intercept,
            coefs,
            residual_variance: mse,
        })
    }
}

/// Original-scale parameters from one linear regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredLinear {
    /// Estimate of `K^{gamma gamma} = Phi0^{gamma gamma}`.
    pub precision: f64,
    pub eta0: f64,
    pub coefs: Vec<(Coord, f64)>,
}

/// Multiply the proportional coefficients by `K^{gamma gamma} = 1 / MSE`.
pub fn recover_scale(tilde: &TildeParams) -> Result<RecoveredLinear> {
    if !(tilde.residual_variance > 1e-300) || !tilde.residual_variance.is_finite() {
        return Err(Error::Degenerate(format!(
            "zero residual variance in the regression of Y{}",
            tilde.gamma + 1
        )));
    }
    let k = 1.0 / tilde.residual_variance;
    Ok(RecoveredLinear {
        precision: k,
        eta0: tilde.intercept * k,
        coefs: tilde.coefs.iter().map(|&(c, v)| (c, v * k)).collect(),
    })
}

/// How the shared penalty grid is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GridSpec {
    /// Log-spaced from the largest per-regression `rho_max` down to `ratio` of it.
    Auto {
        len: usize,
        ratio: f64,
    },
    Explicit(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            len: solver::DEFAULT_GRID_LEN,
            ratio: solver::DEFAULT_GRID_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitAllOptions {
    pub variant: PenaltyVariant,
    /// Scale continuous columns to unit variance before fitting (estimates are
    /// mapped back to the input scale).
    pub standardize: bool,
    pub penalty_scale: PenaltyScale,
    pub grid: GridSpec,
    /// Give every regression its own grid relative to its own `rho_max`.
    /// Estimates then report the grid fraction in place of `rho`.
    pub per_node_grid: bool,
    pub solver: SolverOptions,
    pub execution: Execution,
}

impl Default for FitAllOptions {
    fn default() -> Self {
        Self {
            variant: PenaltyVariant::Weighted,
            standardize: true,
            penalty_scale: PenaltyScale::Standardized,
            grid: GridSpec::default(),
            per_node_grid: false,
            solver: SolverOptions::default(),
            execution: Execution::default(),
        }
    }
}

impl FitAllOptions {
    pub fn with_variant(mut self, variant: PenaltyVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_grid(mut self, grid: GridSpec) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Aggregated estimate at one penalty level.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEstimate {
    pub dims: MixedDims,
    pub rho: f64,
    /// Nonzero coordinate estimates (absent coordinates are zero), including
    /// intercept-type coordinates.
    pub coords: BTreeMap<Coord, f64>,
    /// Largest magnitude over each edge group; only positive scores are stored.
    pub edge_scores: BTreeMap<Edge, f64>,
    /// Every contributing regression converged at this `rho`.
    pub converged: bool,
    /// Regressions that produced no estimate at this `rho`.
    pub failed: Vec<String>,
}

impl GraphEstimate {
    pub fn value(&self, coord: Coord) -> f64 {
        self.coords.get(&coord).copied().unwrap_or(0.0)
    }

    pub fn graph(&self) -> MarkovGraph {
        MarkovGraph::from_edges(self.dims.clone(), self.edge_scores.keys().copied())
            .expect("edges are in range")
    }

    pub fn score(&self, edge: &Edge) -> f64 {
        self.edge_scores.get(edge).copied().unwrap_or(0.0)
    }

    /// Estimate as a parameter object (binary models). `lambda0` is left at 0
    /// and `Phi0`'s diagonal holds the estimated conditional precisions.
    pub fn to_params(&self) -> Result<CgParams> {
        if !self.dims.is_binary() {
            return Err(Error::InvalidInput(
                "only binary estimates map onto CgParams".into(),
            ));
        }
        let mut params = CgParams::zeros(self.dims.q, self.dims.p);
        for (&c, &v) in &self.coords {
            params.set(c, v);
        }
        Ok(params)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let edges: Vec<_> = self
            .edge_scores
            .iter()
            .map(|(e, s)| serde_json::json!({"edge": e, "score": s}))
            .collect();
        let coords: Vec<_> = self
            .coords
            .iter()
            .map(|(c, v)| {
                let mut obj = serde_json::to_value(c).expect("coordinates serialize");
                obj["value"] = serde_json::json!(v);
                obj
            })
            .collect();
        serde_json::json!({
            "rho": self.rho,
            "dims": self.dims,
            "converged": self.converged,
            "failed": self.failed,
            "edges": edges,
            "coords": coords,
        })
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct EdgeScore {
            edge: Edge,
            score: f64,
        }
        #[derive(Deserialize)]
        struct CoordValue {
            #[serde(flatten)]
            coord: Coord,
            value: f64,
        }
        #[derive(Deserialize)]
        struct Raw {
            rho: f64,
            dims: MixedDims,
            converged: bool,
            #[serde(default)]
            failed: Vec<String>,
            edges: Vec<EdgeScore>,
            coords: Vec<CoordValue>,
        }
        let raw: Raw = serde_json::from_value(v.clone())?;
        raw.dims.validate()?;
        Ok(Self {
            dims: raw.dims,
            rho: raw.rho,
            coords: raw.coords.into_iter().map(|c| (c.coord, c.value)).collect(),
            edge_scores: raw.edges.into_iter().map(|e| (e.edge, e.score)).collect(),
            converged: raw.converged,
            failed: raw.failed,
        })
    }

    /// DOT rendering with edge scores as weights.
    pub fn to_dot(&self, style: &DotStyle) -> String {
        render_dot(
            &self.dims,
            self.edge_scores.iter().map(|(e, s)| (*e, Some(*s))),
            style,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFailure {
    pub node: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct FitAllResult {
    pub grid: Vec<f64>,
    pub estimates: Vec<GraphEstimate>,
    /// Regressions that failed outright (no estimates on the whole grid).
    pub failures: Vec<NodeFailure>,
}

impl FitAllResult {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty() || self.estimates.iter().any(|e| !e.failed.is_empty())
    }
}

struct Prepared {
    data: MixedDataset,
    scales: Vec<f64>,
}

fn prepare(data: &MixedDataset, standardize: bool) -> Prepared {
    let n = data.n() as f64;
    let mut scaled = data.clone();
    let mut scales = vec![1.0; data.p()];
    if standardize {
        for g in 0..data.p() {
            let col = data.y.column(g);
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                scales[g] = sd;
                scaled.y.column_mut(g).scale_mut(1.0 / sd);
            }
        }
    }
    Prepared {
        data: scaled,
        scales,
    }
}

/// Map a coordinate estimated on scaled `Y' = Y / s` back to the input scale.
fn unscale(coord: Coord, value: f64, s: &[f64]) -> f64 {
    match coord {
        Coord::Lambda { .. } | Coord::LambdaPair { .. } => value,
        Coord::Eta0 { gamma } | Coord::Eta { gamma, .. } => value / s[gamma],
        Coord::Phi0 { gamma, mu } | Coord::Phi { gamma, mu, .. } => value / (s[gamma] * s[mu]),
    }
}

fn node_label(data: &MixedDataset, target: Target) -> String {
    match target {
        Target::Discrete { j, level } => discrete_target_name(data, j, level),
        Target::Continuous { gamma } => data.continuous_name(gamma).to_string(),
    }
}

/// Original-scale coordinate estimates of one regression at one `rho`.
fn node_estimates(
    node: &NodeProblem,
    fit: &FitResult,
    scales: &[f64],
) -> Result<Vec<(Coord, f64)>> {
    let mut out = Vec::with_capacity(node.spec.predictors.len() + 2);
    match node.spec.target {
        Target::Discrete { j, level } => {
            out.push((Coord::Lambda { j, level }, fit.intercept));
            for (p, &b) in node.spec.predictors.iter().zip(&fit.coefs) {
                out.push((p.coord, unscale(p.coord, p.sign * b, scales)));
            }
        }
        Target::Continuous { gamma } => {
            let rec = recover_scale(&TildeParams::from_fit(node, fit)?)?;
            out.push((
                Coord::Phi0 { gamma, mu: gamma },
                unscale(Coord::Phi0 { gamma, mu: gamma }, rec.precision, scales),
            ));
            out.push((
                Coord::Eta0 { gamma },
                unscale(Coord::Eta0 { gamma }, rec.eta0, scales),
            ));
            for (c, v) in rec.coefs {
                out.push((c, unscale(c, v, scales)));
            }
        }
    }
    Ok(out)
}

/// Fit every node regression over a shared `rho` grid and aggregate.
pub fn fit_all(data: &MixedDataset, options: &FitAllOptions) -> Result<FitAllResult> {
    data.validate()?;
    if data.n() == 0 {
        return Err(Error::InvalidInput("dataset has no rows".into()));
    }
    let prepared = prepare(data, options.standardize);
    let pdata = &prepared.data;
    let dims = data.dims();

    let mut targets = Vec::new();
    for (j, &k) in dims.levels.iter().enumerate() {
        for level in 1..k {
            targets.push(Target::Discrete { j, level });
        }
    }
    targets.extend((0..dims.p).map(|gamma| Target::Continuous { gamma }));

    let exec = options.execution;
    let built: Vec<Result<NodeProblem>> = exec.map(&targets, |&t| {
        let mut node = match t {
            Target::Discrete { j, level } => build_discrete(pdata, j, level, options.variant)?,
            Target::Continuous { gamma } => build_continuous(pdata, gamma, options.variant)?,
        };
        if options.penalty_scale == PenaltyScale::Standardized {
            node.standardize_weights();
        }
        Ok(node)
    });

    let mut failures = Vec::new();
    let mut nodes = Vec::new();
    for (t, b) in targets.iter().zip(built) {
        match b {
            Ok(node) => nodes.push(node),
            Err(e) => failures.push(NodeFailure {
                node: node_label(pdata, *t),
                message: e.to_string(),
            }),
        }
    }

    let rho_maxes: Vec<Result<f64>> = exec.map(&nodes, |n| n.problem.rho_max());
    let mut usable = Vec::new();
    let mut node_rho_max = Vec::new();
    for (node, r) in nodes.into_iter().zip(rho_maxes) {
        match r {
            Ok(r) => {
                usable.push(node);
                node_rho_max.push(r);
            }
            Err(e) => failures.push(NodeFailure {
                node: node_label(pdata, node.spec.target),
                message: e.to_string(),
            }),
        }
    }

    let head = node_rho_max.iter().copied().fold(0.0, f64::max);
    let grid = match &options.grid {
        GridSpec::Explicit(g) => g.clone(),
        GridSpec::Auto { len, ratio } if options.per_node_grid => {
            solver::default_grid(1.0, *len, *ratio)
        }
        GridSpec::Auto { len, ratio } => {
            let top = if head > 0.0 { head } else { 1.0 };
            solver::default_grid(top, *len, *ratio)
        }
    };
    if grid.windows(2).any(|w| !(w[0] > w[1])) || grid.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidInput(
            "rho grid must be nonnegative and strictly descending".into(),
        ));
    }

    let paths: Vec<Result<Vec<FitResult>>> = exec.map_range(usable.len(), |i| {
        let node_grid: Vec<f64> = if options.per_node_grid {
            grid.iter().map(|f| f * node_rho_max[i]).collect()
        } else {
            grid.clone()
        };
        solver::fit_path(&usable[i].problem, &node_grid, &options.solver)
    });

    let mut per_rho: Vec<GraphEstimate> = grid
        .iter()
        .map(|&rho| GraphEstimate {
            dims: dims.clone(),
            rho,
            coords: BTreeMap::new(),
            edge_scores: BTreeMap::new(),
            converged: true,
            failed: Vec::new(),
        })
        .collect();

    for (node, path) in usable.iter().zip(paths) {
        let label = node_label(pdata, node.spec.target);
        let path = match path {
            Ok(p) => p,
            Err(e) => {
                failures.push(NodeFailure {
                    node: label,
                    message: e.to_string(),
                });
                continue;
            }
        };
        for (est, fit) in per_rho.iter_mut().zip(&path) {
            est.converged &= fit.converged;
            match node_estimates(node, fit, &prepared.scales) {
                Ok(values) => {
                    for (c, v) in values {
                        if v == 0.0 {
                            continue;
                        }
                        let slot = est.coords.entry(c).or_insert(0.0);
                        if v.abs() > slot.abs() {
                            *slot = v;
                        }
                    }
                }
                Err(_) => est.failed.push(label.clone()),
            }
        }
    }

    for est in &mut per_rho {
        for (c, v) in &est.coords {
            if c.is_intercept() {
                continue;
            }
            for e in c.edges() {
                let s = est.edge_scores.entry(e).or_insert(0.0);
                *s = s.max(v.abs());
            }
        }
        if !failures.is_empty() {
            est.converged = false;
        }
    }

    Ok(FitAllResult {
        grid,
        estimates: per_rho,
        failures,
    })
}
