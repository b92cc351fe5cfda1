//! Command arguments, config files and their resolution into run configs.
//!
//! Every subcommand accepts `--config FILE` (TOML, or JSON by extension). The
//! file supplies values for any flag, spelled as in the flag name with
//! underscores; flags given on the command line win.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mixcg::{GridSpec, PenaltyScale, PenaltyVariant};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Chain,
    ErdosRenyi,
    Hub,
    Clique,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    Weighted,
    Regular,
    Simple,
}

impl From<Penalty> for PenaltyVariant {
    fn from(p: Penalty) -> Self {
        match p {
            Penalty::Weighted => PenaltyVariant::Weighted,
            Penalty::Regular => PenaltyVariant::Regular,
            Penalty::Simple => PenaltyVariant::Simple,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScale {
    Standardized,
    Raw,
}

impl From<WeightScale> for PenaltyScale {
    fn from(s: WeightScale) -> Self {
        match s {
            WeightScale::Standardized => PenaltyScale::Standardized,
            WeightScale::Raw => PenaltyScale::Raw,
        }
    }
}

/// Fill every `None` field of `$a` from `$b`.
macro_rules! merge {
    ($a:ident, $b:ident; $($f:ident),* $(,)?) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f; } )*
    };
}

fn read_config<T: for<'de> Deserialize<'de> + Default + Args>(
    path: Option<&Path>,
) -> Result<T, UsageError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: String| UsageError(format!("{}: {e}", path.display()));
    let is_json = path.extension().is_some_and(|e| e == "json");
    let value: serde_json::Value = if is_json {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    let obj = value
        .as_object()
        .ok_or_else(|| bad("expected a table of options".into()))?;
    let cmd = T::augment_args(clap::Command::new("config"));
    for key in obj.keys() {
        if key == "config" || !cmd.get_arguments().any(|a| a.get_id().as_str() == key) {
            return Err(bad(format!("unknown option {key:?}")));
        }
    }
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

fn required<T>(v: Option<T>, name: &str) -> Result<T, UsageError> {
    v.ok_or_else(|| {
        UsageError(format!(
            "--{} is required (flag or config)",
            name.replace('_', "-")
        ))
    })
}

// Optional boolean flags: `--flag` means true, `--flag false` overrides a
// config file.

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    /// Number of continuous variables.
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of binary variables.
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub edges: Option<usize>,
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long)]
    pub hub_degree: Option<usize>,
    #[arg(long)]
    pub clique_size: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub triangle_free: Option<bool>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiplier on every nonzero parameter.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Nonzero `Phi_j` entries inside complete triangles.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub interactions: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub kind: Kind,
    pub p: usize,
    pub q: usize,
    pub edges: usize,
    pub max_degree: Option<usize>,
    pub hub_degree: Option<usize>,
    pub clique_size: Option<usize>,
    pub triangle_free: bool,
    pub max_attempts: Option<usize>,
    pub n: usize,
    pub seed: u64,
    pub scale: f64,
    pub interactions: bool,
    pub out: PathBuf,
}

impl SimulateArgs {
    pub fn resolve(mut self) -> Result<SimulateConfig, UsageError> {
        let file: SimulateArgs = read_config(self.config.as_deref())?;
        merge!(self, file; kind, p, q, edges, max_degree, hub_degree, clique_size, triangle_free,
            max_attempts, n, seed, scale, interactions, out);
        let kind = self.kind.unwrap_or(Kind::Chain);
        let cfg = SimulateConfig {
            kind,
            p: required(self.p, "p")?,
            q: required(self.q, "q")?,
            edges: match (kind, self.clique_size) {
                (Kind::Clique, Some(k)) => k * k.saturating_sub(1) / 2,
                (Kind::Clique, None) => 0,
                _ => required(self.edges, "edges")?,
            },
            max_degree: self.max_degree,
            hub_degree: self.hub_degree,
            clique_size: self.clique_size,
            triangle_free: self.triangle_free.unwrap_or(false),
            max_attempts: self.max_attempts,
            n: required(self.n, "n")?,
            seed: self.seed.unwrap_or(0),
            scale: self.scale.unwrap_or(1.0),
            interactions: self.interactions.unwrap_or(true),
            out: self.out.unwrap_or_else(|| PathBuf::from(".")),
        };
        if cfg.n == 0 {
            return Err(UsageError("--n must be positive".into()));
        }
        if !(cfg.scale > 0.0) {
            return Err(UsageError("--scale must be positive".into()));
        }
        match kind {
            Kind::Hub if cfg.hub_degree.is_none() => {
                return Err(UsageError("--kind hub needs --hub-degree".into()))
            }
            Kind::Clique if cfg.clique_size.is_none() => {
                return Err(UsageError("--kind clique needs --clique-size".into()))
            }
            _ => {}
        }
        Ok(cfg)
    }
}

/// Dataset and ingestion options shared by `fit` and `stability`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct InputArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Column schema (JSON); defaults to `schema.json` next to the data.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Drop binary columns whose share of ones is below this fraction
    /// (0.03 when given without a value).
    #[arg(long, num_args = 0..=1, default_missing_value = "0.03")]
    pub rare_labels: Option<f64>,
    /// Center and scale continuous columns at ingestion.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize_input: Option<bool>,
    /// Node colors and labels for DOT output (JSON or TOML, keyed by column or node name).
    #[arg(long)]
    pub node_style: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub rare_labels: Option<f64>,
    pub standardize_input: bool,
    pub node_style: Option<PathBuf>,
}

impl InputArgs {
    fn merge(&mut self, file: InputArgs) {
        merge!(self, file; data, schema, rare_labels, standardize_input, node_style);
    }

    fn resolve(self) -> Result<InputConfig, UsageError> {
        let data = required(self.data, "data")?;
        let schema = self
            .schema
            .unwrap_or_else(|| data.with_file_name("schema.json"));
        if let Some(t) = self.rare_labels {
            if !(0.0..1.0).contains(&t) {
                return Err(UsageError(format!(
                    "--rare-labels must lie in [0, 1), got {t}"
                )));
            }
        }
        Ok(InputConfig {
            data,
            schema,
            rare_labels: self.rare_labels,
            standardize_input: self.standardize_input.unwrap_or(false),
            node_style: self.node_style,
        })
    }
}

/// Estimation options shared by `fit` and `stability`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct EstimateArgs {
    #[arg(long, value_enum)]
    pub penalty: Option<Penalty>,
    /// Scale continuous columns to unit variance inside the fit.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    /// Whether penalty weights apply to standardized or raw coefficients.
    #[arg(long, value_enum)]
    pub penalty_scale: Option<WeightScale>,
    /// Run node regressions on the calling thread only.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub sequential: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateConfig {
    pub penalty: Penalty,
    pub standardize: bool,
    pub penalty_scale: WeightScale,
    pub sequential: bool,
}

impl EstimateArgs {
    fn merge(&mut self, file: EstimateArgs) {
        merge!(self, file; penalty, standardize, penalty_scale, sequential);
    }

    fn resolve(self) -> EstimateConfig {
        EstimateConfig {
            penalty: self.penalty.unwrap_or(Penalty::Weighted),
            standardize: self.standardize.unwrap_or(true),
            penalty_scale: self.penalty_scale.unwrap_or(WeightScale::Standardized),
            sequential: self.sequential.unwrap_or(false),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct FitArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimate: EstimateArgs,
    /// Number of automatic grid points.
    #[arg(long)]
    pub grid_len: Option<usize>,
    /// Smallest grid point as a fraction of the largest.
    #[arg(long)]
    pub grid_ratio: Option<f64>,
    /// Explicit grid (comma separated); overrides the automatic grid.
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitConfig {
    pub input: InputConfig,
    pub estimate: EstimateConfig,
    pub grid: GridSpec,
    pub out: PathBuf,
}

impl FitArgs {
    pub fn resolve(mut self) -> Result<FitConfig, UsageError> {
        let file: FitArgs = read_config(self.config.as_deref())?;
        self.input.merge(file.input);
        self.estimate.merge(file.estimate);
        merge!(self, file; grid_len, grid_ratio, rho, out);
        let grid = match self.rho {
            Some(rho) => {
                if rho.is_empty() || rho.iter().any(|r| !(*r >= 0.0)) {
                    return Err(UsageError("--rho needs nonnegative values".into()));
                }
                GridSpec::Explicit(rho)
            }
            None => {
                let GridSpec::Auto { len, ratio } = GridSpec::default() else {
                    unreachable!()
                };
                let len = self.grid_len.unwrap_or(len);
                let ratio = self.grid_ratio.unwrap_or(ratio);
                if len == 0 || !(ratio > 0.0 && ratio <= 1.0) {
                    return Err(UsageError(
                        "--grid-len must be positive and --grid-ratio in (0, 1]".into(),
                    ));
                }
                GridSpec::Auto { len, ratio }
            }
        };
        Ok(FitConfig {
            input: self.input.resolve()?,
            estimate: self.estimate.resolve(),
            grid,
            out: self.out.unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct EvalArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// True parameters (JSON from `simulate`) or a true graph (edge list JSON).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// `estimates.json` from `fit`.
    #[arg(long)]
    pub estimates: Option<PathBuf>,
    /// Report the area up to this false positive rate, normalized.
    #[arg(long)]
    pub fpr_cap: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalConfig {
    pub truth: PathBuf,
    pub estimates: PathBuf,
    pub fpr_cap: f64,
    pub out: PathBuf,
}

impl EvalArgs {
    pub fn resolve(mut self) -> Result<EvalConfig, UsageError> {
        let file: EvalArgs = read_config(self.config.as_deref())?;
        merge!(self, file; truth, estimates, fpr_cap, out);
        let fpr_cap = self.fpr_cap.unwrap_or(1.0);
        if !(fpr_cap > 0.0 && fpr_cap <= 1.0) {
            return Err(UsageError(format!(
                "--fpr-cap must lie in (0, 1], got {fpr_cap}"
            )));
        }
        Ok(EvalConfig {
            truth: required(self.truth, "truth")?,
            estimates: required(self.estimates, "estimates")?,
            fpr_cap,
            out: self.out.unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default)]
pub struct StabilityArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimate: EstimateArgs,
    #[arg(long, conflicts_with = "rho_fraction")]
    pub rho: Option<f64>,
    /// Penalty as a fraction of the largest useful one on the full data.
    #[arg(long)]
    pub rho_fraction: Option<f64>,
    #[arg(long)]
    pub subsamples: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum RhoChoice {
    Absolute(f64),
    Fraction(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityConfig {
    pub input: InputConfig,
    pub estimate: EstimateConfig,
    pub rho: RhoChoice,
    pub subsamples: usize,
    pub threshold: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl StabilityArgs {
    pub fn resolve(mut self) -> Result<StabilityConfig, UsageError> {
        let file: StabilityArgs = read_config(self.config.as_deref())?;
        self.input.merge(file.input);
        self.estimate.merge(file.estimate);
        // A penalty on the command line replaces either form in the file.
        if self.rho.is_none() && self.rho_fraction.is_none() {
            self.rho = file.rho;
            self.rho_fraction = file.rho_fraction;
        }
        merge!(self, file; subsamples, threshold, seed, out);
        let rho = match (self.rho, self.rho_fraction) {
            (Some(_), Some(_)) => {
                return Err(UsageError(
                    "give either --rho or --rho-fraction, not both".into(),
                ))
            }
            (Some(r), None) if r >= 0.0 => RhoChoice::Absolute(r),
            (None, Some(f)) if f > 0.0 && f <= 1.0 => RhoChoice::Fraction(f),
            (None, None) => return Err(UsageError("--rho or --rho-fraction is required".into())),
            _ => {
                return Err(UsageError(
                    "--rho must be nonnegative and --rho-fraction in (0, 1]".into(),
                ))
            }
        };
        let subsamples = self
            .subsamples
            .unwrap_or(mixcg::stability::DEFAULT_SUBSAMPLES);
        let threshold = self
            .threshold
            .unwrap_or(mixcg::stability::DEFAULT_THRESHOLD);
        if subsamples == 0 || !(threshold > 0.0 && threshold <= 1.0) {
            return Err(UsageError(
                "--subsamples must be positive and --threshold in (0, 1]".into(),
            ));
        }
        Ok(StabilityConfig {
            input: self.input.resolve()?,
            estimate: self.estimate.resolve(),
            rho,
            subsamples,
            threshold,
            seed: self.seed.unwrap_or(0),
            out: self.out.unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}
