//! Stability selection: refit on random half-samples and keep the edges that
//! are selected often enough.

use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::MixedDataset;
use crate::error::{Error, Result};
use crate::exec::task_rng;
use crate::graph::{render_dot, DotStyle, Edge, MarkovGraph, MixedDims};
use crate::neighborhood::{fit_all, FitAllOptions, GridSpec};

pub const DEFAULT_SUBSAMPLES: usize = 100;
pub const DEFAULT_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StabilityOptions {
    pub rho: f64,
    pub subsamples: usize,
    pub threshold: f64,
    pub seed: u64,
    /// Options for each subsample fit; the grid is replaced by `rho`.
    pub fit: FitAllOptions,
}

impl StabilityOptions {
    pub fn new(rho: f64, seed: u64) -> Self {
        Self {
            rho,
            subsamples: DEFAULT_SUBSAMPLES,
            threshold: DEFAULT_THRESHOLD,
            seed,
            fit: FitAllOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subsamples == 0 {
            return Err(Error::InvalidInput("need at least one subsample".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        if !(self.rho >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "rho must be nonnegative, got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleFailure {
    pub subsample: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StabilityResult {
    pub dims: MixedDims,
    pub rho: f64,
    pub subsamples: usize,
    pub subsample_size: usize,
    /// Selection proportion of every edge selected at least once.
    pub edge_frequency: BTreeMap<Edge, f64>,
    pub threshold: f64,
    pub kept_edges: Vec<Edge>,
    /// Subsample fits that failed (counted as selecting nothing) or that
    /// left some node regression out.
    pub failures: Vec<SubsampleFailure>,
}

impl StabilityResult {
    pub fn frequency(&self, edge: &Edge) -> f64 {
        self.edge_frequency.get(edge).copied().unwrap_or(0.0)
    }

    /// Kept edges at another threshold; frequencies are reused.
    pub fn kept_at(&self, threshold: f64) -> Vec<Edge> {
        self.edge_frequency
            .iter()
            .filter(|(_, &f)| f >= threshold)
            .map(|(e, _)| *e)
            .collect()
    }

    pub fn kept_graph(&self) -> MarkovGraph {
        MarkovGraph::from_edges(self.dims.clone(), self.kept_edges.iter().copied())
            .expect("edges are in range")
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct Freq {
            edge: Edge,
            frequency: f64,
        }
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct Out<'a> {
            dims: &'a MixedDims,
            rho: f64,
            subsamples: usize,
            subsample_size: usize,
            threshold: f64,
            edge_frequency: Vec<Freq>,
            kept_edges: &'a [Edge],
            failures: &'a [SubsampleFailure],
        }
        let out = Out {
            dims: &self.dims,
            rho: self.rho,
            subsamples: self.subsamples,
            subsample_size: self.subsample_size,
            threshold: self.threshold,
            edge_frequency: self
                .edge_frequency
                .iter()
                .map(|(e, f)| Freq {
                    edge: *e,
                    frequency: *f,
                })
                .collect(),
            kept_edges: &self.kept_edges,
            failures: &self.failures,
        };
        Ok(serde_json::to_string_pretty(&out)?)
    }

    /// DOT of the kept edges, weighted by frequency.
    pub fn to_dot(&self, style: &DotStyle) -> String {
        render_dot(
            &self.dims,
            self.kept_edges
                .iter()
                .map(|e| (*e, Some(self.frequency(e)))),
            style,
        )
    }
}

/// Fit on `subsamples` random subsets of size `floor(n / 2)` (without
/// replacement) at a single `rho` and record edge selection frequencies.
pub fn stability_select(
    data: &MixedDataset,
    options: &StabilityOptions,
) -> Result<StabilityResult> {
    options.validate()?;
    data.validate()?;
    let n = data.n();
    let m = n / 2;
    if m == 0 {
        return Err(Error::InvalidInput(format!(
            "{n} rows are too few to subsample"
        )));
    }
    let mut fit = options.fit.clone();
    fit.grid = GridSpec::Explicit(vec![options.rho]);
    fit.per_node_grid = false;
    let exec = fit.execution;

    let outcomes: Vec<Result<(Vec<Edge>, Vec<String>)>> = exec.map_range(options.subsamples, |b| {
        let mut rng = task_rng(options.seed, b as u64);
        let mut rows = index::sample(&mut rng, n, m).into_vec();
        rows.sort_unstable();
        let sub = data.subset(&rows);
        let res = fit_all(&sub, &fit)?;
        let est = &res.estimates[0];
        let mut notes: Vec<String> = res
            .failures
            .iter()
            .map(|f| format!("{}: {}", f.node, f.message))
            .collect();
        notes.extend(est.failed.iter().map(|node| format!("{node}: no estimate")));
        Ok((est.edge_scores.keys().copied().collect(), notes))
    });

    let mut counts: BTreeMap<Edge, usize> = BTreeMap::new();
    let mut failures = Vec::new();
    for (b, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((edges, notes)) => {
                for e in edges {
                    *counts.entry(e).or_default() += 1;
                }
                failures.extend(notes.into_iter().map(|message| SubsampleFailure {
                    subsample: b,
                    message,
                }));
            }
            Err(e) => failures.push(SubsampleFailure {
                subsample: b,
                message: e.to_string(),
            }),
        }
    }
    let total = options.subsamples as f64;
    let edge_frequency: BTreeMap<Edge, f64> = counts
        .into_iter()
        .map(|(e, c)| (e, c as f64 / total))
        .collect();
    let mut result = StabilityResult {
        dims: data.dims(),
        rho: options.rho,
        subsamples: options.subsamples,
        subsample_size: m,
        edge_frequency,
        threshold: options.threshold,
        kept_edges: Vec::new(),
        failures,
    };
    result.kept_edges = result.kept_at(options.threshold);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::simulate::{gen_graph, gen_params, sample, GraphSpec, ParamGenSpec};

    fn chain_data(seed: u64) -> MixedDataset {
        let g = gen_graph(&GraphSpec::chain(MixedDims::binary(2, 3), 4, seed)).unwrap();
        let params = gen_params(&g, &ParamGenSpec::seeded(seed)).unwrap();
        sample(&params, 400, seed).unwrap()
    }

    #[test]
    fn reproducible_and_parallel_agnostic() {
        let data = chain_data(1);
        let mut opts = StabilityOptions::new(0.1, 5);
        opts.subsamples = 8;
        let a = stability_select(&data, &opts).unwrap();
        opts.fit.execution = Execution::Sequential;
        let b = stability_select(&data, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.subsample_size, 200);
        assert!(a.edge_frequency.values().all(|&f| (0.0..=1.0).contains(&f)));
    }

    #[test]
    fn kept_set_shrinks_with_threshold() {
        let data = chain_data(2);
        let mut opts = StabilityOptions::new(0.05, 3);
        opts.subsamples = 10;
        let res = stability_select(&data, &opts).unwrap();
        let mut prev = usize::MAX;
        for t in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            let k = res.kept_at(t);
            assert!(k.len() <= prev);
            prev = k.len();
            assert!(k.iter().all(|e| res.frequency(e) >= t));
        }
    }

    #[test]
    fn huge_rho_keeps_nothing() {
        let data = chain_data(3);
        let mut opts = StabilityOptions::new(1e6, 1);
        opts.subsamples = 4;
        let res = stability_select(&data, &opts).unwrap();
        assert!(res.edge_frequency.is_empty());
        assert!(res.kept_edges.is_empty());
        assert!(res.to_json().unwrap().contains("\"keptEdges\": []"));
    }

    #[test]
    fn invalid_options_rejected() {
        let data = chain_data(4);
        let mut opts = StabilityOptions::new(0.1, 1);
        opts.subsamples = 0;
        assert!(stability_select(&data, &opts).is_err());
        opts.subsamples = 2;
        opts.threshold = 0.0;
        assert!(stability_select(&data, &opts).is_err());
    }
}
