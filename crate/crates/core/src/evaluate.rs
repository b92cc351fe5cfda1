//! Support recovery curves against a known truth.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Coord, Edge, MarkovGraph};
use crate::model::CgParams;
use crate::neighborhood::GraphEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Individual non-intercept coordinates.
    Parameter,
    Edge,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level::Parameter => "parameter",
            Level::Edge => "edge",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub rho: f64,
    pub level: Level,
    pub tp: usize,
    pub fp: usize,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RocTable {
    pub rows: Vec<RocRow>,
}

fn rates(tp: usize, fp: usize, positives: usize, negatives: usize) -> (f64, f64) {
    let tpr = if positives == 0 {
        0.0
    } else {
        tp as f64 / positives as f64
    };
    let fpr = if negatives == 0 {
        0.0
    } else {
        fp as f64 / negatives as f64
    };
    (tpr, fpr)
}

fn edge_row(truth: &BTreeSet<Edge>, universe: usize, est: &GraphEstimate) -> RocRow {
    let tp = est.edge_scores.keys().filter(|e| truth.contains(e)).count();
    let fp = est.edge_scores.len() - tp;
    let (tpr, fpr) = rates(tp, fp, truth.len(), universe - truth.len());
    RocRow {
        rho: est.rho,
        level: Level::Edge,
        tp,
        fp,
        tpr,
        fpr,
    }
}

/// Parameter- and edge-level rows for every estimate, against true parameters.
pub fn roc(truth: &CgParams, estimates: &[GraphEstimate]) -> Result<RocTable> {
    let dims = truth.dims();
    let universe = dims.interaction_coords();
    let true_coords: BTreeSet<Coord> = universe
        .iter()
        .copied()
        .filter(|&c| truth.get(c) != 0.0)
        .collect();
    let true_edges = truth.graph(0.0).edge_set().clone();
    let mut rows = Vec::with_capacity(2 * estimates.len());
    for est in estimates {
        if est.dims != dims {
            return Err(Error::Dimension(
                "estimate and truth dimensions differ".into(),
            ));
        }
        let selected: Vec<&Coord> = est
            .coords
            .iter()
            .filter(|(c, v)| !c.is_intercept() && **v != 0.0)
            .map(|(c, _)| c)
            .collect();
        let tp = selected.iter().filter(|c| true_coords.contains(c)).count();
        let fp = selected.len() - tp;
        let (tpr, fpr) = rates(
            tp,
            fp,
            true_coords.len(),
            universe.len() - true_coords.len(),
        );
        rows.push(RocRow {
            rho: est.rho,
            level: Level::Parameter,
            tp,
            fp,
            tpr,
            fpr,
        });
        rows.push(edge_row(&true_edges, dims.num_possible_edges(), est));
    }
    Ok(RocTable { rows })
}

/// Edge-level rows only, when just the true graph is known.
pub fn roc_edges(truth: &MarkovGraph, estimates: &[GraphEstimate]) -> Result<RocTable> {
    let mut rows = Vec::with_capacity(estimates.len());
    for est in estimates {
        if est.dims != truth.dims {
            return Err(Error::Dimension(
                "estimate and truth dimensions differ".into(),
            ));
        }
        rows.push(edge_row(
            truth.edge_set(),
            truth.dims.num_possible_edges(),
            est,
        ));
    }
    Ok(RocTable { rows })
}

impl RocTable {
    pub fn level(&self, level: Level) -> impl Iterator<Item = &RocRow> {
        self.rows.iter().filter(move |r| r.level == level)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["rho", "level", "TP", "FP", "TPR", "FPR"])?;
        for r in &self.rows {
            wtr.write_record([
                r.rho.to_string(),
                r.level.to_string(),
                r.tp.to_string(),
                r.fp.to_string(),
                r.tpr.to_string(),
                r.fpr.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Pointwise mean of replicate tables over matched rows (same grid index and
/// level). `TP`/`FP` are rounded means; rates and `rho` are exact means.
pub fn average_tables(tables: &[RocTable]) -> Result<RocTable> {
    let first = tables.first().ok_or(Error::EmptyTable)?;
    if tables.iter().any(|t| t.rows.len() != first.rows.len()) {
        return Err(Error::Dimension(
            "replicate tables have different lengths".into(),
        ));
    }
    let r = tables.len() as f64;
    let mut rows = Vec::with_capacity(first.rows.len());
    for (i, base) in first.rows.iter().enumerate() {
        let mut acc = (0.0, 0.0, 0.0, 0.0, 0.0);
        for t in tables {
            let row = &t.rows[i];
            if row.level != base.level {
                return Err(Error::Dimension(
                    "replicate tables have mismatched levels".into(),
                ));
            }
            acc.0 += row.rho;
            acc.1 += row.tp as f64;
            acc.2 += row.fp as f64;
            acc.3 += row.tpr;
            acc.4 += row.fpr;
        }
        rows.push(RocRow {
            rho: acc.0 / r,
            level: base.level,
            tp: (acc.1 / r).round() as usize,
            fp: (acc.2 / r).round() as usize,
            tpr: acc.3 / r,
            fpr: acc.4 / r,
        });
    }
    Ok(RocTable { rows })
}

/// Area under the curve of one level up to `fpr_cap`, divided by `fpr_cap`.
///
/// Points are sorted by FPR (ties by TPR) and closed with `(0, 0)` and
/// `(1, 1)`; the area is the trapezoid rule, interpolating at the cap.
pub fn auc(table: &RocTable, level: Level, fpr_cap: f64) -> Result<f64> {
    if !(fpr_cap > 0.0 && fpr_cap <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "fpr cap must lie in (0, 1], got {fpr_cap}"
        )));
    }
    let mut pts: Vec<(f64, f64)> = table.level(level).map(|r| (r.fpr, r.tpr)).collect();
    if pts.is_empty() {
        return Err(Error::EmptyTable);
    }
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.partial_cmp(b).expect("rates are finite"));
    let mut area = 0.0;
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 >= fpr_cap {
            break;
        }
        let (xe, ye) = if x1 > fpr_cap {
            (fpr_cap, y0 + (y1 - y0) * (fpr_cap - x0) / (x1 - x0))
        } else {
            (x1, y1)
        };
        area += (xe - x0) * (y0 + ye) / 2.0;
    }
    Ok(area / fpr_cap)
}
