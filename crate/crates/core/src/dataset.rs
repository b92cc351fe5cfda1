//! Mixed datasets and their CSV/JSON representation.
//!
//! Discrete values are stored as zero-based level codes (code 0 is the
//! baseline level). In CSV, binary columns are written as `0`/`1` and
//! categorical columns as one-based levels `1..=K` (or as labels when the
//! schema lists them).

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MixedDims;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Binary,
    Categorical {
        levels: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Continuous,
}

impl ColumnKind {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, ColumnKind::Continuous)
    }

    pub fn levels(&self) -> Option<u32> {
        match self {
            ColumnKind::Binary => Some(2),
            ColumnKind::Categorical { levels, .. } => Some(*levels),
            ColumnKind::Continuous => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate column {:?}",
                    c.name
                )));
            }
            if let ColumnKind::Categorical { levels, labels } = &c.kind {
                if *levels < 2 {
                    return Err(Error::InvalidInput(format!(
                        "column {:?} has {levels} levels; need at least 2",
                        c.name
                    )));
                }
                if labels.as_ref().is_some_and(|l| l.len() != *levels as usize) {
                    return Err(Error::InvalidInput(format!(
                        "column {:?} lists a wrong number of labels",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `n` observations of `q` discrete and `p` continuous variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDataset {
    /// n x q level codes.
    pub z: DMatrix<u32>,
    /// n x p continuous values.
    pub y: DMatrix<f64>,
    /// Discrete columns first, then continuous, matching `z` and `y`.
    pub schema: Schema,
}

/// Options applied at ingestion.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Drop binary columns whose share of ones is below this fraction.
    pub rare_label_threshold: Option<f64>,
    /// Center and scale continuous columns to unit variance.
    pub standardize: bool,
}

/// Share threshold used for the rare-label filter when enabled without a value.
pub const DEFAULT_RARE_LABEL_THRESHOLD: f64 = 0.03;

impl MixedDataset {
    /// Binary dataset with default names `Z1..Zq`, `Y1..Yp`.
    pub fn binary(z: DMatrix<u32>, y: DMatrix<f64>) -> Result<Self> {
        let q = z.ncols();
        let p = y.ncols();
        let mut columns: Vec<ColumnSchema> = (0..q)
            .map(|j| ColumnSchema {
                name: format!("Z{}", j + 1),
                kind: ColumnKind::Binary,
            })
            .collect();
        columns.extend((0..p).map(|g| ColumnSchema {
            name: format!("Y{}", g + 1),
            kind: ColumnKind::Continuous,
        }));
        Self::new(z, y, Schema { columns })
    }

    pub fn new(z: DMatrix<u32>, y: DMatrix<f64>, schema: Schema) -> Result<Self> {
        let ds = Self { z, y, schema };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        let q = self.z.ncols();
        let p = self.y.ncols();
        if self.z.nrows() != self.y.nrows() && q > 0 && p > 0 {
            return Err(Error::Dimension(format!(
                "{} discrete rows vs {} continuous rows",
                self.z.nrows(),
                self.y.nrows()
            )));
        }
        let (disc, cont): (Vec<_>, Vec<_>) = self
            .schema
            .columns
            .iter()
            .partition(|c| c.kind.is_discrete());
        if disc.len() != q || cont.len() != p {
            return Err(Error::Dimension(
                "schema does not match data columns".into(),
            ));
        }
        if self.schema.columns[..q]
            .iter()
            .any(|c| !c.kind.is_discrete())
        {
            return Err(Error::InvalidInput(
                "schema must list discrete columns first".into(),
            ));
        }
        for (j, col) in disc.iter().enumerate() {
            let k = col.kind.levels().expect("discrete");
            if let Some(i) = (0..self.z.nrows()).find(|&i| self.z[(i, j)] >= k) {
                return Err(Error::Data {
                    row: i,
                    column: col.name.clone(),
                    message: format!("code {} outside 0..{k}", self.z[(i, j)]),
                });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        if self.z.ncols() > 0 {
            self.z.nrows()
        } else {
            self.y.nrows()
        }
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    pub fn p(&self) -> usize {
        self.y.ncols()
    }

    pub fn dims(&self) -> MixedDims {
        MixedDims {
            q: self.q(),
            p: self.p(),
            levels: self.levels(),
        }
    }

    pub fn levels(&self) -> Vec<u32> {
        self.schema.columns[..self.q()]
            .iter()
            .map(|c| c.kind.levels().expect("discrete"))
            .collect()
    }

    pub fn discrete_name(&self, j: usize) -> &str {
        &self.schema.columns[j].name
    }

    pub fn continuous_name(&self, gamma: usize) -> &str {
        &self.schema.columns[self.q() + gamma].name
    }

    /// Rows `rows` in the given order.
    pub fn subset(&self, rows: &[usize]) -> MixedDataset {
        let z = DMatrix::from_fn(rows.len(), self.q(), |i, j| self.z[(rows[i], j)]);
        let y = DMatrix::from_fn(rows.len(), self.p(), |i, g| self.y[(rows[i], g)]);
        MixedDataset {
            z,
            y,
            schema: self.schema.clone(),
        }
    }

    /// Write a header row followed by one row per observation.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))?;
        let q = self.q();
        for i in 0..self.n() {
            let mut rec: Vec<String> = Vec::with_capacity(q + self.p());
            for j in 0..q {
                let code = self.z[(i, j)];
                rec.push(match &self.schema.columns[j].kind {
                    ColumnKind::Binary => code.to_string(),
                    ColumnKind::Categorical {
                        labels: Some(l), ..
                    } => l[code as usize].clone(),
                    ColumnKind::Categorical { .. } => (code + 1).to_string(),
                    ColumnKind::Continuous => unreachable!(),
                });
            }
            for g in 0..self.p() {
                rec.push(format!("{}", self.y[(i, g)]));
            }
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Read a CSV against `schema`; the header must list exactly the schema's
    /// columns (any order).
    pub fn read_csv<R: Read>(r: R, schema: &Schema, options: &IngestOptions) -> Result<Self> {
        schema.validate()?;
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        if header.len() != schema.columns.len() {
            return Err(Error::InvalidInput(format!(
                "header has {} columns, schema has {}",
                header.len(),
                schema.columns.len()
            )));
        }
        let mut position = Vec::with_capacity(schema.columns.len());
        for col in &schema.columns {
            let idx = header.iter().position(|h| h == &col.name).ok_or_else(|| {
                Error::InvalidInput(format!("column {:?} missing from header", col.name))
            })?;
            position.push(idx);
        }
        let disc: Vec<usize> = (0..schema.columns.len())
            .filter(|&c| schema.columns[c].kind.is_discrete())
            .collect();
        let cont: Vec<usize> = (0..schema.columns.len())
            .filter(|&c| !schema.columns[c].kind.is_discrete())
            .collect();

        let mut zrows: Vec<u32> = Vec::new();
        let mut yrows: Vec<f64> = Vec::new();
        let mut n = 0;
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let row = row + 1;
            for &c in &disc {
                let col = &schema.columns[c];
                let raw = rec.get(position[c]).unwrap_or("");
                zrows.push(parse_discrete(raw, col, row)?);
            }
            for &c in &cont {
                let col = &schema.columns[c];
                let raw = rec.get(position[c]).unwrap_or("");
                let v: f64 = raw
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| Error::Data {
                        row,
                        column: col.name.clone(),
                        message: if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                            "missing value".into()
                        } else {
                            format!("{raw:?} is not a finite number")
                        },
                    })?;
                yrows.push(v);
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        let z = DMatrix::from_row_slice(n, disc.len(), &zrows);
        let y = DMatrix::from_row_slice(n, cont.len(), &yrows);
        let columns = disc
            .iter()
            .chain(&cont)
            .map(|&c| schema.columns[c].clone())
            .collect();
        let mut ds = MixedDataset::new(z, y, Schema { columns })?;

        if let Some(threshold) = options.rare_label_threshold {
            ds = ds.drop_rare_labels(threshold);
        }
        if options.standardize {
            ds.standardize_continuous();
        }
        Ok(ds)
    }

    pub fn read_csv_path(
        path: impl AsRef<Path>,
        schema: &Schema,
        options: &IngestOptions,
    ) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, schema, options)
    }

    /// Remove binary columns whose share of ones is below `threshold`.
    pub fn drop_rare_labels(&self, threshold: f64) -> MixedDataset {
        let n = self.n() as f64;
        let keep: Vec<usize> = (0..self.q())
            .filter(|&j| match self.schema.columns[j].kind {
                ColumnKind::Binary => {
                    let ones = self.z.column(j).iter().filter(|&&v| v == 1).count() as f64;
                    ones / n >= threshold
                }
                _ => true,
            })
            .collect();
        let z = DMatrix::from_fn(self.n(), keep.len(), |i, c| self.z[(i, keep[c])]);
        let mut columns: Vec<ColumnSchema> = keep
            .iter()
            .map(|&j| self.schema.columns[j].clone())
            .collect();
        columns.extend(self.schema.columns[self.q()..].iter().cloned());
        MixedDataset {
            z,
            y: self.y.clone(),
            schema: Schema { columns },
        }
    }

    /// Center and scale continuous columns (population standard deviation).
    pub fn standardize_continuous(&mut self) {
        let n = self.n() as f64;
        for g in 0..self.p() {
            let mut col = self.y.column_mut(g);
            let mean = col.sum() / n;
            col.add_scalar_mut(-mean);
            let sd = (col.norm_squared() / n).sqrt();
            if sd > 0.0 {
                col /= sd;
            }
        }
    }
}

fn parse_discrete(raw: &str, col: &ColumnSchema, row: usize) -> Result<u32> {
    let err = |message: String| Error::Data {
        row,
        column: col.name.clone(),
        message,
    };
    if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
        return Err(err("missing value".into()));
    }
    match &col.kind {
        ColumnKind::Binary => match raw {
            "0" => Ok(0),
            "1" => Ok(1),
            _ => Err(err(format!("{raw:?} is not 0 or 1"))),
        },
        ColumnKind::Categorical {
            labels: Some(labels),
            ..
        } => labels
            .iter()
            .position(|l| l == raw)
            .map(|p| p as u32)
            .ok_or_else(|| err(format!("{raw:?} is not a listed level"))),
        ColumnKind::Categorical { levels, .. } => match raw.parse::<u32>() {
            Ok(v) if (1..=*levels).contains(&v) => Ok(v - 1),
            _ => Err(err(format!("{raw:?} is not a level in 1..={levels}"))),
        },
        ColumnKind::Continuous => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MixedDataset {
        let z = DMatrix::from_row_slice(3, 2, &[0, 1, 1, 1, 0, 0]);
        let y = DMatrix::from_row_slice(3, 1, &[0.1, -2.5e-7, 3.0]);
        MixedDataset::binary(z, y).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let ds = small();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = MixedDataset::read_csv(&buf[..], &ds.schema, &IngestOptions::default()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn columns_in_any_order() {
        let csv = "Y1,Z1\n1.5,1\n2.5,0\n";
        let schema = Schema::from_json(
            r#"{"columns":[{"name":"Y1","kind":"continuous"},{"name":"Z1","kind":"binary"}]}"#,
        )
        .unwrap();
        let ds =
            MixedDataset::read_csv(csv.as_bytes(), &schema, &IngestOptions::default()).unwrap();
        assert_eq!(ds.q(), 1);
        assert_eq!(ds.schema.columns[0].name, "Z1");
        assert_eq!(ds.z[(0, 0)], 1);
        assert_eq!(ds.y[(1, 0)], 2.5);
    }

    #[test]
    fn missing_values_report_position() {
        let csv = "Z1,Y1\n1,0.5\n0,\n";
        let schema = Schema::from_json(
            r#"{"columns":[{"name":"Z1","kind":"binary"},{"name":"Y1","kind":"continuous"}]}"#,
        )
        .unwrap();
        let err =
            MixedDataset::read_csv(csv.as_bytes(), &schema, &IngestOptions::default()).unwrap_err();
        match err {
            Error::Data { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "Y1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_csv_rejected() {
        let schema =
            Schema::from_json(r#"{"columns":[{"name":"Y1","kind":"continuous"}]}"#).unwrap();
        assert!(
            MixedDataset::read_csv("Y1\n".as_bytes(), &schema, &IngestOptions::default()).is_err()
        );
    }

    #[test]
    fn rare_label_filter_drops_two_percent_column() {
        let n = 100;
        let z = DMatrix::from_fn(n, 2, |i, j| {
            if j == 0 {
                (i < 2) as u32
            } else {
                (i % 2) as u32
            }
        });
        let y = DMatrix::from_fn(n, 1, |i, _| i as f64);
        let ds = MixedDataset::binary(z, y).unwrap();
        let filtered = ds.drop_rare_labels(DEFAULT_RARE_LABEL_THRESHOLD);
        assert_eq!(filtered.q(), 1);
        assert_eq!(filtered.discrete_name(0), "Z2");
    }

    #[test]
    fn categorical_levels_are_one_based() {
        let csv = "C,Y1\n1,0\n4,1\n2,2\n3,3\n";
        let schema = Schema::from_json(
            r#"{"columns":[{"name":"C","kind":"categorical","levels":4},{"name":"Y1","kind":"continuous"}]}"#,
        )
        .unwrap();
        let ds =
            MixedDataset::read_csv(csv.as_bytes(), &schema, &IngestOptions::default()).unwrap();
        assert_eq!(ds.levels(), vec![4]);
        assert_eq!(
            ds.z.column(0).iter().copied().collect::<Vec<_>>(),
            vec![0, 3, 1, 2]
        );
        let bad = "C,Y1\n5,0\n";
        assert!(
            MixedDataset::read_csv(bad.as_bytes(), &schema, &IngestOptions::default()).is_err()
        );
    }

    #[test]
    fn standardize_gives_unit_variance() {
        let mut ds = small();
        ds.standardize_continuous();
        let col = ds.y.column(0);
        assert!(col.sum().abs() < 1e-12);
        assert!((col.norm_squared() / 3.0 - 1.0).abs() < 1e-12);
    }
}
