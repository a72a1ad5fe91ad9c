//! Attribute weights learned by least squares against co-interest counts.
//!
//! The model is `S = q · F` with `F` the `n x P` pair feature matrix and `S`
//! the `1 x P` co-interest row. The weights are the minimum-norm least-squares
//! solution `q = S · F⁺`, with `F⁺` the Moore-Penrose pseudoinverse.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::FeatureMatrix;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("feature matrix has {pairs} pair columns but the target has {targets} entries")]
    DimensionMismatch { pairs: usize, targets: usize },
    #[error("cannot solve an empty system ({rows} x {cols})")]
    Empty { rows: usize, cols: usize },
    #[error("weights table: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, WeightError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
    pub normalized: bool,
    /// Set when normalisation met a constant vector.
    pub degenerate: bool,
}

impl WeightVector {
    pub fn raw(values: Vec<f64>) -> Self {
        WeightVector {
            values,
            normalized: false,
            degenerate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dot(&self, features: &[f64]) -> f64 {
        self.values.iter().zip(features).map(|(q, f)| q * f).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSolution {
    pub weights: WeightVector,
    /// `‖q·F − S‖₂`
    pub residual: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Minimum-norm least-squares solution of `q · F = S` for a row-major `n x P`
/// matrix given as `rows`.
pub fn solve_rows(rows: &[Vec<f64>], targets: &[f64]) -> Result<WeightSolution> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(WeightError::DimensionMismatch {
            pairs: bad.len(),
            targets: p,
        });
    }
    let f = DMatrix::from_fn(n, p, |r, c| rows[r][c]);
    solve_dense(&f, targets)
}

pub fn solve_weights(features: &FeatureMatrix, targets: &[f64]) -> Result<WeightSolution> {
    let n = features.n_features();
    let p = features.n_pairs();
    let f = DMatrix::from_fn(n, p, |r, c| features.get(r, c));
    solve_dense(&f, targets)
}

fn solve_dense(f: &DMatrix<f64>, targets: &[f64]) -> Result<WeightSolution> {
    let (n, p) = f.shape();
    if targets.len() != p {
        return Err(WeightError::DimensionMismatch {
            pairs: p,
            targets: targets.len(),
        });
    }
    if n == 0 || p == 0 {
        return Err(WeightError::Empty { rows: n, cols: p });
    }
    let s = DVector::from_column_slice(targets);

    // F = U Σ Vᵀ, so qᵀ = U Σ⁺ Vᵀ Sᵀ
    let svd = f.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.max();
    let cutoff = RANK_TOLERANCE * sigma_max;

    let mut projected = v_t * &s;
    let mut rank = 0;
    for (k, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma > cutoff && sigma > 0.0 {
            projected[k] /= sigma;
            rank += 1;
        } else {
            projected[k] = 0.0;
        }
    }
    let q = u * projected;

    let fitted = f.transpose() * &q;
    let residual = (fitted - s).norm();
    Ok(WeightSolution {
        weights: WeightVector::raw(q.iter().copied().collect()),
        residual,
        rank,
        rank_deficient: rank < n,
    })
}

/// `‖q·F − S‖₂` for arbitrary weights.
pub fn residual(rows: &[Vec<f64>], targets: &[f64], q: &[f64]) -> f64 {
    targets
        .iter()
        .enumerate()
        .map(|(c, s)| {
            let fit: f64 = rows.iter().zip(q).map(|(row, w)| row[c] * w).sum();
            (fit - s).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Divides the targets by their maximum so they fall in [0, 1].
pub fn scale_targets(targets: &[f64]) -> Vec<f64> {
    let max = targets.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        targets.iter().map(|t| t / max).collect()
    } else {
        targets.to_vec()
    }
}

/// Min-max normalisation to [0, 1]; a constant vector maps to `1/n` each and
/// is flagged degenerate.
pub fn normalize_weights(q: &WeightVector) -> WeightVector {
    let n = q.values.len();
    let min = q.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = q.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n == 0 || max == min {
        return WeightVector {
            values: vec![1.0 / n.max(1) as f64; n],
            normalized: true,
            degenerate: true,
        };
    }
    WeightVector {
        values: q.values.iter().map(|v| (v - min) / (max - min)).collect(),
        normalized: true,
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedWeights {
    pub attribute_names: Vec<String>,
    pub raw: WeightVector,
    pub normalized: WeightVector,
}

impl LearnedWeights {
    pub fn new(attribute_names: Vec<String>, raw: WeightVector) -> Self {
        let normalized = normalize_weights(&raw);
        LearnedWeights {
            attribute_names,
            raw,
            normalized,
        }
    }

    /// Writes `attribute_name,raw_weight,normalized_weight` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["attribute_name", "raw_weight", "normalized_weight"])?;
        for ((name, raw), norm) in self
            .attribute_names
            .iter()
            .zip(&self.raw.values)
            .zip(&self.normalized.values)
        {
            w.write_record([name.clone(), raw.to_string(), norm.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let (mut names, mut raw, mut norm) = (Vec::new(), Vec::new(), Vec::new());
        for (line, row) in r.records().enumerate() {
            let row = row?;
            let parse = |idx: usize| {
                row.get(idx)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| WeightError::Table(format!("row {}: bad weight", line + 1)))
            };
            names.push(row.get(0).unwrap_or_default().to_string());
            raw.push(parse(1)?);
            norm.push(parse(2)?);
        }
        let degenerate = normalize_weights(&WeightVector::raw(raw.clone())).degenerate;
        Ok(LearnedWeights {
            attribute_names: names,
            raw: WeightVector::raw(raw),
            normalized: WeightVector {
                values: norm,
                normalized: true,
                degenerate,
            },
        })
    }
}
