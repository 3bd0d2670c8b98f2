//! Field-error metrics over `N_s × N_t` truth/prediction pairs.
//!
//! Fields are stored as time columns: `truth[j][i]` is node `i` at step `j`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub truth: Vec<Vec<f64>>,
    pub prediction: Vec<Vec<f64>>,
    pub units: String,
}

impl FieldPair {
    pub fn new(truth: Vec<Vec<f64>>, prediction: Vec<Vec<f64>>, units: impl Into<String>) -> Result<Self> {
        let pair = Self {
            truth,
            prediction,
            units: units.into(),
        };
        check(&pair.truth, &pair.prediction)?;
        Ok(pair)
    }

    pub fn n_s(&self) -> usize {
        self.truth.first().map_or(0, Vec::len)
    }

    pub fn n_t(&self) -> usize {
        self.truth.len()
    }
}

fn check(truth: &[Vec<f64>], pred: &[Vec<f64>]) -> Result<()> {
    ensure_len("prediction columns", pred.len(), truth.len())?;
    let Some(first) = truth.first() else {
        return Err(Error::shape("field pair has no time columns"));
    };
    if first.is_empty() {
        return Err(Error::shape("field pair has no nodes"));
    }
    for (a, b) in truth.iter().zip(pred) {
        ensure_len("truth column", a.len(), first.len())?;
        ensure_len("prediction column", b.len(), first.len())?;
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            return Err(Error::argument("field pair contains non-finite values"));
        }
    }
    Ok(())
}

/// Per-step root-mean-square error over nodes.
pub fn rmse_series(truth: &[Vec<f64>], pred: &[Vec<f64>]) -> Result<Vec<f64>> {
    check(truth, pred)?;
    Ok(truth
        .iter()
        .zip(pred)
        .map(|(a, b)| {
            let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (ss / a.len() as f64).sqrt()
        })
        .collect())
}

/// RMSE divided by each truth column's range.
pub fn nrmse_series(truth: &[Vec<f64>], pred: &[Vec<f64>]) -> Result<Vec<f64>> {
    let rmse = rmse_series(truth, pred)?;
    truth
        .iter()
        .zip(rmse)
        .enumerate()
        .map(|(j, (col, e))| {
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            if hi - lo > 0.0 {
                Ok(e / (hi - lo))
            } else {
                Err(Error::DegenerateSnapshot {
                    column: j,
                    reason: "truth column has zero range".into(),
                })
            }
        })
        .collect()
}

/// Per-node mean absolute error over time.
pub fn mae_field(truth: &[Vec<f64>], pred: &[Vec<f64>]) -> Result<Vec<f64>> {
    check(truth, pred)?;
    let n_s = truth[0].len();
    let mut out = vec![0.0; n_s];
    for (a, b) in truth.iter().zip(pred) {
        for i in 0..n_s {
            out[i] += (a[i] - b[i]).abs();
        }
    }
    let n_t = truth.len() as f64;
    Ok(out.into_iter().map(|v| v / n_t).collect())
}

/// Pearson correlation of spatial anomalies, per step.
pub fn acc_series(truth: &[Vec<f64>], pred: &[Vec<f64>]) -> Result<Vec<f64>> {
    check(truth, pred)?;
    truth
        .iter()
        .zip(pred)
        .enumerate()
        .map(|(j, (a, b))| {
            let n = a.len() as f64;
            let ma = a.iter().sum::<f64>() / n;
            let mb = b.iter().sum::<f64>() / n;
            let (mut num, mut na, mut nb) = (0.0, 0.0, 0.0);
            for (x, y) in a.iter().zip(b) {
                let (da, db) = (x - ma, y - mb);
                num += da * db;
                na += da * da;
                nb += db * db;
            }
            if na == 0.0 || nb == 0.0 {
                return Err(Error::DegenerateSnapshot {
                    column: j,
                    reason: "spatial anomaly has zero norm".into(),
                });
            }
            Ok((num / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
        })
        .collect()
}

/// Mean over steps of [`acc_series`].
pub fn acc(truth: &[Vec<f64>], pred: &[Vec<f64>]) -> Result<f64> {
    Ok(mean(&acc_series(truth, pred)?))
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// All four metrics for one pair of predicted columns (the IC column excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: Vec<f64>,
    pub nrmse: Vec<f64>,
    pub mae: Vec<f64>,
    pub acc: f64,
    pub mean_rmse: f64,
    pub mean_nrmse: f64,
}

impl MetricReport {
    pub fn compute(truth: &[Vec<f64>], pred: &[Vec<f64>]) -> Result<Self> {
        let rmse = rmse_series(truth, pred)?;
        let nrmse = nrmse_series(truth, pred)?;
        Ok(Self {
            mae: mae_field(truth, pred)?,
            acc: acc(truth, pred)?,
            mean_rmse: mean(&rmse),
            mean_nrmse: mean(&nrmse),
            rmse,
            nrmse,
        })
    }

    pub fn from_pair(pair: &FieldPair) -> Result<Self> {
        Self::compute(&pair.truth, &pair.prediction)
    }

    /// `step,rmse,nrmse`, one row per predicted step (1-based).
    pub fn series_csv(&self) -> String {
        let mut s = String::from("step,rmse,nrmse\n");
        for (j, (a, b)) in self.rmse.iter().zip(&self.nrmse).enumerate() {
            let _ = writeln!(s, "{},{a:e},{b:e}", j + 1);
        }
        s
    }

    /// `node,mae`, one row per node.
    pub fn mae_csv(&self) -> String {
        let mut s = String::from("node,mae\n");
        for (i, v) in self.mae.iter().enumerate() {
            let _ = writeln!(s, "{i},{v:e}");
        }
        s
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&serde_json::json!({
            "acc": self.acc,
            "mean_rmse": self.mean_rmse,
            "mean_nrmse": self.mean_nrmse,
            "steps": self.rmse.len(),
        }))
        .map_err(|e| Error::format(e.to_string()))
    }
}

/// Parses a CSV emitted by this module back into columns (header dropped).
pub fn parse_csv_columns(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format("empty CSV"))?;
    let width = header.split(',').count();
    let mut cols = vec![Vec::new(); width];
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::format(format!("CSV row {} has {} fields", n + 1, fields.len())));
        }
        for (c, f) in cols.iter_mut().zip(fields) {
            c.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::format(format!("CSV row {}: {e}", n + 1)))?,
            );
        }
    }
    Ok(cols)
}
