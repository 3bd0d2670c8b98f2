//! Train/validation/test construction from per-`r` snapshot sets.

use sha2::{Digest, Sha256};

use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::swegen::SnapshotSet;

/// Sliced collections. Train and validation sets hold only their day window;
/// test sets are kept whole so rollouts can start anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub train: Vec<SnapshotSet>,
    pub val: Vec<SnapshotSet>,
    pub test: Vec<SnapshotSet>,
    /// Column of every test set where hotstart rollouts begin.
    pub test_start: usize,
}

impl SplitData {
    /// SHA-256 over the training and validation tensors.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        for set in self.train.iter().chain(&self.val) {
            h.update(set.to_bytes()?);
        }
        Ok(hex::encode(h.finalize()))
    }
}

/// Columns `[start, end)` of every variable and boundary series.
pub fn slice_set(set: &SnapshotSet, start: usize, end: usize) -> Result<SnapshotSet> {
    if start >= end || end > set.n_t() {
        return Err(Error::argument(format!("window {start}..{end} outside 0..{}", set.n_t())));
    }
    let variables = set
        .variables
        .iter()
        .map(|(name, _)| Ok((name.clone(), Matrix::from_columns(&set.columns(name, start, end)?)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SnapshotSet {
        scenario: set.scenario,
        dt_hours: set.dt_hours,
        r: set.r,
        variables,
        bc_series: set.bc_series.iter().map(|s| s[start..end].to_vec()).collect(),
    })
}

fn range_of(rs: &[f64]) -> (f64, f64) {
    rs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)))
}

fn overlaps(a: [f64; 2], b: [f64; 2]) -> bool {
    a[0] < b[1] && b[0] < a[1]
}

/// Day span a test rollout occupies, including the extended window.
pub fn test_days(cfg: &ExperimentConfig) -> [f64; 2] {
    let steps = cfg.protocol.horizon * cfg.protocol.long_factor;
    let start = cfg.split.test_start_day;
    [start, start + steps as f64 * cfg.data.output_dt_hours / 24.0]
}

/// Rule checks that need no data: extrapolation extrema and window overlap.
pub fn check_split(cfg: &ExperimentConfig) -> Result<()> {
    let s = &cfg.split;
    if s.train_r.is_empty() || s.test_r.is_empty() {
        return Err(Error::config("need at least one train and one test r"));
    }
    for r in s.train_r.iter().chain(&s.val_r).chain(&s.test_r) {
        if !(*r > 0.0) || !r.is_finite() {
            return Err(Error::config(format!("friction r = {r} must be positive")));
        }
    }
    for (name, w) in [("train", s.train_days), ("val", s.val_days)] {
        if !(w[0] < w[1]) || w[0] < 0.0 || w[1] > cfg.data.duration_days {
            return Err(Error::config(format!(
                "{name} window {:?} must be increasing and inside 0..{} days",
                w, cfg.data.duration_days
            )));
        }
    }
    let test = test_days(cfg);
    if test[0] < 0.0 || test[1] > cfg.data.duration_days {
        return Err(Error::config(format!(
            "test rollout spans days {:.2}..{:.2}, beyond the {} simulated days",
            test[0], test[1], cfg.data.duration_days
        )));
    }
    let (lo, hi) = range_of(&s.train_r);
    for (name, rs) in [("validation", &s.val_r), ("test", &s.test_r)] {
        if rs.is_empty() {
            continue;
        }
        let (a, b) = range_of(rs);
        if !(a < lo && b > hi) {
            return Err(Error::config(format!(
                "{name} r range [{a}, {b}] must extend strictly beyond the training range [{lo}, {hi}] on both sides"
            )));
        }
    }
    for r in &s.train_r {
        if s.test_r.contains(r) && overlaps(s.train_days, test) {
            return Err(Error::config(format!("test window overlaps the training window for r = {r}")));
        }
        if s.val_r.contains(r) && overlaps(s.train_days, s.val_days) {
            return Err(Error::config(format!("validation window overlaps the training window for r = {r}")));
        }
    }
    Ok(())
}

/// Every distinct `r` the config references, in train, val, test order.
pub fn all_r(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &r in cfg.split.train_r.iter().chain(&cfg.split.val_r).chain(&cfg.split.test_r) {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

fn day_window(cfg: &ExperimentConfig, days: [f64; 2], n_t: usize) -> Result<(usize, usize)> {
    let a = cfg.data.index_of_day(days[0]);
    let b = (cfg.data.index_of_day(days[1]) + 1).min(n_t);
    if a + 1 >= b {
        return Err(Error::config(format!("day window {days:?} holds fewer than 2 outputs")));
    }
    Ok((a, b))
}

pub fn split_dataset(sets: &[SnapshotSet], cfg: &ExperimentConfig) -> Result<SplitData> {
    check_split(cfg)?;
    let find = |r: f64| {
        sets.iter()
            .find(|s| s.r == r)
            .ok_or_else(|| Error::config(format!("no snapshot set for r = {r}")))
    };
    let take = |rs: &[f64], days: [f64; 2]| -> Result<Vec<SnapshotSet>> {
        rs.iter()
            .map(|&r| {
                let set = find(r)?;
                let (a, b) = day_window(cfg, days, set.n_t())?;
                slice_set(set, a, b)
            })
            .collect()
    };
    let train = take(&cfg.split.train_r, cfg.split.train_days)?;
    let val = take(&cfg.split.val_r, cfg.split.val_days)?;
    let test_start = cfg.data.index_of_day(cfg.split.test_start_day);
    let needed = test_start + cfg.protocol.horizon * cfg.protocol.long_factor + 1;
    let test = cfg
        .split
        .test_r
        .iter()
        .map(|&r| {
            let set = find(r)?;
            if set.n_t() < needed {
                return Err(Error::config(format!(
                    "test set r = {r} has {} outputs, rollout needs {needed}",
                    set.n_t()
                )));
            }
            Ok(set.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitData { train, val, test, test_start })
}
