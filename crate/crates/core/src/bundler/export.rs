use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::rollout::RolloutResult;
use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::swegen::{save_snapshots, ScenarioKind, SnapshotSet};

/// Run metadata written next to an exported rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutMeta {
    pub variable: String,
    pub model: String,
    pub r: f64,
    pub tau: usize,
    pub tau_infer: usize,
    pub start: usize,
    pub horizon: usize,
    pub seed: u64,
    pub model_hash: String,
    pub model_calls: usize,
}

/// Writes `<stem>.swsnap` and `<stem>.json`; returns both paths.
pub fn export_rollout(
    result: &RolloutResult,
    meta: &RolloutMeta,
    scenario: ScenarioKind,
    dt_hours: f64,
    bc_series: Vec<Vec<f64>>,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let field = Matrix::from_columns(&result.physical)?;
    let set = SnapshotSet {
        scenario,
        dt_hours,
        r: meta.r,
        variables: vec![(meta.variable.clone(), field)],
        bc_series,
    };
    let snap = dir.join(format!("{stem}.swsnap"));
    save_snapshots(&set, &snap)?;
    let side = dir.join(format!("{stem}.json"));
    let json = serde_json::to_string_pretty(meta).map_err(|e| Error::format(e.to_string()))?;
    std::fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
    Ok((snap, side))
}
