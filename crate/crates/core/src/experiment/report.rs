//! Run reports and their on-disk layout.
//!
//! Everything under the report directory except `timings.json` is a pure
//! function of config and seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    pub node: usize,
    pub truth: Vec<f64>,
    pub prediction: Vec<f64>,
}

/// One evaluated rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub protocol: String,
    pub model: String,
    pub variable: String,
    pub r: f64,
    pub window: String,
    pub tau: usize,
    pub tau_infer: usize,
    pub start: usize,
    pub horizon: usize,
    pub model_calls: usize,
    pub metrics: MetricReport,
    pub probes: Vec<ProbeSeries>,
}

impl ReportEntry {
    /// File stem unique within a report.
    pub fn key(&self) -> String {
        format!("{}_{}_{}_r{}_{}", self.protocol, self.model, self.variable, self.r, self.window)
    }
}

/// Autoencoder reconstruction of a test window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeEntry {
    pub variable: String,
    pub r: f64,
    pub start: usize,
    pub horizon: usize,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTiming {
    pub key: String,
    pub rollout_seconds: f64,
    /// Solver time for the same number of output steps.
    pub generator_seconds: Option<f64>,
    pub speedup: Option<f64>,
}

impl RolloutTiming {
    pub fn new(key: String, rollout_seconds: f64, generator_seconds: Option<f64>) -> Self {
        Self {
            key,
            rollout_seconds,
            generator_seconds,
            speedup: generator_seconds.map(|g| g / rollout_seconds.max(f64::MIN_POSITIVE)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub model: String,
    pub epochs: usize,
    pub final_train: Option<f64>,
    pub best_val: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub split_hash: String,
    pub model_hashes: Vec<(String, String)>,
    pub losses: Vec<LossSummary>,
    pub entries: Vec<ReportEntry>,
    pub autoencoders: Vec<AeEntry>,
    pub stage_seconds: Vec<(String, f64)>,
    pub rollout_timings: Vec<RolloutTiming>,
}

impl RunReport {
    pub fn empty(config: ExperimentConfig) -> Self {
        Self {
            config,
            split_hash: String::new(),
            model_hashes: Vec::new(),
            losses: Vec::new(),
            entries: Vec::new(),
            autoencoders: Vec::new(),
            stage_seconds: Vec::new(),
            rollout_timings: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.autoencoders.is_empty()
    }

    pub fn find(&self, protocol: &str, model: &str, variable: &str, r: f64, window: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| {
            e.protocol == protocol && e.model == model && e.variable == variable && e.r == r && e.window == window
        })
    }

    /// Whether every test `r` appears in at least one entry of `protocol`.
    pub fn covers_test_r(&self, protocol: &str) -> bool {
        self.config
            .split
            .test_r
            .iter()
            .all(|&r| self.entries.iter().any(|e| e.protocol == protocol && e.r == r))
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(
            "protocol,model,variable,r,window,tau,tau_infer,start,horizon,model_calls,acc,mean_rmse,mean_nrmse\n",
        );
        for e in &self.entries {
            let m = &e.metrics;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{:e},{:e},{:e}",
                e.protocol, e.model, e.variable, e.r, e.window, e.tau, e.tau_infer, e.start, e.horizon,
                e.model_calls, m.acc, m.mean_rmse, m.mean_nrmse
            );
        }
        s
    }

    pub fn autoencoder_csv(&self) -> String {
        let mut s = String::from("variable,r,start,horizon,acc,mean_rmse,mean_nrmse\n");
        for a in &self.autoencoders {
            let m = &a.metrics;
            let _ = writeln!(
                s,
                "{},{},{},{},{:e},{:e},{:e}",
                a.variable, a.r, a.start, a.horizon, m.acc, m.mean_rmse, m.mean_nrmse
            );
        }
        s
    }

    /// Probe truth/prediction pairs, one row per probe and step.
    pub fn parity_csv(&self) -> String {
        let mut s = String::from("protocol,model,variable,r,window,node,step,truth,prediction\n");
        for e in &self.entries {
            for p in &e.probes {
                for (j, (t, y)) in p.truth.iter().zip(&p.prediction).enumerate() {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{t:e},{y:e}",
                        e.protocol, e.model, e.variable, e.r, e.window, p.node, j + 1
                    );
                }
            }
        }
        s
    }

    /// Long-format per-step RMSE, ready for distribution plots.
    pub fn rmse_samples_csv(&self) -> String {
        let mut s = String::from("protocol,model,variable,r,window,step,rmse\n");
        for e in &self.entries {
            for (j, v) in e.metrics.rmse.iter().enumerate() {
                let _ = writeln!(s, "{},{},{},{},{},{},{v:e}", e.protocol, e.model, e.variable, e.r, e.window, j + 1);
            }
        }
        s
    }

    /// Mean RMSE pivoted to one row per (model, variable, r) and one column per window.
    pub fn table_csv(&self, protocol: &str) -> Option<String> {
        let rows: Vec<&ReportEntry> = self.entries.iter().filter(|e| e.protocol == protocol).collect();
        if rows.is_empty() {
            return None;
        }
        let mut windows: Vec<&str> = Vec::new();
        let mut keys: Vec<(&str, &str, f64)> = Vec::new();
        for e in &rows {
            if !windows.contains(&e.window.as_str()) {
                windows.push(&e.window);
            }
            let k = (e.model.as_str(), e.variable.as_str(), e.r);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let mut s = String::from("model,variable,r");
        for w in &windows {
            let _ = write!(s, ",{w}");
        }
        s.push('\n');
        for (model, var, r) in keys {
            let _ = write!(s, "{model},{var},{r}");
            for w in &windows {
                match rows.iter().find(|e| e.model == model && e.variable == var && e.r == r && e.window == *w) {
                    Some(e) => {
                        let _ = write!(s, ",{:e}", e.metrics.mean_rmse);
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        Some(s)
    }

    /// Deterministic JSON summary (no wall-clock fields, no series).
    pub fn summary_json(&self) -> Result<String> {
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|e| {
                serde_json::json!({
                    "protocol": e.protocol, "model": e.model, "variable": e.variable, "r": e.r,
                    "window": e.window, "tau": e.tau, "tau_infer": e.tau_infer, "start": e.start,
                    "horizon": e.horizon, "model_calls": e.model_calls, "acc": e.metrics.acc,
                    "mean_rmse": e.metrics.mean_rmse, "mean_nrmse": e.metrics.mean_nrmse,
                })
            })
            .collect();
        let aes: Vec<_> = self
            .autoencoders
            .iter()
            .map(|a| {
                serde_json::json!({
                    "variable": a.variable, "r": a.r, "acc": a.metrics.acc,
                    "mean_rmse": a.metrics.mean_rmse, "mean_nrmse": a.metrics.mean_nrmse,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "seed": self.config.seed,
            "split_hash": self.split_hash,
            "model_hashes": self.model_hashes,
            "losses": self.losses,
            "entries": entries,
            "autoencoders": aes,
        }))
        .map_err(|e| Error::format(e.to_string()))
    }

    pub fn timings_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&serde_json::json!({
            "stages": self.stage_seconds,
            "rollouts": self.rollout_timings,
        }))
        .map_err(|e| Error::format(e.to_string()))
    }
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the report under `dir` and returns the files written.
///
/// An empty report produces `summary.json` alone.
pub fn export_report(report: &RunReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    write(dir, "summary.json", &report.summary_json()?, &mut out)?;
    if report.is_empty() {
        return Ok(out);
    }
    write(dir, "config.toml", &report.config.to_toml()?, &mut out)?;
    write(dir, "timings.json", &report.timings_json()?, &mut out)?;
    if !report.autoencoders.is_empty() {
        write(dir, "autoencoders.csv", &report.autoencoder_csv(), &mut out)?;
    }
    if !report.entries.is_empty() {
        write(dir, "summary.csv", &report.summary_csv(), &mut out)?;
        write(dir, "parity.csv", &report.parity_csv(), &mut out)?;
        write(dir, "rmse_samples.csv", &report.rmse_samples_csv(), &mut out)?;
        for e in &report.entries {
            write(dir, &format!("series/{}.csv", e.key()), &e.metrics.series_csv(), &mut out)?;
            write(dir, &format!("mae/{}.csv", e.key()), &e.metrics.mae_csv(), &mut out)?;
        }
        let mut protocols: Vec<&str> = Vec::new();
        for e in &report.entries {
            if !protocols.contains(&e.protocol.as_str()) {
                protocols.push(&e.protocol);
            }
        }
        for p in protocols {
            if let Some(t) = report.table_csv(p) {
                write(dir, &format!("table_{p}.csv"), &t, &mut out)?;
            }
        }
    }
    Ok(out)
}
