//! Evaluation protocols and the end-to-end driver.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pipeline::Pipeline;
use super::report::{export_report, AeEntry, LossSummary, ProbeSeries, ReportEntry, RolloutTiming, RunReport};
use super::ExperimentConfig;
use crate::bundler::{rollout, Emulator, RolloutConfig, RolloutIc};
use crate::error::{Error, Result};
use crate::latentae::TrainedAutoencoder;
use crate::metrics::{mean, MetricReport};
use crate::numkit::seeded_rng;
use crate::opnet::Variant;
use crate::swegen::SnapshotSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// MITONet hotstart from the test start, base and extended windows.
    Evaluate,
    /// MITONet against every configured baseline.
    Compare,
    /// One MITONet per look-forward window.
    Lookforward,
    /// Rest-field IC with one-step rounds, next to the matching hotstart.
    Coldstart,
    /// Short rollouts from seeded random ICs.
    HotstartSegments,
    /// Autoencoder reconstruction only.
    ZeroHorizon,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [
        Protocol::Evaluate,
        Protocol::Compare,
        Protocol::Lookforward,
        Protocol::Coldstart,
        Protocol::HotstartSegments,
        Protocol::ZeroHorizon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Evaluate => "evaluate",
            Protocol::Compare => "compare",
            Protocol::Lookforward => "lookforward",
            Protocol::Coldstart => "coldstart",
            Protocol::HotstartSegments => "hotstart-segments",
            Protocol::ZeroHorizon => "zero-horizon",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown protocol `{s}`")))
    }
}

/// A finished rollout with its truth, before it is cut into report windows.
struct Evaluated {
    model: String,
    variable: String,
    r: f64,
    tau: usize,
    tau_infer: usize,
    start: usize,
    truth: Vec<Vec<f64>>,
    prediction: Vec<Vec<f64>>,
    model_calls: usize,
}

impl Evaluated {
    /// Report entry over the first `steps` predicted columns.
    fn window(&self, protocol: &str, window: &str, steps: usize, probes: &[usize]) -> Result<ReportEntry> {
        let (truth, pred) = (&self.truth[..steps], &self.prediction[..steps]);
        Ok(ReportEntry {
            protocol: protocol.to_string(),
            model: self.model.clone(),
            variable: self.variable.clone(),
            r: self.r,
            window: window.to_string(),
            tau: self.tau,
            tau_infer: self.tau_infer,
            start: self.start,
            horizon: steps,
            model_calls: steps.div_ceil(self.tau_infer),
            metrics: MetricReport::compute(truth, pred)?,
            probes: probes
                .iter()
                .map(|&node| ProbeSeries {
                    node,
                    truth: truth.iter().map(|c| c[node]).collect(),
                    prediction: pred.iter().map(|c| c[node]).collect(),
                })
                .collect(),
        })
    }
}

struct Runner<'a> {
    pipe: &'a mut Pipeline,
    report: &'a mut RunReport,
}

impl Runner<'_> {
    #[allow(clippy::too_many_arguments)]
    fn roll<E: Emulator>(
        &mut self,
        model: &E,
        name: &str,
        var: &str,
        set: &SnapshotSet,
        ic: RolloutIc,
        start: usize,
        horizon: usize,
        tau_infer: usize,
    ) -> Result<Evaluated> {
        let ae = self.pipe.autoencoder(var)?.clone();
        let cfg = RolloutConfig { horizon, tau_infer, reencode: false };
        let t0 = Instant::now();
        let out = rollout(model, Some(&ae), ic, &set.bc_series, start, set.r, &cfg)?;
        let secs = t0.elapsed().as_secs_f64();
        let key = format!("{name} {var} r={} start={start} horizon={horizon} tau_infer={tau_infer}", set.r);
        let gen = self.pipe.generator_seconds_per_step(set.r).map(|s| s * horizon as f64);
        self.report.rollout_timings.push(RolloutTiming::new(key, secs, gen));
        Ok(Evaluated {
            model: name.to_string(),
            variable: var.to_string(),
            r: set.r,
            tau: model.tau(),
            tau_infer,
            start,
            truth: set.columns(var, start + 1, start + 1 + horizon)?,
            prediction: out.physical,
            model_calls: out.model_calls,
        })
    }

    fn truth_ic(set: &SnapshotSet, var: &str, start: usize) -> Result<RolloutIc> {
        Ok(RolloutIc::Physical(set.columns(var, start, start + 1)?.remove(0)))
    }

    fn push(&mut self, e: ReportEntry) {
        self.report.entries.push(e);
    }

    fn probes(&self) -> Vec<usize> {
        self.pipe.cfg.protocol.probes.clone()
    }

    /// Rollouts of `model` from the test start, cut into base and long windows.
    fn hotstart_windows<E: Emulator>(&mut self, protocol: &str, model: &E, name: &str, var: &str) -> Result<()> {
        let p = self.pipe.cfg.protocol.clone();
        let start = self.pipe.split.test_start;
        let tau_infer = self.pipe.cfg.operator.tau_infer.min(model.tau());
        let probes = self.probes();
        for set in self.pipe.split.test.clone() {
            let ic = Self::truth_ic(&set, var, start)?;
            let ev = self.roll(model, name, var, &set, ic, start, p.horizon * p.long_factor, tau_infer)?;
            self.push(ev.window(protocol, "base", p.horizon, &probes)?);
            if p.long_factor > 1 {
                self.push(ev.window(protocol, "long", p.horizon * p.long_factor, &probes)?);
            }
            debug_assert_eq!(ev.model_calls, (p.horizon * p.long_factor).div_ceil(tau_infer));
        }
        Ok(())
    }

    fn evaluate(&mut self) -> Result<()> {
        let tau = self.pipe.cfg.operator.tau;
        for var in self.pipe.cfg.data.variables.clone() {
            let model = self.pipe.mitonet(&var, tau)?.clone();
            self.hotstart_windows("evaluate", &model, "MITONet", &var)?;
        }
        Ok(())
    }

    fn compare(&mut self) -> Result<()> {
        let tau = self.pipe.cfg.operator.tau;
        for var in self.pipe.cfg.protocol.variables.clone() {
            let model = self.pipe.mitonet(&var, tau)?.clone();
            self.hotstart_windows("compare", &model, "MITONet", &var)?;
            for variant in self.pipe.cfg.baselines.variants.clone() {
                if variant == Variant::Mitonet {
                    continue;
                }
                let model = self.pipe.baseline(variant, &var)?.clone();
                self.hotstart_windows("compare", &model, &variant.to_string(), &var)?;
            }
        }
        Ok(())
    }

    fn lookforward(&mut self) -> Result<()> {
        let p = self.pipe.cfg.protocol.clone();
        let start = self.pipe.split.test_start;
        let probes = self.probes();
        for var in p.variables.clone() {
            for &tau in &p.lookforward_taus {
                let model = self.pipe.mitonet(&var, tau)?.clone();
                for set in self.pipe.split.test.clone() {
                    let ic = Self::truth_ic(&set, &var, start)?;
                    let ev = self.roll(&model, "MITONet", &var, &set, ic, start, p.horizon, tau)?;
                    self.push(ev.window("lookforward", &format!("tau{tau}"), p.horizon, &probes)?);
                }
            }
        }
        Ok(())
    }

    fn coldstart(&mut self) -> Result<()> {
        let p = self.pipe.cfg.protocol.clone();
        let tau = self.pipe.cfg.operator.tau;
        let start = self.pipe.cfg.data.index_of_day(p.coldstart_day);
        let rest = self.pipe.cfg.data.scenario()?.initial_state(&self.pipe.channel)?;
        let probes = self.probes();
        for var in self.pipe.cfg.data.variables.clone() {
            let model = self.pipe.mitonet(&var, tau)?.clone();
            let field = match var.as_str() {
                "H" => rest.h.clone(),
                _ => rest.u.clone(),
            };
            for set in self.pipe.split.test.clone() {
                let cold = self.roll(&model, "MITONet", &var, &set, RolloutIc::Physical(field.clone()), start, p.horizon, 1)?;
                self.push(cold.window("coldstart", "cold", p.horizon, &probes)?);
                let ic = Self::truth_ic(&set, &var, start)?;
                let hot = self.roll(&model, "MITONet", &var, &set, ic, start, p.horizon, 1)?;
                self.push(hot.window("coldstart", "hot", p.horizon, &probes)?);
            }
        }
        Ok(())
    }

    fn hotstart_segments(&mut self) -> Result<()> {
        let p = self.pipe.cfg.protocol.clone();
        let tau = self.pipe.cfg.operator.tau;
        let tau_infer = self.pipe.cfg.operator.tau_infer;
        let first = self.pipe.split.test_start;
        let probes = self.probes();
        let mut rng = seeded_rng(self.pipe.cfg.seed ^ 0x5e6);
        for var in self.pipe.cfg.data.variables.clone() {
            let model = self.pipe.mitonet(&var, tau)?.clone();
            for set in self.pipe.split.test.clone() {
                let last = set.n_t().checked_sub(p.segment_steps + 1).filter(|&l| l >= first).ok_or_else(|| {
                    Error::config(format!("segments of {} steps do not fit after the test start", p.segment_steps))
                })?;
                let mut starts: Vec<usize> = (0..p.segments).map(|_| rng.gen_range(first..=last)).collect();
                starts.sort_unstable();
                for (i, start) in starts.into_iter().enumerate() {
                    let ic = Self::truth_ic(&set, &var, start)?;
                    let ev = self.roll(&model, "MITONet", &var, &set, ic, start, p.segment_steps, tau_infer)?;
                    self.push(ev.window("hotstart-segments", &format!("seg{i}"), p.segment_steps, &probes)?);
                }
            }
        }
        Ok(())
    }

    /// Reconstruction of the base test window by each variable's autoencoder.
    fn autoencoder_metrics(&mut self) -> Result<()> {
        let start = self.pipe.split.test_start;
        let horizon = self.pipe.cfg.protocol.horizon;
        for var in self.pipe.cfg.data.variables.clone() {
            let ae: TrainedAutoencoder = self.pipe.autoencoder(&var)?.clone();
            for set in &self.pipe.split.test {
                let truth = set.columns(&var, start + 1, start + 1 + horizon)?;
                let recon = ae.decode_all(&ae.encode_all(&truth)?)?;
                self.report.autoencoders.push(AeEntry {
                    variable: var.clone(),
                    r: set.r,
                    start,
                    horizon,
                    metrics: MetricReport::compute(&truth, &recon)?,
                });
            }
        }
        Ok(())
    }

    fn run(&mut self, protocol: Protocol) -> Result<()> {
        match protocol {
            Protocol::Evaluate => self.evaluate(),
            Protocol::Compare => self.compare(),
            Protocol::Lookforward => self.lookforward(),
            Protocol::Coldstart => self.coldstart(),
            Protocol::HotstartSegments => self.hotstart_segments(),
            Protocol::ZeroHorizon => Ok(()),
        }
    }
}

fn finish(pipe: &Pipeline, report: &mut RunReport) -> Result<()> {
    report.split_hash = pipe.split_hash.clone();
    report.model_hashes = pipe.model_hashes()?;
    report.losses = pipe
        .histories
        .iter()
        .map(|(model, h)| LossSummary {
            model: model.clone(),
            epochs: h.train.len(),
            final_train: h.final_train(),
            best_val: h.best_val(),
        })
        .collect();
    report.stage_seconds = pipe.timings.clone();
    Ok(())
}

/// Runs `protocols` on a prepared pipeline, appending to `report`.
///
/// Reconstruction metrics are always included.
pub fn run_protocols(pipe: &mut Pipeline, report: &mut RunReport, protocols: &[Protocol]) -> Result<()> {
    let mut runner = Runner { pipe, report };
    runner.autoencoder_metrics().map_err(|e| e.in_stage("autoencoder-metrics"))?;
    for &p in protocols {
        let t0 = Instant::now();
        runner.run(p).map_err(|e| e.in_stage(p.name()))?;
        runner.pipe.timings.push((format!("protocol {p}"), t0.elapsed().as_secs_f64()));
    }
    finish(runner.pipe, runner.report)
}

/// Generates data, trains what the protocols need, evaluates, and writes the
/// report to `cfg.output_dir`. On failure the partial report is still written.
pub fn run_experiment(cfg: &ExperimentConfig, protocols: &[Protocol], cache: Option<&Path>) -> Result<RunReport> {
    let mut report = RunReport::empty(cfg.clone());
    let mut pipe = match Pipeline::prepare(cfg, cache) {
        Ok(p) => p,
        Err(e) => {
            let _ = export_report(&report, &cfg.output_dir);
            return Err(e);
        }
    };
    let result = run_protocols(&mut pipe, &mut report, protocols);
    if result.is_err() {
        let _ = finish(&pipe, &mut report);
    }
    export_report(&report, &cfg.output_dir)?;
    result.map(|_| report)
}

/// Mean cold and hot RMSE after the ramp and the cold RMSE trend over it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColdstartCheck {
    pub cold_steady: f64,
    pub hot_steady: f64,
    pub ramp_slope: f64,
}

impl ColdstartCheck {
    pub fn passes(&self) -> bool {
        self.cold_steady <= 2.0 * self.hot_steady && self.ramp_slope < 0.0
    }
}

/// Least-squares slope of `y` against its index.
pub fn linear_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = mean(y);
    let (num, den) = y.iter().enumerate().fold((0.0, 0.0), |(a, b), (i, &v)| {
        let dx = i as f64 - xm;
        (a + dx * (v - ym), b + dx * dx)
    });
    num / den
}

pub fn coldstart_check(report: &RunReport, variable: &str, r: f64) -> Option<ColdstartCheck> {
    let ramp = report.config.protocol.coldstart_ramp_steps;
    let cold = report.find("coldstart", "MITONet", variable, r, "cold")?;
    let hot = report.find("coldstart", "MITONet", variable, r, "hot")?;
    if cold.metrics.rmse.len() <= ramp || ramp < 2 {
        return None;
    }
    Some(ColdstartCheck {
        cold_steady: mean(&cold.metrics.rmse[ramp..]),
        hot_steady: mean(&hot.metrics.rmse[ramp..]),
        ramp_slope: linear_slope(&cold.metrics.rmse[..ramp]),
    })
}
