use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::forcing::{RiverForcing, TidalForcing};
use super::snapshot::{ScenarioKind, SnapshotSet};
use super::solver::{swe_step, Boundary, BoundaryValues, Channel1D, SweState};
use crate::error::{Error, Result};
use crate::numkit::{seeded_rng, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    /// Elevation forcing at node 0, wall at the last node.
    Tidal(TidalForcing),
    /// Discharge at node 0, stage at the last node.
    Riverine(RiverForcing),
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::Tidal(_) => ScenarioKind::Tidal,
            Scenario::Riverine(_) => ScenarioKind::Riverine,
        }
    }

    pub fn boundary_values(&self, t_seconds: f64) -> BoundaryValues {
        match self {
            Scenario::Tidal(f) => BoundaryValues {
                upstream: Boundary::Elevation(f.elevation(t_seconds)),
                downstream: Boundary::Wall,
            },
            Scenario::Riverine(f) => {
                let hours = t_seconds / 3600.0;
                BoundaryValues {
                    upstream: Boundary::Discharge(f.discharge.eval(hours)),
                    downstream: Boundary::Elevation(f.stage.eval(hours)),
                }
            }
        }
    }

    /// Boundary series values at `t_seconds`, in scenario order.
    pub fn bc_sample(&self, t_seconds: f64) -> Vec<f64> {
        match self {
            Scenario::Tidal(f) => vec![f.elevation(t_seconds)],
            Scenario::Riverine(f) => {
                let hours = t_seconds / 3600.0;
                vec![f.discharge.eval(hours), f.stage.eval(hours)]
            }
        }
    }

    /// State the generator starts from: rest for tidal runs, uniform stage and
    /// discharge for riverine runs.
    pub fn initial_state(&self, channel: &Channel1D) -> Result<SweState> {
        match self {
            Scenario::Tidal(_) => Ok(SweState::rest(channel)),
            Scenario::Riverine(f) => {
                let stage = f.stage.eval(0.0);
                let q = f.discharge.eval(0.0);
                let zeta = vec![stage; channel.nodes()];
                let u = channel.depth().iter().map(|b| q / (b + stage)).collect();
                SweState::new(channel, zeta, u)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub duration_hours: f64,
    pub solver_dt_s: f64,
    pub output_dt_hours: f64,
    /// Leading spin-up window dropped from the output.
    pub discard_hours: f64,
    /// Amplitude (m) of a smooth random free-surface perturbation added to the
    /// initial state; zero starts from the scenario's rest state.
    pub ic_perturbation: f64,
}

impl SimConfig {
    /// 25 days at 60 s solver steps, output every 30 minutes.
    pub fn toy() -> Self {
        Self {
            duration_hours: 25.0 * 24.0,
            solver_dt_s: 60.0,
            output_dt_hours: 0.5,
            discard_hours: 0.0,
            ic_perturbation: 0.0,
        }
    }

    fn steps_per_output(&self) -> Result<usize> {
        if !(self.solver_dt_s > 0.0) || !(self.output_dt_hours > 0.0) {
            return Err(Error::argument("time steps must be positive"));
        }
        let ratio = self.output_dt_hours * 3600.0 / self.solver_dt_s;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::argument(format!(
                "output interval {} h is not an integer multiple of the solver step {} s",
                self.output_dt_hours, self.solver_dt_s
            )));
        }
        Ok(k as usize)
    }
}

/// Runs the solver and records `H` and `U` at every output time.
pub fn simulate(
    channel: &Channel1D,
    scenario: &Scenario,
    r: f64,
    cfg: &SimConfig,
    seed: u64,
) -> Result<SnapshotSet> {
    if !(r > 0.0) {
        return Err(Error::argument(format!("bottom friction r = {r} must be > 0")));
    }
    if cfg.duration_hours < 0.0 || cfg.discard_hours < 0.0 {
        return Err(Error::argument("durations must be non-negative"));
    }
    let per_output = cfg.steps_per_output()?;
    let total_outputs = (cfg.duration_hours / cfg.output_dt_hours + 1e-9).floor() as usize + 1;
    let skip = (cfg.discard_hours / cfg.output_dt_hours).round() as usize;
    if skip >= total_outputs {
        return Err(Error::argument("discard window swallows the whole simulation"));
    }
    if let Scenario::Riverine(f) = scenario {
        if !f.discharge.covers(0.0, cfg.duration_hours) || !f.stage.covers(0.0, cfg.duration_hours) {
            return Err(Error::argument("river forcing does not cover the simulation window"));
        }
    }

    let mut state = scenario.initial_state(channel)?;
    if cfg.ic_perturbation > 0.0 {
        state = perturb(channel, &state, cfg.ic_perturbation, seed)?;
    }

    let n_s = channel.nodes();
    let n_t = total_outputs - skip;
    let mut h = Matrix::zeros(n_s, n_t);
    let mut u = Matrix::zeros(n_s, n_t);
    let mut bc_series = vec![Vec::with_capacity(n_t); scenario.kind().bc_count()];
    let mut step = 0usize;
    for out in 0..total_outputs {
        if out > 0 {
            for _ in 0..per_output {
                let t = step as f64 * cfg.solver_dt_s;
                let bc = scenario.boundary_values(t);
                state = swe_step(&state, channel, &bc, r, cfg.solver_dt_s, step)?;
                step += 1;
            }
        }
        if out >= skip {
            let j = out - skip;
            for i in 0..n_s {
                h.set(i, j, state.h[i]);
                u.set(i, j, state.u[i]);
            }
            let t = step as f64 * cfg.solver_dt_s;
            for (series, v) in bc_series.iter_mut().zip(scenario.bc_sample(t)) {
                series.push(v);
            }
        }
    }

    Ok(SnapshotSet {
        scenario: scenario.kind(),
        dt_hours: cfg.output_dt_hours,
        r,
        variables: vec![("H".to_string(), h), ("U".to_string(), u)],
        bc_series,
    })
}

fn perturb(channel: &Channel1D, state: &SweState, amplitude: f64, seed: u64) -> Result<SweState> {
    let mut rng = seeded_rng(seed);
    let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = channel.unit_coordinates();
    let zeta = state
        .zeta
        .iter()
        .zip(&x)
        .map(|(z, &xi)| {
            z + amplitude
                * coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, c)| c * ((m + 1) as f64 * PI * xi).cos())
                    .sum::<f64>()
                / 3.0
        })
        .collect();
    SweState::new(channel, zeta, state.u.clone())
}
