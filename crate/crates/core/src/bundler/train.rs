use rand::seq::index::sample;

use super::bundles::{bc_window, make_bundles};
use crate::error::{Error, Result};
use crate::numkit::{seeded_rng, FitConfig, LossHistory, Regularizer};
use crate::opnet::{
    train_samples, BaselineConfig, BaselineModel, BaselineSample, MitonetConfig, MitonetModel,
    OperatorSample, OperatorScaling,
};

/// One trajectory of states (latent or physical columns) with its forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    /// One series per boundary, aligned with `states`.
    pub bc: Vec<Vec<f64>>,
    pub r: f64,
}

/// Scaling statistics over every state, boundary value and `r` in `trajs`.
pub fn fit_scaling(trajs: &[Trajectory]) -> Result<OperatorScaling> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::argument("no training trajectories"))?;
    let states: Vec<Vec<f64>> = trajs.iter().flat_map(|t| t.states.iter().cloned()).collect();
    let bc: Vec<Vec<f64>> = (0..first.bc.len())
        .map(|s| trajs.iter().flat_map(|t| t.bc[s].iter().copied()).collect())
        .collect();
    let rs: Vec<f64> = trajs.iter().map(|t| t.r).collect();
    OperatorScaling::fit(&states, &bc, &rs)
}

pub fn mitonet_samples(model: &MitonetModel, trajs: &[Trajectory]) -> Result<Vec<OperatorSample>> {
    let mut out = Vec::new();
    for t in trajs {
        for b in make_bundles(&t.states, &t.bc, t.r, model.tau)? {
            let (branch_inputs, trunk_input) =
                model.scaled_inputs(&b.ic, &b.bc_inputs, b.r, b.beta as f64)?;
            out.push(OperatorSample {
                branch_inputs,
                trunk_input,
                target: model.scaling.scale_state(&b.target)?,
            });
        }
    }
    Ok(out)
}

/// Fits scaling on `train`, builds the model and trains it on teacher-forced bundles.
pub fn train_operator(
    cfg: &MitonetConfig,
    train: &[Trajectory],
    val: &[Trajectory],
    reg: Regularizer,
    fit: &FitConfig,
) -> Result<(MitonetModel, LossHistory)> {
    let mut model = MitonetModel::new(cfg, fit_scaling(train)?)?;
    let train_s = mitonet_samples(&model, train)?;
    let val_s = mitonet_samples(&model, val)?;
    let history = train_samples(&mut model, &train_s, &val_s, reg, fit)?;
    Ok((model, history))
}

/// Baseline samples; physical variants draw `nodes_per_sample` random nodes
/// per sample (all nodes when it is 0 or exceeds `N_s`).
pub fn baseline_samples(
    model: &BaselineModel,
    trajs: &[Trajectory],
    nodes_per_sample: usize,
    seed: u64,
) -> Result<Vec<BaselineSample>> {
    let mut rng = seeded_rng(seed);
    let n_s = model.state_dim();
    let mut out = Vec::new();
    for t in trajs {
        for b in make_bundles(&t.states, &t.bc, t.r, model.tau)? {
            let window = bc_window(&t.bc, b.anchor, model.tau);
            let branch_inputs = model.scaled_inputs(&b.ic, &window, b.r)?;
            let lead = b.beta as f64 / model.tau as f64;
            let scaled = model.scaling.scale_state(&b.target)?;
            let (nodes, target) = if !model.is_physical() {
                (Vec::new(), scaled)
            } else if nodes_per_sample == 0 || nodes_per_sample >= n_s {
                ((0..n_s).collect(), scaled)
            } else {
                let mut nodes = sample(&mut rng, n_s, nodes_per_sample).into_vec();
                nodes.sort_unstable();
                let target = nodes.iter().map(|&i| scaled[i]).collect();
                (nodes, target)
            };
            out.push(BaselineSample {
                branch_inputs,
                lead,
                nodes,
                target,
            });
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn train_baseline(
    cfg: &BaselineConfig,
    coords: Vec<f64>,
    train: &[Trajectory],
    val: &[Trajectory],
    reg: Regularizer,
    fit: &FitConfig,
    nodes_per_sample: usize,
) -> Result<(BaselineModel, LossHistory)> {
    let mut model = BaselineModel::new(cfg, fit_scaling(train)?, coords)?;
    let train_s = baseline_samples(&model, train, nodes_per_sample, fit.seed)?;
    let val_s = baseline_samples(&model, val, nodes_per_sample, fit.seed.wrapping_add(1))?;
    let history = train_samples(&mut model, &train_s, &val_s, reg, fit)?;
    Ok((model, history))
}
