use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{seeded_rng, AdamState, GradBlocks, OptimizerKind, Parameterized, PlateauSchedule};
use crate::error::{Error, Result};

/// Mini-batch training settings shared by every network in the crate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub patience: usize,
    pub factor: f64,
    pub min_lr: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            patience: 100,
            factor: 0.9,
            min_lr: PlateauSchedule::DEFAULT_FLOOR,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub val: Vec<f64>,
    pub lr: Vec<f64>,
}

impl LossHistory {
    pub fn final_train(&self) -> Option<f64> {
        self.train.last().copied()
    }

    pub fn best_val(&self) -> Option<f64> {
        self.val.iter().copied().reduce(f64::min)
    }
}

/// A differentiable objective over an indexed training set.
pub trait BatchObjective<M> {
    type Grads: GradBlocks;

    fn n_train(&self) -> usize;

    /// Mean loss over `batch` and the gradient of that mean.
    fn batch_loss_grad(&self, model: &M, batch: &[usize]) -> Result<(f64, Self::Grads)>;

    /// Validation loss, or `None` when there is no validation data.
    fn val_loss(&self, model: &M) -> Result<Option<f64>>;
}

/// Shuffled mini-batch Adam(W) with a reduce-on-plateau schedule.
///
/// The schedule monitors validation loss when available and the epoch-mean
/// training loss otherwise.
pub fn fit<M, O>(model: &mut M, objective: &O, cfg: &FitConfig) -> Result<LossHistory>
where
    M: Parameterized,
    O: BatchObjective<M>,
{
    cfg.validate()?;
    let n = objective.n_train();
    if n == 0 {
        return Err(Error::argument("training set is empty"));
    }
    let mut adam = AdamState::for_params(&model.param_blocks(), cfg.lr, cfg.optimizer.config());
    let mut sched = PlateauSchedule::with_floor(cfg.lr, cfg.patience, cfg.factor, cfg.min_lr)?;
    let mut rng = seeded_rng(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = LossHistory::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = objective.batch_loss_grad(model, batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            loss_sum += loss * batch.len() as f64;
            adam.lr = sched.lr;
            adam.step(&mut model.param_blocks_mut(), &grads.grad_blocks())?;
        }
        let train = loss_sum / n as f64;
        history.train.push(train);
        let monitored = match objective.val_loss(model)? {
            Some(v) => {
                if !v.is_finite() {
                    return Err(Error::Divergence(format!(
                        "non-finite validation loss at epoch {epoch}"
                    )));
                }
                history.val.push(v);
                v
            }
            None => train,
        };
        history.lr.push(sched.lr);
        sched.update(monitored)?;
    }
    Ok(history)
}
