use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Mlp;
use super::MlpGrads;
use crate::error::{Error, Result};

/// Adam hyperparameters. `weight_decay > 0` turns the update into AdamW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub const DEFAULT_ADAMW_DECAY: f64 = 1e-4;

    pub fn adamw() -> Self {
        Self {
            weight_decay: Self::DEFAULT_ADAMW_DECAY,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    AdamW,
}

impl OptimizerKind {
    pub fn config(self) -> AdamConfig {
        match self {
            OptimizerKind::Adam => AdamConfig::default(),
            OptimizerKind::AdamW => AdamConfig::adamw(),
        }
    }
}

/// First/second moment buffers, one per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub lr: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(block_sizes: &[usize], lr: f64, config: AdamConfig) -> Self {
        Self {
            config,
            lr,
            step: 0,
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Sizes the state to match `params`.
    pub fn for_params(params: &[&[f64]], lr: f64, config: AdamConfig) -> Self {
        let sizes: Vec<usize> = params.iter().map(|b| b.len()).collect();
        Self::new(&sizes, lr, config)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// One bias-corrected Adam(W) update.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam state has {} blocks, got {} parameter and {} gradient blocks",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (b, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[b].len() || g.len() != self.m[b].len() {
                return Err(Error::shape(format!("adam block {b} size mismatch")));
            }
        }
        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let lr = self.lr;
        for (b, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[b];
            let v = &mut self.v[b];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                if weight_decay > 0.0 {
                    p[i] -= lr * weight_decay * p[i];
                }
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
) -> Result<()> {
    state.step(params, grads)
}

/// Reduce-on-plateau learning-rate schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub patience: usize,
    pub factor: f64,
    pub floor: f64,
    pub best: f64,
    pub since_improvement: usize,
}

impl PlateauSchedule {
    pub const DEFAULT_FLOOR: f64 = 1e-7;

    pub fn new(lr: f64, patience: usize, factor: f64) -> Result<Self> {
        Self::with_floor(lr, patience, factor, Self::DEFAULT_FLOOR)
    }

    pub fn with_floor(lr: f64, patience: usize, factor: f64, floor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor < 1.0) {
            return Err(Error::argument(format!("plateau factor {factor} not in (0,1)")));
        }
        if patience == 0 {
            return Err(Error::argument("plateau patience must be at least 1"));
        }
        if !(lr > 0.0) || floor < 0.0 {
            return Err(Error::argument("learning rates must be positive"));
        }
        Ok(Self {
            lr: lr.max(floor),
            patience,
            factor,
            floor,
            best: f64::INFINITY,
            since_improvement: 0,
        })
    }

    pub fn update(&mut self, metric: f64) -> Result<f64> {
        if metric.is_nan() {
            return Err(Error::argument("plateau schedule received a NaN metric"));
        }
        if metric < self.best {
            self.best = metric;
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
            if self.since_improvement >= self.patience {
                self.lr = (self.lr * self.factor).max(self.floor);
                self.since_improvement = 0;
            }
        }
        Ok(self.lr)
    }
}

pub fn plateau_update(mut sched: PlateauSchedule, metric: f64) -> Result<PlateauSchedule> {
    sched.update(metric)?;
    Ok(sched)
}

/// Weight penalty kind. Biases are never penalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegKind {
    L1,
    L2,
    None,
}

impl RegKind {
    pub const ALL: [RegKind; 3] = [RegKind::L1, RegKind::L2, RegKind::None];

    pub fn name(self) -> &'static str {
        match self {
            RegKind::L1 => "l1",
            RegKind::L2 => "l2",
            RegKind::None => "none",
        }
    }
}

impl fmt::Display for RegKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown regularizer `{s}`")))
    }
}

/// Penalty kind plus strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub kind: RegKind,
    pub lambda: f64,
}

impl Regularizer {
    pub const NONE: Regularizer = Regularizer {
        kind: RegKind::None,
        lambda: 0.0,
    };

    pub fn penalty(&self, net: &Mlp) -> Result<f64> {
        regularization_penalty(net, self.kind, self.lambda)
    }

    pub fn add_gradient(&self, net: &Mlp, grads: &mut MlpGrads) {
        let lambda = self.lambda;
        if lambda == 0.0 {
            return;
        }
        for (layer, g) in net.layers().iter().zip(grads.layers.iter_mut()) {
            let gw = g.weights.as_mut_slice();
            for (gi, &w) in gw.iter_mut().zip(layer.weights.as_slice()) {
                match self.kind {
                    RegKind::L1 => *gi += lambda * sign(w),
                    RegKind::L2 => *gi += 2.0 * lambda * w,
                    RegKind::None => {}
                }
            }
        }
    }
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn regularization_penalty(net: &Mlp, kind: RegKind, lambda: f64) -> Result<f64> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(Error::argument(format!("regularization strength {lambda} < 0")));
    }
    let weights = net.layers().iter().flat_map(|l| l.weights.as_slice());
    Ok(match kind {
        RegKind::L1 => lambda * weights.map(|w| w.abs()).sum::<f64>(),
        RegKind::L2 => lambda * weights.map(|w| w * w).sum::<f64>(),
        RegKind::None => 0.0,
    })
}
