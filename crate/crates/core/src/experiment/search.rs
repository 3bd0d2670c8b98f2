//! Uniform random hyperparameter search.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::pipeline::Pipeline;
use super::ExperimentConfig;
use crate::bundler::train_operator;
use crate::error::{Error, Result};
use crate::latentae::train_autoencoder;
use crate::numkit::{seeded_rng, Activation, InitScheme, RegKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub activations: Vec<Activation>,
    /// Inclusive layer-count range.
    pub layers: [usize; 2],
    pub latent_dims: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub inits: Vec<InitScheme>,
    pub regularizers: Vec<RegKind>,
    pub lambdas: Vec<f64>,
    /// Inclusive range of the operator width factor.
    pub width_factor: [usize; 2],
    /// Inclusive range of the operator encoder width factor.
    pub encoder_factor: [usize; 2],
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            activations: Activation::SEARCHABLE.to_vec(),
            layers: [2, 5],
            latent_dims: vec![4, 6, 8, 12, 16],
            batch_sizes: vec![16, 32, 64, 128],
            learning_rates: vec![1e-4, 5e-4, 1e-3, 2e-3, 5e-3],
            inits: InitScheme::ALL.to_vec(),
            regularizers: RegKind::ALL.to_vec(),
            lambdas: vec![1e-6, 1e-5, 1e-4],
            width_factor: [2, 7],
            encoder_factor: [1, 5],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self, n_s: usize) -> Result<()> {
        let empty = self.activations.is_empty()
            || self.latent_dims.is_empty()
            || self.batch_sizes.is_empty()
            || self.learning_rates.is_empty()
            || self.inits.is_empty()
            || self.regularizers.is_empty()
            || self.lambdas.is_empty();
        if empty {
            return Err(Error::config("every search dimension needs at least one choice"));
        }
        for (name, [lo, hi], min) in [
            ("layers", self.layers, 2),
            ("width_factor", self.width_factor, 1),
            ("encoder_factor", self.encoder_factor, 1),
        ] {
            if lo < min || lo > hi {
                return Err(Error::config(format!("{name} range [{lo}, {hi}] is invalid")));
            }
        }
        if self.latent_dims.iter().any(|&d| d == 0 || d >= n_s) {
            return Err(Error::config(format!("latent dimensions must lie in 1..{n_s}")));
        }
        if self.batch_sizes.contains(&0) || self.learning_rates.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::config("batch sizes and learning rates must be positive"));
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0)) {
            return Err(Error::config("regularization strengths must be non-negative"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SearchPoint {
        let pick = |v: &[usize], rng: &mut R| *v.choose(rng).unwrap();
        SearchPoint {
            activation: *self.activations.choose(rng).unwrap(),
            layers: rng.gen_range(self.layers[0]..=self.layers[1]),
            latent_dim: pick(&self.latent_dims, rng),
            batch_size: pick(&self.batch_sizes, rng),
            lr: *self.learning_rates.choose(rng).unwrap(),
            init: *self.inits.choose(rng).unwrap(),
            regularizer: *self.regularizers.choose(rng).unwrap(),
            lambda: *self.lambdas.choose(rng).unwrap(),
            width_factor: rng.gen_range(self.width_factor[0]..=self.width_factor[1]),
            encoder_factor: rng.gen_range(self.encoder_factor[0]..=self.encoder_factor[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchTarget {
    Autoencoder,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub activation: Activation,
    pub layers: usize,
    pub latent_dim: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub init: InitScheme,
    pub regularizer: RegKind,
    pub lambda: f64,
    pub width_factor: usize,
    pub encoder_factor: usize,
}

impl SearchPoint {
    /// Writes the point into the section `target` trains.
    pub fn apply(&self, cfg: &mut ExperimentConfig, target: SearchTarget) {
        let train = match target {
            SearchTarget::Autoencoder => {
                let ae = &mut cfg.autoencoder;
                ae.activation = self.activation;
                ae.layers = self.layers;
                ae.n_r = self.latent_dim;
                ae.init = self.init;
                &mut ae.train
            }
            SearchTarget::Operator => {
                let op = &mut cfg.operator;
                op.activation = self.activation;
                op.layers = self.layers;
                op.init = self.init;
                op.width_factor = self.width_factor;
                op.encoder_factor = self.encoder_factor;
                &mut op.train
            }
        };
        train.batch_size = self.batch_size;
        train.lr = self.lr;
        train.regularizer = self.regularizer;
        train.lambda = self.lambda;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub point: SearchPoint,
    /// Best validation loss; infinite when training diverged.
    pub val_loss: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: ExperimentConfig,
    pub best_trial: usize,
    pub trials: Vec<Trial>,
}

impl SearchResult {
    pub fn trial_log_csv(&self) -> String {
        let mut s = String::from(
            "trial,activation,layers,latent_dim,batch_size,lr,init,regularizer,lambda,width_factor,encoder_factor,val_loss\n",
        );
        for t in &self.trials {
            let p = &t.point;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:e},{},{},{:e},{},{},{:e}",
                t.index,
                p.activation.name(),
                p.layers,
                p.latent_dim,
                p.batch_size,
                p.lr,
                p.init.name(),
                p.regularizer.name(),
                p.lambda,
                p.width_factor,
                p.encoder_factor,
                t.val_loss
            );
        }
        s
    }

    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let log = dir.join("trials.csv");
        std::fs::write(&log, self.trial_log_csv()).map_err(|e| Error::io(&log, e))?;
        let best = dir.join("best.toml");
        std::fs::write(&best, self.best.to_toml()?).map_err(|e| Error::io(&best, e))
    }
}

fn trial_loss(pipe: &mut Pipeline, cfg: &ExperimentConfig, target: SearchTarget, var: &str) -> Result<f64> {
    let hist = match target {
        SearchTarget::Autoencoder => {
            let cols = |sets: &[crate::swegen::SnapshotSet]| -> Result<Vec<Vec<f64>>> {
                let mut out = Vec::new();
                for s in sets {
                    out.extend(s.columns(var, 0, s.n_t())?);
                }
                Ok(out)
            };
            let ae_cfg = cfg.autoencoder.config(cfg.data.nodes, cfg.seed);
            train_autoencoder(&ae_cfg, &cols(&pipe.split.train)?, &cols(&pipe.split.val)?)?.1
        }
        SearchTarget::Operator => {
            let (train, val) = pipe.latent_trajectories(var)?;
            let n_r = train[0].states[0].len();
            let op = &cfg.operator;
            let op_cfg = op.config(n_r, cfg.data.scenario.bc_count(), op.tau, cfg.seed);
            train_operator(&op_cfg, &train, &val, op.train.regularizer(), &op.train.fit(cfg.seed))?.1
        }
    };
    hist.best_val().ok_or_else(|| Error::Divergence("no finite validation loss".into()))
}

/// Samples `trials` points, trains each for `budget_epochs`, ranks by
/// validation loss (ties go to the earlier trial).
///
/// Operator trials share the base config's autoencoder for `variable`.
pub fn random_search(
    base: &ExperimentConfig,
    space: &SearchSpace,
    target: SearchTarget,
    variable: &str,
    trials: usize,
    budget_epochs: usize,
    seed: u64,
) -> Result<SearchResult> {
    if trials == 0 {
        return Err(Error::argument("random search needs at least one trial"));
    }
    if budget_epochs == 0 {
        return Err(Error::argument("trial budget must be at least one epoch"));
    }
    space.validate(base.data.nodes)?;
    if base.split.val_r.is_empty() {
        return Err(Error::config("random search ranks by validation loss; no validation r configured"));
    }
    let mut pipe = Pipeline::prepare(base, None)?;
    let mut rng = seeded_rng(seed);
    let mut log = Vec::with_capacity(trials);
    let mut best: Option<(usize, f64, ExperimentConfig)> = None;
    for index in 0..trials {
        let point = space.sample(&mut rng);
        let mut cfg = base.clone();
        point.apply(&mut cfg, target);
        match target {
            SearchTarget::Autoencoder => cfg.autoencoder.train.epochs = budget_epochs,
            SearchTarget::Operator => cfg.operator.train.epochs = budget_epochs,
        }
        cfg.validate()?;
        let (val_loss, error) = match trial_loss(&mut pipe, &cfg, target, variable) {
            Ok(v) => (v, None),
            Err(e @ Error::Divergence(_)) => (f64::INFINITY, Some(e.to_string())),
            Err(e) => return Err(e.in_stage(&format!("search trial {index}"))),
        };
        if best.as_ref().map_or(true, |(_, b, _)| val_loss < *b) {
            best = Some((index, val_loss, cfg));
        }
        log.push(Trial { index, point, val_loss, error });
    }
    let (best_trial, _, best) = best.expect("at least one trial ran");
    Ok(SearchResult { best, best_trial, trials: log })
}
