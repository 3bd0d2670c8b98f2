//! Data generation and model training, with an optional on-disk cache.
//!
//! Cached artifacts are keyed by a hash of every config section that
//! influences them, so a changed setting never reuses a stale file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::split::{all_r, split_dataset, SplitData};
use super::ExperimentConfig;
use crate::bundler::{train_baseline, train_operator, Trajectory};
use crate::error::{Error, Result};
use crate::latentae::{train_autoencoder, TrainedAutoencoder};
use crate::numkit::LossHistory;
use crate::opnet::{content_hash, BaselineModel, MitonetModel, Variant};
use crate::swegen::{load_snapshots, save_snapshots, simulate, Channel1D, SnapshotSet};

fn short_hash<T: Serialize>(parts: &T) -> String {
    let json = serde_json::to_vec(parts).expect("config sections serialize");
    content_hash(&json)[..12].to_string()
}

/// Generated snapshot sets with the solver wall time of each.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sets: Vec<SnapshotSet>,
    /// `None` when the set was loaded from cache.
    pub seconds: Vec<Option<f64>>,
}

fn data_path(cache: &Path, cfg: &ExperimentConfig, r: f64) -> PathBuf {
    cache.join("data").join(format!("{}_r{r}.swsnap", short_hash(&cfg.data)))
}

/// Simulates every `r` the config references, reusing cached runs.
pub fn generate(cfg: &ExperimentConfig, cache: Option<&Path>) -> Result<Dataset> {
    let channel = cfg.data.channel()?;
    let scenario = cfg.data.scenario()?;
    let sim = cfg.data.sim();
    let mut sets = Vec::new();
    let mut seconds = Vec::new();
    for (i, r) in all_r(cfg).into_iter().enumerate() {
        if let Some(path) = cache.map(|c| data_path(c, cfg, r)).filter(|p| p.exists()) {
            sets.push(load_snapshots(&path)?);
            seconds.push(None);
            continue;
        }
        let t0 = Instant::now();
        let set = simulate(&channel, &scenario, r, &sim, cfg.seed.wrapping_add(i as u64))?;
        seconds.push(Some(t0.elapsed().as_secs_f64()));
        if let Some(c) = cache {
            let path = data_path(c, cfg, r);
            std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| Error::io(&path, e))?;
            save_snapshots(&set, &path)?;
        }
        sets.push(set);
    }
    Ok(Dataset { sets, seconds })
}


/// Stateful driver: data, split, and lazily trained models.
pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub channel: Channel1D,
    pub dataset: Dataset,
    pub split: SplitData,
    pub split_hash: String,
    cache: Option<PathBuf>,
    aes: BTreeMap<String, TrainedAutoencoder>,
    mitonets: BTreeMap<(String, usize), MitonetModel>,
    baselines: BTreeMap<(String, Variant), BaselineModel>,
    /// Wall time per stage, in completion order.
    pub timings: Vec<(String, f64)>,
    /// Final training/validation loss per trained model.
    pub histories: Vec<(String, LossHistory)>,
}

impl Pipeline {
    pub fn prepare(cfg: &ExperimentConfig, cache: Option<&Path>) -> Result<Self> {
        cfg.validate()?;
        let t0 = Instant::now();
        let dataset = generate(cfg, cache).map_err(|e| e.in_stage("generate"))?;
        let split = split_dataset(&dataset.sets, cfg).map_err(|e| e.in_stage("split"))?;
        let split_hash = split.hash()?;
        Ok(Self {
            cfg: cfg.clone(),
            channel: cfg.data.channel()?,
            dataset,
            split,
            split_hash,
            cache: cache.map(Path::to_path_buf),
            aes: BTreeMap::new(),
            mitonets: BTreeMap::new(),
            baselines: BTreeMap::new(),
            timings: vec![("generate".into(), t0.elapsed().as_secs_f64())],
            histories: Vec::new(),
        })
    }

    pub fn bc_count(&self) -> usize {
        self.cfg.data.scenario.bc_count()
    }

    /// Solver seconds per output step for the set with friction `r`.
    pub fn generator_seconds_per_step(&self, r: f64) -> Option<f64> {
        let i = self.dataset.sets.iter().position(|s| s.r == r)?;
        let steps = self.dataset.sets[i].n_t().saturating_sub(1).max(1);
        self.dataset.seconds[i].map(|s| s / steps as f64)
    }

    fn model_path(&self, stem: &str, tag: &str) -> Option<PathBuf> {
        self.cache.as_ref().map(|c| c.join("models").join(format!("{stem}_{tag}.bin")))
    }

    fn ae_tag(&self) -> String {
        let c = &self.cfg;
        short_hash(&(&c.data, &c.split, &c.autoencoder, c.seed))
    }

    fn columns(sets: &[SnapshotSet], var: &str) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        for s in sets {
            out.extend(s.columns(var, 0, s.n_t())?);
        }
        Ok(out)
    }

    pub fn autoencoder(&mut self, var: &str) -> Result<&TrainedAutoencoder> {
        if !self.aes.contains_key(var) {
            let ae = self.train_ae(var).map_err(|e| e.in_stage(&format!("train-ae {var}")))?;
            self.aes.insert(var.to_string(), ae);
        }
        Ok(&self.aes[var])
    }

    fn train_ae(&mut self, var: &str) -> Result<TrainedAutoencoder> {
        let path = self.model_path(&format!("ae_{var}"), &self.ae_tag());
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            return TrainedAutoencoder::load(p);
        }
        let t0 = Instant::now();
        let train = Self::columns(&self.split.train, var)?;
        let val = Self::columns(&self.split.val, var)?;
        let cfg = self.cfg.autoencoder.config(self.channel.nodes(), self.cfg.seed);
        let (ae, hist) = train_autoencoder(&cfg, &train, &val)?;
        self.timings.push((format!("train-ae {var}"), t0.elapsed().as_secs_f64()));
        self.histories.push((format!("ae {var}"), hist));
        if let Some(p) = path {
            save_model(&p, |p| ae.save(p))?;
        }
        Ok(ae)
    }

    fn trajectories(sets: &[SnapshotSet], var: &str, ae: Option<&TrainedAutoencoder>) -> Result<Vec<Trajectory>> {
        sets.iter()
            .map(|s| {
                let cols = s.columns(var, 0, s.n_t())?;
                Ok(Trajectory {
                    states: match ae {
                        Some(ae) => ae.encode_all(&cols)?,
                        None => cols,
                    },
                    bc: s.bc_series.clone(),
                    r: s.r,
                })
            })
            .collect()
    }

    /// Latent train and validation trajectories of `var`.
    pub fn latent_trajectories(&mut self, var: &str) -> Result<(Vec<Trajectory>, Vec<Trajectory>)> {
        self.autoencoder(var)?;
        let ae = &self.aes[var];
        Ok((
            Self::trajectories(&self.split.train, var, Some(ae))?,
            Self::trajectories(&self.split.val, var, Some(ae))?,
        ))
    }

    pub fn mitonet(&mut self, var: &str, tau: usize) -> Result<&MitonetModel> {
        let key = (var.to_string(), tau);
        if !self.mitonets.contains_key(&key) {
            let m = self.train_mitonet(var, tau).map_err(|e| e.in_stage(&format!("train-op MITONet {var} tau={tau}")))?;
            self.mitonets.insert(key.clone(), m);
        }
        Ok(&self.mitonets[&key])
    }

    fn train_mitonet(&mut self, var: &str, tau: usize) -> Result<MitonetModel> {
        let c = &self.cfg;
        let tag = short_hash(&(&c.data, &c.split, &c.autoencoder, &c.operator, c.seed));
        let path = self.model_path(&format!("mitonet_{var}_tau{tau}"), &tag);
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            return MitonetModel::load(p);
        }
        let (train, val) = self.latent_trajectories(var)?;
        let t0 = Instant::now();
        let n_r = self.aes[var].n_r();
        let op = &self.cfg.operator;
        let cfg = op.config(n_r, self.bc_count(), tau, self.cfg.seed);
        let (model, hist) = train_operator(&cfg, &train, &val, op.train.regularizer(), &op.train.fit(self.cfg.seed))?;
        self.timings.push((format!("train-op MITONet {var} tau={tau}"), t0.elapsed().as_secs_f64()));
        self.histories.push((format!("MITONet {var} tau={tau}"), hist));
        if let Some(p) = path {
            save_model(&p, |p| model.save(p))?;
        }
        Ok(model)
    }

    pub fn baseline(&mut self, variant: Variant, var: &str) -> Result<&BaselineModel> {
        if variant == Variant::Mitonet {
            return Err(Error::argument("MITONet is not a baseline"));
        }
        let key = (var.to_string(), variant);
        if !self.baselines.contains_key(&key) {
            let m = self.train_baseline(variant, var).map_err(|e| e.in_stage(&format!("train-op {variant} {var}")))?;
            self.baselines.insert(key.clone(), m);
        }
        Ok(&self.baselines[&key])
    }

    fn train_baseline(&mut self, variant: Variant, var: &str) -> Result<BaselineModel> {
        let c = &self.cfg;
        let tau = c.operator.tau;
        let latent = variant == Variant::LDon;
        let tag = if latent {
            short_hash(&(&c.data, &c.split, &c.autoencoder, &c.baselines, tau, c.seed))
        } else {
            short_hash(&(&c.data, &c.split, &c.baselines, tau, c.seed))
        };
        let path = self.model_path(&format!("{}_{var}", variant.to_string().to_lowercase()), &tag);
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            return BaselineModel::load(p);
        }
        let (train, val) = if latent {
            self.latent_trajectories(var)?
        } else {
            (
                Self::trajectories(&self.split.train, var, None)?,
                Self::trajectories(&self.split.val, var, None)?,
            )
        };
        let t0 = Instant::now();
        let state_dim = train[0].states[0].len();
        let b = &self.cfg.baselines;
        let cfg = b.config(variant, state_dim, self.bc_count(), tau, self.cfg.seed);
        let nodes = if b.nodes_per_sample == 0 { state_dim } else { b.nodes_per_sample };
        let (model, hist) = train_baseline(
            &cfg,
            self.channel.unit_coordinates(),
            &train,
            &val,
            b.train.regularizer(),
            &b.train.fit(self.cfg.seed),
            nodes,
        )?;
        self.timings.push((format!("train-op {variant} {var}"), t0.elapsed().as_secs_f64()));
        self.histories.push((format!("{variant} {var}"), hist));
        if let Some(p) = path {
            save_model(&p, |p| model.save(p))?;
        }
        Ok(model)
    }

    /// Content hashes of every model trained or loaded so far.
    pub fn model_hashes(&self) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for (var, ae) in &self.aes {
            out.push((format!("ae {var}"), content_hash(&ae.to_bytes()?)));
        }
        for ((var, tau), m) in &self.mitonets {
            out.push((format!("MITONet {var} tau={tau}"), m.hash()?));
        }
        for ((var, variant), m) in &self.baselines {
            out.push((format!("{variant} {var}"), m.hash()?));
        }
        Ok(out)
    }
}

fn save_model(path: &Path, save: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save(path)
}
