//! Experiment configuration, read from TOML.
//!
//! Every section has defaults matching the toy tidal setup, so a config file
//! only needs the keys it changes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::latentae::AutoencoderConfig;
use crate::numkit::{Activation, FitConfig, InitScheme, OptimizerKind, RegKind, Regularizer};
use crate::opnet::{BaselineConfig, MitonetConfig, Variant};
use crate::swegen::{
    periods, Channel1D, Constituent, RiverForcing, Scenario, ScenarioKind, SimConfig, TidalForcing,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub scenario: ScenarioKind,
    pub nodes: usize,
    pub length_km: f64,
    /// Still-water depth at the forced (first) node.
    pub depth_start_m: f64,
    /// Still-water depth at the last node.
    pub depth_end_m: f64,
    pub duration_days: f64,
    pub solver_dt_s: f64,
    pub output_dt_hours: f64,
    pub discard_hours: f64,
    pub ic_perturbation: f64,
    /// Tidal constituent amplitudes (m).
    pub m2_amplitude: f64,
    pub k1_amplitude: f64,
    pub ramp_days: f64,
    pub variables: Vec<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Tidal,
            nodes: 64,
            length_km: 60.0,
            depth_start_m: 10.0,
            depth_end_m: 2.0,
            duration_days: 25.0,
            solver_dt_s: 60.0,
            output_dt_hours: 0.5,
            discard_hours: 0.0,
            ic_perturbation: 0.0,
            m2_amplitude: 0.5,
            k1_amplitude: 0.2,
            ramp_days: 2.0,
            variables: vec!["H".into(), "U".into()],
        }
    }
}

impl DataSection {
    pub fn channel(&self) -> Result<Channel1D> {
        Channel1D::linear_slope(self.nodes, self.length_km * 1000.0, self.depth_start_m, self.depth_end_m)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(match self.scenario {
            ScenarioKind::Tidal => Scenario::Tidal(TidalForcing::new(
                vec![
                    Constituent::from_period_hours(self.m2_amplitude, periods::M2, 0.0),
                    Constituent::from_period_hours(self.k1_amplitude, periods::K1, 0.7),
                ],
                self.ramp_days,
            )?),
            ScenarioKind::Riverine => Scenario::Riverine(RiverForcing::toy(self.duration_days)),
        })
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            duration_hours: self.duration_days * 24.0,
            solver_dt_s: self.solver_dt_s,
            output_dt_hours: self.output_dt_hours,
            discard_hours: self.discard_hours,
            ic_perturbation: self.ic_perturbation,
        }
    }

    /// Output steps per day.
    pub fn steps_per_day(&self) -> f64 {
        24.0 / self.output_dt_hours
    }

    /// Output index of `day`, counted after the discard window.
    pub fn index_of_day(&self, day: f64) -> usize {
        ((day * 24.0 - self.discard_hours) / self.output_dt_hours).round().max(0.0) as usize
    }
}

/// Friction values per split and the day windows each split uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_r: Vec<f64>,
    pub val_r: Vec<f64>,
    pub test_r: Vec<f64>,
    pub train_days: [f64; 2],
    pub val_days: [f64; 2],
    /// Rollouts on test `r` start from the true state on this day.
    pub test_start_day: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train_r: vec![0.005, 0.01, 0.02],
            val_r: vec![0.004, 0.03],
            test_r: vec![0.003, 0.05],
            train_days: [3.0, 25.0],
            val_days: [5.0, 8.0],
            test_start_day: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub patience: usize,
    pub factor: f64,
    pub regularizer: RegKind,
    pub lambda: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            lr: 1e-3,
            optimizer: OptimizerKind::Adam,
            patience: 20,
            factor: 0.5,
            regularizer: RegKind::None,
            lambda: 0.0,
        }
    }
}

/// Keys given in a nested `train` table override the owning section's
/// defaults rather than the generic ones.
fn train_over<'de, D: Deserializer<'de>>(d: D, base: TrainSection) -> std::result::Result<TrainSection, D::Error> {
    use serde::de::Error as _;
    let patch = toml::Table::deserialize(d)?;
    let mut table = toml::Table::try_from(&base).map_err(D::Error::custom)?;
    table.extend(patch);
    table.try_into().map_err(D::Error::custom)
}

fn ae_train<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TrainSection, D::Error> {
    train_over(d, AutoencoderSection::default().train)
}

fn op_train<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TrainSection, D::Error> {
    train_over(d, OperatorSection::default().train)
}

fn baseline_train<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TrainSection, D::Error> {
    train_over(d, BaselineSection::default().train)
}

impl TrainSection {
    pub fn fit(&self, seed: u64) -> FitConfig {
        FitConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            optimizer: self.optimizer,
            patience: self.patience,
            factor: self.factor,
            seed,
            ..FitConfig::default()
        }
    }

    pub fn regularizer(&self) -> Regularizer {
        Regularizer {
            kind: self.regularizer,
            lambda: if self.regularizer == RegKind::None { 0.0 } else { self.lambda },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderSection {
    pub n_r: usize,
    pub layers: usize,
    pub activation: Activation,
    pub width_factor: f64,
    pub init: InitScheme,
    #[serde(deserialize_with = "ae_train")]
    pub train: TrainSection,
}

impl Default for AutoencoderSection {
    fn default() -> Self {
        Self {
            n_r: 8,
            layers: 3,
            activation: Activation::Tanh,
            width_factor: 0.5,
            init: InitScheme::GlorotNormal,
            train: TrainSection {
                epochs: 300,
                batch_size: 32,
                lr: 2e-3,
                patience: 100,
                factor: 0.9,
                ..TrainSection::default()
            },
        }
    }
}

impl AutoencoderSection {
    pub fn config(&self, n_s: usize, seed: u64) -> AutoencoderConfig {
        AutoencoderConfig {
            n_s,
            n_r: self.n_r,
            layers: self.layers,
            activation: self.activation,
            width_factor: self.width_factor,
            init: self.init,
            regularizer: self.train.regularizer(),
            fit: self.train.fit(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    pub tau: usize,
    pub tau_infer: usize,
    pub layers: usize,
    pub width_factor: usize,
    pub encoder_layers: usize,
    pub encoder_factor: usize,
    pub activation: Activation,
    pub output_activation: Activation,
    pub init: InitScheme,
    /// 0 disables the projection.
    pub projection_dim: usize,
    pub gate_final: bool,
    #[serde(deserialize_with = "op_train")]
    pub train: TrainSection,
}

impl Default for OperatorSection {
    fn default() -> Self {
        Self {
            tau: 5,
            tau_infer: 5,
            layers: 4,
            width_factor: 4,
            encoder_layers: 1,
            encoder_factor: 2,
            activation: Activation::Tanh,
            output_activation: Activation::Identity,
            init: InitScheme::GlorotNormal,
            projection_dim: 0,
            gate_final: false,
            train: TrainSection { epochs: 200, ..TrainSection::default() },
        }
    }
}

impl OperatorSection {
    pub fn config(&self, n_r: usize, bc_count: usize, tau: usize, seed: u64) -> MitonetConfig {
        MitonetConfig {
            n_r,
            bc_count,
            tau,
            layers: self.layers,
            width_factor: self.width_factor,
            encoder_layers: self.encoder_layers,
            encoder_factor: self.encoder_factor,
            activation: self.activation,
            output_activation: self.output_activation,
            init: self.init,
            projection_dim: (self.projection_dim > 0).then_some(self.projection_dim),
            gate_final: self.gate_final,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub variants: Vec<Variant>,
    pub layers: usize,
    pub width: usize,
    /// Fusion width of the physical-space variants.
    pub p: usize,
    pub activation: Activation,
    pub init: InitScheme,
    /// Random nodes per training sample; 0 uses every node.
    pub nodes_per_sample: usize,
    #[serde(deserialize_with = "baseline_train")]
    pub train: TrainSection,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            variants: vec![Variant::Don, Variant::MDon, Variant::LDon, Variant::MioNet],
            layers: 3,
            width: 32,
            p: 32,
            activation: Activation::Tanh,
            init: InitScheme::GlorotNormal,
            nodes_per_sample: 16,
            train: TrainSection::default(),
        }
    }
}

impl BaselineSection {
    pub fn config(&self, variant: Variant, state_dim: usize, bc_count: usize, tau: usize, seed: u64) -> BaselineConfig {
        BaselineConfig {
            variant,
            state_dim,
            bc_count,
            tau,
            layers: self.layers,
            width: self.width,
            p: if variant == Variant::LDon { state_dim } else { self.p },
            activation: self.activation,
            init: self.init,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    /// Base rollout horizon in output steps.
    pub horizon: usize,
    /// Extended horizon as a multiple of `horizon`.
    pub long_factor: usize,
    pub lookforward_taus: Vec<usize>,
    pub coldstart_day: f64,
    /// Steps after a cold start treated as spin-up.
    pub coldstart_ramp_steps: usize,
    pub segments: usize,
    pub segment_steps: usize,
    /// Variables the compare and look-forward protocols cover.
    pub variables: Vec<String>,
    /// Node indices whose series go to the parity output.
    pub probes: Vec<usize>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            horizon: 288,
            long_factor: 3,
            lookforward_taus: vec![5, 10, 15, 20],
            coldstart_day: 5.0,
            coldstart_ramp_steps: 96,
            segments: 4,
            segment_steps: 96,
            variables: vec!["H".into()],
            probes: vec![60, 32, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataSection,
    pub split: SplitSection,
    pub autoencoder: AutoencoderSection,
    pub operator: OperatorSection,
    pub baselines: BaselineSection,
    pub protocol: ProtocolSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/toy"),
            data: DataSection::default(),
            split: SplitSection::default(),
            autoencoder: AutoencoderSection::default(),
            operator: OperatorSection::default(),
            baselines: BaselineSection::default(),
            protocol: ProtocolSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.variables.is_empty() {
            return Err(Error::config("no state variables selected"));
        }
        if let Some(v) = d.variables.iter().find(|v| *v != "H" && *v != "U") {
            return Err(Error::config(format!("unknown variable `{v}`; expected H or U")));
        }
        if let Some(v) = self.protocol.variables.iter().find(|v| !d.variables.contains(v)) {
            return Err(Error::config(format!("protocol variable `{v}` is not generated")));
        }
        let o = &self.operator;
        if o.tau == 0 || o.tau_infer == 0 || o.tau_infer > o.tau {
            return Err(Error::config("need 1 <= tau_infer <= tau"));
        }
        let n_r = self.autoencoder.n_r;
        let bc = d.scenario.bc_count();
        self.autoencoder.config(d.nodes, self.seed).validate()?;
        self.operator.config(n_r, bc, o.tau, self.seed).validate()?;
        for t in [&self.autoencoder.train, &o.train, &self.baselines.train] {
            t.fit(self.seed).validate()?;
            if !(t.lambda >= 0.0) {
                return Err(Error::config(format!("regularization strength {} < 0", t.lambda)));
            }
        }
        for &v in self.baselines.variants.iter().filter(|&&v| v != Variant::Mitonet) {
            let dim = if v == Variant::LDon { n_r } else { d.nodes };
            self.baselines.config(v, dim, bc, o.tau, self.seed).validate()?;
        }
        let p = &self.protocol;
        if p.horizon == 0 || p.lookforward_taus.contains(&0) {
            return Err(Error::config("horizons and look-forward windows must be positive"));
        }
        if p.long_factor == 0 {
            return Err(Error::config("long_factor must be positive"));
        }
        if let Some(&n) = p.probes.iter().find(|&&n| n >= d.nodes) {
            return Err(Error::config(format!("probe node {n} outside 0..{}", d.nodes)));
        }
        super::split::check_split(self)
    }
}
