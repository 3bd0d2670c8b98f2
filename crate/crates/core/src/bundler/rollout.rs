use serde::{Deserialize, Serialize};

use super::bundles::bc_window;
use crate::error::{ensure_len, Error, Result};
use crate::latentae::TrainedAutoencoder;
use crate::opnet::{mitonet_forward, BaselineModel, MitonetModel};

/// What an emulator sees at the start of one autoregressive round.
#[derive(Debug, Clone, Copy)]
pub struct WindowInput<'a> {
    /// Absolute output index of `state`.
    pub anchor: usize,
    pub state: &'a [f64],
    /// Per series, the values at `anchor+1 ..= anchor+τ` (model `τ`).
    pub bc: &'a [Vec<f64>],
    pub r: f64,
}

/// Anything that maps a state to its next `n_beta` states.
pub trait Emulator {
    fn tau(&self) -> usize;

    /// Whether states are autoencoder latents.
    fn is_latent(&self) -> bool;

    /// Predictions at leads `1..=n_beta`.
    fn predict(&self, input: &WindowInput<'_>, n_beta: usize) -> Result<Vec<Vec<f64>>>;
}

impl Emulator for MitonetModel {
    fn tau(&self) -> usize {
        self.tau
    }

    fn is_latent(&self) -> bool {
        true
    }

    fn predict(&self, input: &WindowInput<'_>, n_beta: usize) -> Result<Vec<Vec<f64>>> {
        (1..=n_beta)
            .map(|b| {
                let bc: Vec<f64> = input.bc.iter().map(|s| s[b - 1]).collect();
                mitonet_forward(self, input.state, &bc, input.r, b as f64)
            })
            .collect()
    }
}

impl Emulator for BaselineModel {
    fn tau(&self) -> usize {
        self.tau
    }

    fn is_latent(&self) -> bool {
        self.variant.is_latent()
    }

    fn predict(&self, input: &WindowInput<'_>, n_beta: usize) -> Result<Vec<Vec<f64>>> {
        (1..=n_beta)
            .map(|b| BaselineModel::predict(self, input.state, input.bc, input.r, b as f64))
            .collect()
    }
}

/// Looks up ground-truth states by absolute index.
#[derive(Debug, Clone)]
pub struct OracleEmulator {
    pub truth: Vec<Vec<f64>>,
    pub tau: usize,
    pub latent: bool,
}

impl Emulator for OracleEmulator {
    fn tau(&self) -> usize {
        self.tau
    }

    fn is_latent(&self) -> bool {
        self.latent
    }

    fn predict(&self, input: &WindowInput<'_>, n_beta: usize) -> Result<Vec<Vec<f64>>> {
        (1..=n_beta)
            .map(|b| {
                self.truth
                    .get(input.anchor + b)
                    .cloned()
                    .ok_or_else(|| Error::argument("oracle trajectory too short"))
            })
            .collect()
    }
}

/// Persistence: every prediction equals the current state.
#[derive(Debug, Clone)]
pub struct IdentityEmulator {
    pub tau: usize,
    pub latent: bool,
}

impl Emulator for IdentityEmulator {
    fn tau(&self) -> usize {
        self.tau
    }

    fn is_latent(&self) -> bool {
        self.latent
    }

    fn predict(&self, input: &WindowInput<'_>, n_beta: usize) -> Result<Vec<Vec<f64>>> {
        Ok(vec![input.state.to_vec(); n_beta])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RolloutIc {
    /// Physical field; encoded first for latent emulators.
    Physical(Vec<f64>),
    /// A state already in the emulator's own space.
    State(Vec<f64>),
    /// The zero latent vector.
    ZeroLatent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub horizon: usize,
    pub tau_infer: usize,
    /// Decode and re-encode each handed-off latent state.
    pub reencode: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    /// Predicted latents (`horizon` columns); empty for physical emulators.
    pub latent: Vec<Vec<f64>>,
    /// Predicted fields at `start+1 ..= start+horizon`.
    pub physical: Vec<Vec<f64>>,
    pub model_calls: usize,
}

/// Autoregressive rollout from absolute index `start`.
///
/// Each round predicts leads `1..=τ_infer` (fewer in a final partial round)
/// and adopts the last one as the next state.
pub fn rollout<E: Emulator + ?Sized>(
    model: &E,
    ae: Option<&TrainedAutoencoder>,
    ic: RolloutIc,
    bc_series: &[Vec<f64>],
    start: usize,
    r: f64,
    cfg: &RolloutConfig,
) -> Result<RolloutResult> {
    let tau = model.tau();
    if cfg.tau_infer == 0 || cfg.tau_infer > tau {
        return Err(Error::argument(format!(
            "inference window {} must be in 1..={tau}",
            cfg.tau_infer
        )));
    }
    for s in bc_series {
        if s.len() < start + cfg.horizon + 1 {
            return Err(Error::argument(format!(
                "boundary series has {} values, rollout needs {}",
                s.len(),
                start + cfg.horizon + 1
            )));
        }
    }
    let latent = model.is_latent();
    let ae = match (latent, ae) {
        (true, None) => return Err(Error::argument("latent emulator needs an autoencoder")),
        (true, Some(a)) => Some(a),
        (false, _) => None,
    };
    let mut state = match (ic, ae) {
        (RolloutIc::Physical(f), Some(a)) => a.encode(&f)?,
        (RolloutIc::Physical(f), None) | (RolloutIc::State(f), _) => f,
        (RolloutIc::ZeroLatent, Some(a)) => vec![0.0; a.n_r()],
        (RolloutIc::ZeroLatent, None) => {
            return Err(Error::argument("zero-latent start needs a latent emulator"))
        }
    };
    if let Some(a) = ae {
        ensure_len("initial latent", state.len(), a.n_r())?;
    }

    let mut states = Vec::with_capacity(cfg.horizon);
    let mut calls = 0;
    let mut anchor = start;
    while states.len() < cfg.horizon {
        let n_beta = cfg.tau_infer.min(cfg.horizon - states.len());
        let window = bc_window(bc_series, anchor, tau);
        let input = WindowInput {
            anchor,
            state: &state,
            bc: &window,
            r,
        };
        let preds = model.predict(&input, n_beta)?;
        calls += 1;
        ensure_len("emulator output count", preds.len(), n_beta)?;
        for (b, p) in preds.iter().enumerate() {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!(
                    "non-finite prediction at rollout step {}",
                    anchor + b + 1 - start
                )));
            }
        }
        state = preds[n_beta - 1].clone();
        if let (true, Some(a)) = (cfg.reencode, ae) {
            state = a.encode(&a.decode(&state)?)?;
        }
        states.extend(preds);
        anchor += n_beta;
    }

    Ok(match ae {
        Some(a) => RolloutResult {
            physical: a.decode_all(&states)?,
            latent: states,
            model_calls: calls,
        },
        None => RolloutResult {
            latent: Vec::new(),
            physical: states,
            model_calls: calls,
        },
    })
}
