//! Latent-space multi-input temporal operator networks for parametric,
//! time-dependent PDE emulation, with a 1D shallow-water reference solver
//! that generates the training and evaluation data.
//!
//! Modules, bottom-up:
//!
//! - [`numkit`]: matrices, MLPs with reverse-mode gradients, Adam(W), schedules.
//! - [`swegen`]: 1D shallow-water channel solver and snapshot datasets.
//! - [`latentae`]: per-variable MLP autoencoders.
//! - [`opnet`]: the gated multi-branch operator network and DeepONet-family baselines.
//! - [`bundler`]: temporal bundling, operator training and autoregressive rollout.
//! - [`metrics`]: RMSE, NRMSE, MAE and ACC.
//! - [`experiment`]: configs, splits, protocols, random search and report export.

pub mod bundler;
pub mod error;
pub mod experiment;
pub mod latentae;
pub mod metrics;
pub mod numkit;
pub mod opnet;
pub mod swegen;

pub use error::{Error, Result};
