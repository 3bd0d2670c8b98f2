//! Temporal bundling, operator training and autoregressive rollout.

mod bundles;
mod export;
mod rollout;
mod train;

pub use bundles::{bc_window, make_bundles, subtrajectory_count, BundledSample};
pub use export::{export_rollout, RolloutMeta};
pub use rollout::{
    rollout, Emulator, IdentityEmulator, OracleEmulator, RolloutConfig, RolloutIc, RolloutResult,
    WindowInput,
};
pub use train::{
    baseline_samples, fit_scaling, mitonet_samples, train_baseline, train_operator, Trajectory,
};
