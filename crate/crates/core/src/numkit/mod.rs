//! Numerical substrate: dense matrices, MLPs with tape-based reverse mode,
//! initializers, regularizers, Adam(W) and plateau scheduling.

mod activation;
mod init;
pub mod io;
mod matrix;
mod mlp;
mod optim;
mod train;

pub use activation::Activation;
pub use init::{init_weights, init_weights_with, seeded_rng, InitScheme};
pub use matrix::{axpy, dot, hadamard, Matrix};
pub use mlp::{
    mlp_backward, mlp_forward, Dense, DenseGrad, ForwardTape, GradBlocks, Mlp, MlpGrads,
    Parameterized,
};
pub use optim::{
    adam_step, plateau_update, regularization_penalty, AdamConfig, AdamState, OptimizerKind,
    PlateauSchedule, RegKind, Regularizer,
};
pub use train::{fit, BatchObjective, FitConfig, LossHistory};
