//! Per-variable MLP autoencoders mapping `N_s`-node snapshots to `N_r` latents.

mod model;
mod normalize;
mod train;

pub use model::{reconstruction_mse, AeGrads, AutoencoderConfig, TrainedAutoencoder, AE_MAGIC};
pub use normalize::Normalizer;
pub use train::{normalized_reconstruction_mse, train_autoencoder};
