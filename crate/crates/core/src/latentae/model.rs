use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Normalizer;
use crate::error::{ensure_len, Error, Result};
use crate::numkit::io::{
    expect_magic, read_f64_block, read_mlp, read_u32, write_f64_block, write_magic, write_mlp,
    write_u32,
};
use crate::numkit::{
    seeded_rng, Activation, FitConfig, GradBlocks, InitScheme, Mlp, MlpGrads, Parameterized,
    Regularizer,
};

pub const AE_MAGIC: &[u8; 3] = b"AE1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub n_s: usize,
    pub n_r: usize,
    /// Layers in the encoder, including the one producing the latent vector.
    pub layers: usize,
    pub activation: Activation,
    /// Each hidden layer's width relative to the previous one.
    pub width_factor: f64,
    pub init: InitScheme,
    pub regularizer: Regularizer,
    pub fit: FitConfig,
}

impl AutoencoderConfig {
    /// 64 → 32 → 16 → 8 with tanh hidden layers.
    pub fn toy(n_s: usize, n_r: usize) -> Self {
        Self {
            n_s,
            n_r,
            layers: 3,
            activation: Activation::Tanh,
            width_factor: 0.5,
            init: InitScheme::GlorotNormal,
            regularizer: Regularizer::NONE,
            fit: FitConfig {
                epochs: 300,
                batch_size: 32,
                lr: 2e-3,
                ..FitConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r == 0 || self.n_r >= self.n_s {
            return Err(Error::config(format!(
                "latent dimension {} must lie in 1..{}",
                self.n_r, self.n_s
            )));
        }
        if self.layers == 0 {
            return Err(Error::config("autoencoder needs at least one layer"));
        }
        if !(self.width_factor > 0.0 && self.width_factor <= 1.0) {
            return Err(Error::config("width factor must lie in (0, 1]"));
        }
        self.fit.validate()
    }

    /// Encoder widths from input to latent. Hidden widths never drop below N_r.
    pub fn encoder_widths(&self) -> Vec<usize> {
        let mut widths = vec![self.n_s];
        let mut w = self.n_s as f64;
        for _ in 1..self.layers {
            w *= self.width_factor;
            widths.push((w.round() as usize).max(self.n_r));
        }
        widths.push(self.n_r);
        widths
    }
}

/// Encoder/decoder pair with the normalization it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedAutoencoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub norm: Normalizer,
}

impl TrainedAutoencoder {
    pub fn new(encoder: Mlp, decoder: Mlp, norm: Normalizer) -> Result<Self> {
        if encoder.output_dim() != decoder.input_dim() {
            return Err(Error::shape(format!(
                "encoder emits {} values, decoder expects {}",
                encoder.output_dim(),
                decoder.input_dim()
            )));
        }
        if encoder.input_dim() != norm.dim() || decoder.output_dim() != norm.dim() {
            return Err(Error::shape("autoencoder ends do not match the normalization dimension"));
        }
        Ok(Self {
            encoder,
            decoder,
            norm,
        })
    }

    /// Untrained networks built from `cfg` with the given normalization.
    pub fn random(cfg: &AutoencoderConfig, norm: Normalizer) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seeded_rng(cfg.fit.seed);
        let widths = cfg.encoder_widths();
        let mut acts = vec![cfg.activation; widths.len() - 1];
        *acts.last_mut().unwrap() = Activation::Identity;
        let encoder = Mlp::random(&widths, &acts, cfg.init, &mut rng)?;
        let rev: Vec<usize> = widths.iter().rev().copied().collect();
        let decoder = Mlp::random(&rev, &acts, cfg.init, &mut rng)?;
        Self::new(encoder, decoder, norm)
    }

    pub fn n_s(&self) -> usize {
        self.norm.dim()
    }

    pub fn n_r(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encode(&self, s: &[f64]) -> Result<Vec<f64>> {
        ensure_len("snapshot", s.len(), self.n_s())?;
        self.encoder.predict(&self.norm.normalize(s)?)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        ensure_len("latent vector", z.len(), self.n_r())?;
        self.norm.denormalize(&self.decoder.predict(z)?)
    }

    pub fn reconstruct(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(s)?)
    }

    /// Encodes each column of an `N_s × N_t` matrix.
    pub fn encode_all(&self, columns: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        columns.iter().map(|c| self.encode(c)).collect()
    }

    pub fn decode_all(&self, latents: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        latents.iter().map(|z| self.decode(z)).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(buf)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        write_magic(w, AE_MAGIC)?;
        write_u32(w, self.n_r())?;
        write_mlp(w, &self.encoder)?;
        write_mlp(w, &self.decoder)?;
        write_f64_block(w, &self.norm.shift)?;
        write_f64_block(w, &self.norm.scale)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, AE_MAGIC)?;
        let n_r = read_u32(r)?;
        let encoder = read_mlp(r)?;
        let decoder = read_mlp(r)?;
        let shift = read_f64_block(r)?;
        let scale = read_f64_block(r)?;
        let norm = Normalizer::new(shift, scale).map_err(|e| Error::format(e.to_string()))?;
        let ae =
            Self::new(encoder, decoder, norm).map_err(|e| Error::format(e.to_string()))?;
        if ae.n_r() != n_r {
            return Err(Error::format(format!(
                "header latent dimension {n_r} disagrees with encoder output {}",
                ae.n_r()
            )));
        }
        Ok(ae)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let ae = Self::read(&mut cur)?;
        if !cur.is_empty() {
            return Err(Error::format("trailing bytes after autoencoder data"));
        }
        Ok(ae)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

impl Parameterized for TrainedAutoencoder {
    fn param_blocks(&self) -> Vec<&[f64]> {
        let mut blocks = self.encoder.param_blocks();
        blocks.extend(self.decoder.param_blocks());
        blocks
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks = self.encoder.param_blocks_mut();
        blocks.extend(self.decoder.param_blocks_mut());
        blocks
    }
}

pub struct AeGrads {
    pub encoder: MlpGrads,
    pub decoder: MlpGrads,
}

impl GradBlocks for AeGrads {
    fn grad_blocks(&self) -> Vec<&[f64]> {
        let mut blocks = self.encoder.grad_blocks();
        blocks.extend(self.decoder.grad_blocks());
        blocks
    }
}

/// Mean over samples of the mean squared node error, in physical units.
pub fn reconstruction_mse(ae: &TrainedAutoencoder, data: &[Vec<f64>]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::argument("reconstruction error of an empty set"));
    }
    let mut total = 0.0;
    for s in data {
        let rec = ae.reconstruct(s)?;
        total += s.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / s.len() as f64;
    }
    Ok(total / data.len() as f64)
}
