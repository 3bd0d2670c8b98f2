use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Weight initialization scheme. Fan-in is the column count, fan-out the row count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    HeNormal,
    HeUniform,
    GlorotNormal,
    GlorotUniform,
}

impl InitScheme {
    pub const ALL: [InitScheme; 4] = [
        InitScheme::HeNormal,
        InitScheme::HeUniform,
        InitScheme::GlorotNormal,
        InitScheme::GlorotUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InitScheme::HeNormal => "he_normal",
            InitScheme::HeUniform => "he_uniform",
            InitScheme::GlorotNormal => "glorot_normal",
            InitScheme::GlorotUniform => "glorot_uniform",
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|i| i.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown initializer `{s}`")))
    }
}

/// Deterministic RNG used everywhere a seed is accepted.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn init_weights(rows: usize, cols: usize, scheme: InitScheme, seed: u64) -> Result<Matrix> {
    init_weights_with(rows, cols, scheme, &mut seeded_rng(seed))
}

pub fn init_weights_with<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    scheme: InitScheme,
    rng: &mut R,
) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::argument(format!(
            "cannot initialize a {rows}x{cols} matrix"
        )));
    }
    let fan_in = cols as f64;
    let fan_out = rows as f64;
    let n = rows * cols;
    let values: Vec<f64> = match scheme {
        InitScheme::HeNormal => sample_normal((2.0 / fan_in).sqrt(), n, rng),
        InitScheme::GlorotNormal => sample_normal((2.0 / (fan_in + fan_out)).sqrt(), n, rng),
        InitScheme::HeUniform => sample_uniform((6.0 / fan_in).sqrt(), n, rng),
        InitScheme::GlorotUniform => sample_uniform((6.0 / (fan_in + fan_out)).sqrt(), n, rng),
    };
    Matrix::from_vec(rows, cols, values)
}

fn sample_normal<R: Rng + ?Sized>(std: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let dist = Normal::new(0.0, std).expect("positive finite std");
    (0..n).map(|_| dist.sample(rng)).collect()
}

fn sample_uniform<R: Rng + ?Sized>(limit: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let dist = Uniform::new_inclusive(-limit, limit);
    (0..n).map(|_| dist.sample(rng)).collect()
}
