use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

/// Per-component affine standardization `(x − shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn new(shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        ensure_len("normalizer scale", scale.len(), shift.len())?;
        if scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::argument("normalizer scales must be positive and finite"));
        }
        if shift.iter().any(|s| !s.is_finite()) {
            return Err(Error::argument("normalizer shifts must be finite"));
        }
        Ok(Self { shift, scale })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and population standard deviation per component. Components with
    /// no spread get unit scale.
    pub fn fit(samples: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::argument("cannot fit normalization on an empty set"));
        };
        let dim = first.len();
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            ensure_len("sample", s.len(), dim)?;
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 * m.abs().max(1.0) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self::new(mean, scale)
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("normalizer input", x.len(), self.dim())?;
        Ok(x.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn denormalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("normalizer input", x.len(), self.dim())?;
        Ok(x.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, m), s)| v * s + m)
            .collect())
    }
}
