use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latentae::Normalizer;

/// Input/output conditioning stored with an operator model.
///
/// States (latent or physical) are z-scored per component, each boundary
/// series by its own mean and spread, and `r` by a min-max map of `ln r`
/// over the training range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorScaling {
    pub state: Normalizer,
    pub bc: Vec<Normalizer>,
    pub r_log: bool,
    pub r_shift: f64,
    pub r_scale: f64,
}

impl OperatorScaling {
    pub fn identity(state_dim: usize, bc_count: usize) -> Self {
        Self {
            state: Normalizer::identity(state_dim),
            bc: vec![Normalizer::identity(1); bc_count],
            r_log: false,
            r_shift: 0.0,
            r_scale: 1.0,
        }
    }

    /// `bc_series[s]` holds every training value of boundary series `s`.
    pub fn fit(states: &[Vec<f64>], bc_series: &[Vec<f64>], r_values: &[f64]) -> Result<Self> {
        let state = Normalizer::fit(states)?;
        let bc = bc_series
            .iter()
            .map(|s| Normalizer::fit(&s.iter().map(|&v| vec![v]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        if r_values.is_empty() || r_values.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::argument("friction values must be positive"));
        }
        let logs: Vec<f64> = r_values.iter().map(|r| r.ln()).collect();
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        Ok(Self {
            state,
            bc,
            r_log: true,
            r_shift: lo,
            r_scale: if span > 0.0 { span } else { 1.0 },
        })
    }

    pub fn scale_r(&self, r: f64) -> f64 {
        let v = if self.r_log { r.ln() } else { r };
        (v - self.r_shift) / self.r_scale
    }

    pub fn scale_bc(&self, series: usize, value: f64) -> f64 {
        let n = &self.bc[series];
        (value - n.shift[0]) / n.scale[0]
    }

    pub fn scale_state(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.state.normalize(s)
    }

    pub fn unscale_state(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.state.denormalize(s)
    }

    /// Flat blocks for serialization: state shift/scale, then each BC pair, then r.
    pub(crate) fn to_blocks(&self) -> Vec<Vec<f64>> {
        let mut blocks = vec![self.state.shift.clone(), self.state.scale.clone()];
        for n in &self.bc {
            blocks.push(n.shift.clone());
            blocks.push(n.scale.clone());
        }
        blocks.push(vec![
            if self.r_log { 1.0 } else { 0.0 },
            self.r_shift,
            self.r_scale,
        ]);
        blocks
    }

    pub(crate) fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        if blocks.len() < 3 || blocks.len() % 2 == 0 {
            return Err(Error::format("malformed scaling blocks"));
        }
        let state = Normalizer::new(blocks[0].clone(), blocks[1].clone())?;
        let bc = blocks[2..blocks.len() - 1]
            .chunks(2)
            .map(|c| Normalizer::new(c[0].clone(), c[1].clone()))
            .collect::<Result<Vec<_>>>()?;
        let r = &blocks[blocks.len() - 1];
        if r.len() != 3 || !(r[2] > 0.0) {
            return Err(Error::format("malformed friction scaling block"));
        }
        Ok(Self {
            state,
            bc,
            r_log: r[0] != 0.0,
            r_shift: r[1],
            r_scale: r[2],
        })
    }
}
