use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One harmonic tidal constituent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    /// Amplitude (m).
    pub amplitude: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Phase (rad).
    pub phase: f64,
}

impl Constituent {
    pub fn from_period_hours(amplitude: f64, period_hours: f64, phase: f64) -> Self {
        Self {
            amplitude,
            omega: 2.0 * PI / (period_hours * 3600.0),
            phase,
        }
    }
}

/// Standard periods (hours) of the principal constituents.
pub mod periods {
    pub const M2: f64 = 12.420_601;
    pub const S2: f64 = 12.0;
    pub const N2: f64 = 12.658_348;
    pub const O1: f64 = 25.819_342;
    pub const K1: f64 = 23.934_470;
}

/// Harmonic elevation forcing at the open boundary, linearly ramped from rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidalForcing {
    pub constituents: Vec<Constituent>,
    pub ramp_days: f64,
}

impl TidalForcing {
    pub fn new(constituents: Vec<Constituent>, ramp_days: f64) -> Result<Self> {
        if ramp_days < 0.0 || !ramp_days.is_finite() {
            return Err(Error::argument(format!("ramp duration {ramp_days} < 0")));
        }
        if let Some(c) = constituents
            .iter()
            .find(|c| c.amplitude < 0.0 || !c.amplitude.is_finite() || !c.omega.is_finite())
        {
            return Err(Error::argument(format!(
                "invalid constituent amplitude {}",
                c.amplitude
            )));
        }
        Ok(Self {
            constituents,
            ramp_days,
        })
    }

    /// Two-constituent (M2, K1) forcing used by the toy channel.
    pub fn toy() -> Self {
        Self {
            constituents: vec![
                Constituent::from_period_hours(0.5, periods::M2, 0.0),
                Constituent::from_period_hours(0.2, periods::K1, 0.7),
            ],
            ramp_days: 2.0,
        }
    }

    pub fn ramp(&self, t_seconds: f64) -> f64 {
        let ramp_s = self.ramp_days * 86_400.0;
        if ramp_s <= 0.0 {
            1.0
        } else {
            (t_seconds / ramp_s).clamp(0.0, 1.0)
        }
    }

    pub fn elevation(&self, t_seconds: f64) -> f64 {
        let ramp = self.ramp(t_seconds);
        if ramp == 0.0 {
            return 0.0;
        }
        ramp * self
            .constituents
            .iter()
            .map(|c| c.amplitude * (c.omega * t_seconds - c.phase).cos())
            .sum::<f64>()
    }
}

pub fn tidal_elevation(forcing: &TidalForcing, t_seconds: f64) -> f64 {
    forcing.elevation(t_seconds)
}

/// Piecewise-linear time series with knots in hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub hours: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(hours: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if hours.is_empty() || hours.len() != values.len() {
            return Err(Error::argument("series needs matching, nonempty knots and values"));
        }
        if hours.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::argument("series knots must be strictly increasing"));
        }
        Ok(Self { hours, values })
    }

    pub fn covers(&self, start_hours: f64, end_hours: f64) -> bool {
        self.hours[0] <= start_hours && *self.hours.last().unwrap() >= end_hours
    }

    pub fn eval(&self, t_hours: f64) -> f64 {
        let h = &self.hours;
        if t_hours <= h[0] {
            return self.values[0];
        }
        let last = h.len() - 1;
        if t_hours >= h[last] {
            return self.values[last];
        }
        let k = h.partition_point(|&x| x <= t_hours) - 1;
        let w = (t_hours - h[k]) / (h[k + 1] - h[k]);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }
}

/// Upstream discharge and downstream stage for the riverine scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiverForcing {
    /// Inflow discharge per unit width (m²/s).
    pub discharge: PiecewiseLinear,
    /// Downstream free-surface elevation (m).
    pub stage: PiecewiseLinear,
}

impl RiverForcing {
    pub fn new(discharge: PiecewiseLinear, stage: PiecewiseLinear) -> Result<Self> {
        if discharge.values.iter().any(|&q| q < 0.0) {
            return Err(Error::argument("discharge must be non-negative"));
        }
        Ok(Self { discharge, stage })
    }

    /// Synthetic multi-peak hydrograph spanning `days`.
    pub fn toy(days: f64) -> Self {
        let n = (days * 2.0).ceil() as usize + 1;
        let hours: Vec<f64> = (0..n).map(|k| k as f64 * 12.0).collect();
        let q = hours
            .iter()
            .map(|&t| {
                let d = t / 24.0;
                2.0 + 1.5 * (-((d - 12.0) / 3.0).powi(2)).exp()
                    + 2.5 * (-((d - 32.0) / 4.0).powi(2)).exp()
                    + 1.0 * (-((d - 48.0) / 2.5).powi(2)).exp()
            })
            .collect();
        let stage = hours
            .iter()
            .map(|&t| 0.3 * (2.0 * PI * t / (24.0 * 20.0)).sin())
            .collect();
        Self {
            discharge: PiecewiseLinear {
                hours: hours.clone(),
                values: q,
            },
            stage: PiecewiseLinear {
                hours,
                values: stage,
            },
        }
    }
}
