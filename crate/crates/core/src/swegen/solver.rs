//! Explicit finite-volume step for the 1D shallow-water equations.
//!
//! Cells coincide with nodes. Mass uses a Rusanov flux whose dissipation acts
//! on the free surface ζ rather than on H, so a flat surface over sloping
//! bathymetry produces no spurious flux. Momentum uses a Rusanov advective
//! flux, a centred surface-gradient pressure term and a semi-implicit
//! quadratic bottom friction `r·U·|U|/H`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;
pub const MAX_COURANT: f64 = 0.9;

/// Straight channel of equally spaced nodes with still-water depth `b` (positive down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel1D {
    depth: Vec<f64>,
    dx: f64,
}

impl Channel1D {
    pub fn new(depth: Vec<f64>, dx: f64) -> Result<Self> {
        if depth.len() < 3 {
            return Err(Error::argument(format!(
                "a channel needs at least 3 nodes, got {}",
                depth.len()
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::argument(format!("node spacing {dx} must be positive")));
        }
        if depth.iter().any(|b| !b.is_finite()) {
            return Err(Error::argument("bathymetry must be finite"));
        }
        Ok(Self { depth, dx })
    }

    /// Depth varies linearly from `open_depth` at node 0 to `closed_depth` at the last node.
    pub fn linear_slope(
        nodes: usize,
        length_m: f64,
        open_depth: f64,
        closed_depth: f64,
    ) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::argument("a channel needs at least 3 nodes"));
        }
        let depth = (0..nodes)
            .map(|i| {
                let s = i as f64 / (nodes - 1) as f64;
                open_depth + s * (closed_depth - open_depth)
            })
            .collect();
        Self::new(depth, length_m / (nodes - 1) as f64)
    }

    pub fn uniform(nodes: usize, length_m: f64, depth: f64) -> Result<Self> {
        Self::linear_slope(nodes, length_m, depth, depth)
    }

    /// Desk-scale tidal channel: 64 nodes over 60 km, 10 m at the open end to 2 m.
    pub fn toy_tidal() -> Self {
        Self::linear_slope(64, 60_000.0, 10.0, 2.0).expect("valid toy geometry")
    }

    /// Desk-scale river reach: 64 nodes over 60 km at a uniform 5 m.
    pub fn toy_riverine() -> Self {
        Self::uniform(64, 60_000.0, 5.0).expect("valid toy geometry")
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.depth.len()
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn depth(&self) -> &[f64] {
        &self.depth
    }

    /// Node coordinates normalized to [0, 1].
    pub fn unit_coordinates(&self) -> Vec<f64> {
        let n = self.nodes();
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }
}

/// Free-surface departure ζ, velocity U and total column H = ζ + b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweState {
    pub zeta: Vec<f64>,
    pub u: Vec<f64>,
    pub h: Vec<f64>,
}

impl SweState {
    pub fn new(channel: &Channel1D, zeta: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if zeta.len() != channel.nodes() || u.len() != channel.nodes() {
            return Err(Error::shape("state length does not match channel node count"));
        }
        let h = zeta.iter().zip(channel.depth()).map(|(z, b)| z + b).collect();
        let state = Self { zeta, u, h };
        state.check(0)?;
        Ok(state)
    }

    pub fn rest(channel: &Channel1D) -> Self {
        Self {
            zeta: vec![0.0; channel.nodes()],
            u: vec![0.0; channel.nodes()],
            h: channel.depth().to_vec(),
        }
    }

    fn check(&self, step: usize) -> Result<()> {
        for (i, (&h, &u)) in self.h.iter().zip(&self.u).enumerate() {
            if !h.is_finite() || !u.is_finite() {
                return Err(Error::SolverInstability {
                    node: i,
                    step,
                    reason: "non-finite state".into(),
                });
            }
            if h <= 0.0 {
                return Err(Error::SolverInstability {
                    node: i,
                    step,
                    reason: format!("water column H = {h} <= 0"),
                });
            }
        }
        Ok(())
    }

    /// Σ H_i Δx.
    pub fn mass(&self, channel: &Channel1D) -> f64 {
        self.h.iter().sum::<f64>() * channel.dx()
    }

    /// Σ ½ H_i U_i² Δx.
    pub fn kinetic_energy(&self, channel: &Channel1D) -> f64 {
        0.5 * self
            .h
            .iter()
            .zip(&self.u)
            .map(|(h, u)| h * u * u)
            .sum::<f64>()
            * channel.dx()
    }

    /// Σ ½ g ζ_i² Δx, relative to the still-water level.
    pub fn potential_energy(&self, channel: &Channel1D) -> f64 {
        0.5 * GRAVITY * self.zeta.iter().map(|z| z * z).sum::<f64>() * channel.dx()
    }
}

/// Boundary treatment at one channel end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// Zero normal flux (reflecting wall).
    Wall,
    /// Prescribed free-surface elevation (m).
    Elevation(f64),
    /// Prescribed discharge per unit width (m²/s), positive into the channel
    /// at the upstream end.
    Discharge(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryValues {
    pub upstream: Boundary,
    pub downstream: Boundary,
}

impl BoundaryValues {
    pub const CLOSED: BoundaryValues = BoundaryValues {
        upstream: Boundary::Wall,
        downstream: Boundary::Wall,
    };
}

#[derive(Clone, Copy)]
struct Cell {
    zeta: f64,
    h: f64,
    q: f64,
}

impl Cell {
    #[inline]
    fn u(&self) -> f64 {
        self.q / self.h
    }

    #[inline]
    fn speed(&self) -> f64 {
        self.u().abs() + (GRAVITY * self.h).sqrt()
    }
}

fn ghost(boundary: Boundary, inner: Cell, b: f64, outward_sign: f64) -> Cell {
    match boundary {
        Boundary::Wall => Cell {
            q: -inner.q,
            ..inner
        },
        Boundary::Elevation(eta) => {
            let h = (eta + b).max(f64::MIN_POSITIVE);
            Cell {
                zeta: eta,
                h,
                q: inner.u() * h,
            }
        }
        // Discharge enters along +x at the upstream end; the sign flips at the downstream end.
        Boundary::Discharge(q) => Cell {
            q: -outward_sign * q,
            ..inner
        },
    }
}

/// Courant number `dt·max(|U|+√(gH))/Δx` of a state, with the node attaining it.
pub fn courant_number(state: &SweState, channel: &Channel1D, dt: f64) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, (&h, &u)) in state.h.iter().zip(&state.u).enumerate() {
        let c = dt * (u.abs() + (GRAVITY * h.max(0.0)).sqrt()) / channel.dx();
        if c > worst.0 {
            worst = (c, i);
        }
    }
    worst
}

/// Advances `state` by `dt` seconds. `step` is only used to label errors.
pub fn swe_step(
    state: &SweState,
    channel: &Channel1D,
    bc: &BoundaryValues,
    r: f64,
    dt: f64,
    step: usize,
) -> Result<SweState> {
    let n = channel.nodes();
    if state.h.len() != n || state.u.len() != n || state.zeta.len() != n {
        return Err(Error::shape("state length does not match channel node count"));
    }
    if r < 0.0 || !(dt > 0.0) {
        return Err(Error::argument("friction must be >= 0 and dt > 0"));
    }
    state.check(step)?;
    let (courant, node) = courant_number(state, channel, dt);
    if courant > MAX_COURANT {
        return Err(Error::SolverInstability {
            node,
            step,
            reason: format!("Courant number {courant:.3} exceeds {MAX_COURANT}"),
        });
    }

    let b = channel.depth();
    let dx = channel.dx();
    let mut cells = Vec::with_capacity(n + 2);
    let interior = (0..n).map(|i| Cell {
        zeta: state.zeta[i],
        h: state.h[i],
        q: state.h[i] * state.u[i],
    });
    let inner: Vec<Cell> = interior.collect();
    cells.push(ghost(bc.upstream, inner[0], b[0], -1.0));
    cells.extend_from_slice(&inner);
    cells.push(ghost(bc.downstream, inner[n - 1], b[n - 1], 1.0));

    // Interface k sits between cells[k] and cells[k+1]; cell i is cells[i+1].
    let mut mass_flux = vec![0.0; n + 1];
    let mut mom_flux = vec![0.0; n + 1];
    for k in 0..=n {
        let l = cells[k];
        let rc = cells[k + 1];
        let a = l.speed().max(rc.speed());
        mass_flux[k] = 0.5 * (l.q + rc.q) - 0.5 * a * (rc.zeta - l.zeta);
        mom_flux[k] = 0.5 * (l.q * l.u() + rc.q * rc.u()) - 0.5 * a * (rc.q - l.q);
    }

    let ratio = dt / dx;
    let mut zeta = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut h = vec![0.0; n];
    for i in 0..n {
        let c = cells[i + 1];
        let h_new = c.h - ratio * (mass_flux[i + 1] - mass_flux[i]);
        let grad = (cells[i + 2].zeta - cells[i].zeta) / (2.0 * dx);
        let q_star = c.q - ratio * (mom_flux[i + 1] - mom_flux[i]) - dt * GRAVITY * c.h * grad;
        let q_new = q_star / (1.0 + dt * r * c.u().abs() / c.h);
        h[i] = h_new;
        zeta[i] = h_new - b[i];
        u[i] = q_new / h_new;
    }
    let next = SweState { zeta, u, h };
    next.check(step + 1)?;
    Ok(next)
}
