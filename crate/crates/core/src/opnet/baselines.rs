//! DeepONet-family baselines.
//!
//! DON, M-DON and L-DON feed one branch the concatenation of the scaled
//! state, every boundary value in the look-forward window and `r`. MIONet
//! gives each of those inputs its own branch. DON, M-DON and MIONet predict a
//! scalar per `(x, β)` trunk point in physical space; L-DON predicts latent
//! vectors from a lead-time-only trunk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{content_hash, OperatorParts, Variant};
use super::fusion::{product, product_except};
use super::gated::{gated_backward_acc, gated_forward_taped, GatedTape};
use super::mitonet::{encoder_net, gated_net};
use super::objective::{operator_blocks, operator_blocks_mut, OperatorGrads, SampleModel};
use super::OperatorScaling;
use crate::error::{ensure_len, Error, Result};
use crate::numkit::{seeded_rng, Activation, InitScheme, Mlp, MlpGrads, Parameterized};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub variant: Variant,
    /// `N_s` for physical-space variants, `N_r` for L-DON.
    pub state_dim: usize,
    pub bc_count: usize,
    pub tau: usize,
    pub layers: usize,
    pub width: usize,
    /// Fusion width; forced to `state_dim` for L-DON.
    pub p: usize,
    pub activation: Activation,
    pub init: InitScheme,
    pub seed: u64,
}

impl BaselineConfig {
    pub fn toy(variant: Variant, state_dim: usize, bc_count: usize, tau: usize) -> Self {
        Self {
            variant,
            state_dim,
            bc_count,
            tau,
            layers: 3,
            width: 32,
            p: if variant == Variant::LDon { state_dim } else { 32 },
            activation: Activation::Tanh,
            init: InitScheme::GlorotNormal,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant == Variant::Mitonet {
            return Err(Error::config("MITONet is not a baseline variant"));
        }
        if self.state_dim == 0 || self.tau == 0 || self.width == 0 || self.p == 0 {
            return Err(Error::config("baseline dimensions must be positive"));
        }
        if self.layers < 2 {
            return Err(Error::config("baseline networks need at least 2 layers"));
        }
        if self.variant == Variant::LDon && self.p != self.state_dim {
            return Err(Error::config("L-DON fusion width must equal the latent dimension"));
        }
        Ok(())
    }

    /// Input width of each branch.
    pub fn branch_input_dims(&self) -> Vec<usize> {
        match self.variant {
            Variant::MioNet => {
                let mut dims = vec![self.state_dim];
                dims.extend(std::iter::repeat(self.tau).take(self.bc_count));
                dims.push(1);
                dims
            }
            _ => vec![self.state_dim + self.bc_count * self.tau + 1],
        }
    }

    pub fn trunk_input_dim(&self) -> usize {
        if self.variant == Variant::LDon {
            1
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub variant: Variant,
    pub tau: usize,
    pub bc_count: usize,
    pub branches: Vec<Mlp>,
    pub trunk: Mlp,
    /// M-DON only: encoders producing the branch (`U`) and trunk (`V`) embeddings.
    pub encoders: Option<(Mlp, Mlp)>,
    pub b0: Vec<f64>,
    /// Node coordinates in [0, 1]; empty for L-DON.
    pub coords: Vec<f64>,
    pub scaling: OperatorScaling,
}

/// Training sample: scaled branch inputs and lead, plus scaled targets at
/// `nodes` (physical variants) or the full latent target (L-DON, `nodes` empty).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSample {
    pub branch_inputs: Vec<Vec<f64>>,
    pub lead: f64,
    pub nodes: Vec<usize>,
    pub target: Vec<f64>,
}

fn plain_forward_taped(net: &Mlp, x: &[f64]) -> Result<(Vec<f64>, GatedTape)> {
    let (y, t) = net.forward(x)?;
    let n = t.len();
    let inputs = (0..n).map(|l| t.layer_input(l).to_vec()).collect();
    Ok((
        y.clone(),
        GatedTape {
            inputs,
            pre: t.pre,
            act: t.post,
            gated: vec![false; n],
            output: y,
        },
    ))
}

fn plain_backward_acc(net: &Mlp, tape: &GatedTape, dy: &[f64], grads: &mut MlpGrads) -> Result<Vec<f64>> {
    gated_backward_acc(net, tape, &[], &[], dy, grads, &mut [], &mut [])
}

struct PointTape {
    branch: Vec<GatedTape>,
    trunk: GatedTape,
    /// (U, V) with their encoder tapes, M-DON only.
    mix: Option<(GatedTape, GatedTape)>,
}

impl BaselineModel {
    pub fn new(cfg: &BaselineConfig, scaling: OperatorScaling, coords: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if scaling.state.dim() != cfg.state_dim || scaling.bc.len() != cfg.bc_count {
            return Err(Error::config("scaling does not match the baseline's inputs"));
        }
        let physical = cfg.variant != Variant::LDon;
        if physical {
            ensure_len("node coordinates", coords.len(), cfg.state_dim)?;
        }
        let mut rng = seeded_rng(cfg.seed);
        let (w, p) = (cfg.width, cfg.p);
        let out_act = Activation::Identity;
        let branches = cfg
            .branch_input_dims()
            .iter()
            .map(|&d| gated_net(d, w, p, cfg.layers, cfg.activation, out_act, cfg.init, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let trunk_in = cfg.trunk_input_dim();
        let trunk = gated_net(trunk_in, w, p, cfg.layers, cfg.activation, out_act, cfg.init, &mut rng)?;
        let encoders = if cfg.variant == Variant::MDon {
            let d = cfg.branch_input_dims()[0];
            Some((
                encoder_net(d, w, w, 1, cfg.activation, cfg.init, &mut rng)?,
                encoder_net(trunk_in, w, w, 1, cfg.activation, cfg.init, &mut rng)?,
            ))
        } else {
            None
        };
        let b0_len = if physical { 1 } else { p };
        Ok(Self {
            variant: cfg.variant,
            tau: cfg.tau,
            bc_count: cfg.bc_count,
            branches,
            trunk,
            encoders,
            b0: vec![0.0; b0_len],
            coords: if physical { coords } else { Vec::new() },
            scaling,
        })
    }

    pub fn is_physical(&self) -> bool {
        self.variant != Variant::LDon
    }

    pub fn p(&self) -> usize {
        self.trunk.output_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.scaling.state.dim()
    }

    /// Scaled branch inputs from a physical-unit state, per-series boundary
    /// windows (`τ` values each, leads 1..τ) and `r`.
    pub fn scaled_inputs(&self, state: &[f64], bc_window: &[Vec<f64>], r: f64) -> Result<Vec<Vec<f64>>> {
        ensure_len("boundary window list", bc_window.len(), self.bc_count)?;
        let s = self.scaling.scale_state(state)?;
        let windows = bc_window
            .iter()
            .enumerate()
            .map(|(k, w)| {
                ensure_len("boundary window", w.len(), self.tau)?;
                Ok(w.iter().map(|&v| self.scaling.scale_bc(k, v)).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let rs = self.scaling.scale_r(r);
        Ok(match self.variant {
            Variant::MioNet => {
                let mut v = vec![s];
                v.extend(windows);
                v.push(vec![rs]);
                v
            }
            _ => {
                let mut flat = s;
                for w in windows {
                    flat.extend(w);
                }
                flat.push(rs);
                vec![flat]
            }
        })
    }

    fn trunk_input(&self, node: Option<usize>, lead: f64) -> Vec<f64> {
        match node {
            Some(i) => vec![self.coords[i], lead],
            None => vec![lead],
        }
    }

    fn point_forward(
        &self,
        branch_inputs: &[Vec<f64>],
        cached: Option<&(Vec<Vec<f64>>, Vec<GatedTape>)>,
        trunk_in: &[f64],
    ) -> Result<(Vec<f64>, PointTape)> {
        let p = self.p();
        let (b_outs, b_tapes, t_out, t_tape, mix) = match &self.encoders {
            Some((eb, et)) => {
                let (u, ut) = plain_forward_taped(eb, &branch_inputs[0])?;
                let (v, vt) = plain_forward_taped(et, trunk_in)?;
                let (b, bt) = gated_forward_taped(&self.branches[0], &branch_inputs[0], &u, &v, false)?;
                let (t, tt) = gated_forward_taped(&self.trunk, trunk_in, &u, &v, false)?;
                (vec![b], vec![bt], t, tt, Some((ut, vt)))
            }
            None => {
                let (b_outs, b_tapes) = match cached {
                    Some((o, t)) => (o.clone(), t.clone()),
                    None => self.branch_pass(branch_inputs)?,
                };
                let (t, tt) = plain_forward_taped(&self.trunk, trunk_in)?;
                (b_outs, b_tapes, t, tt, None)
            }
        };
        let mut refs: Vec<&[f64]> = b_outs.iter().map(Vec::as_slice).collect();
        refs.push(&t_out);
        let prod = product(&refs, p);
        let out = if self.is_physical() {
            vec![prod.iter().sum::<f64>() + self.b0[0]]
        } else {
            prod.iter().zip(&self.b0).map(|(a, b)| a + b).collect()
        };
        Ok((
            out,
            PointTape {
                branch: b_tapes,
                trunk: t_tape,
                mix,
            },
        ))
    }

    fn branch_pass(&self, branch_inputs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<GatedTape>)> {
        let mut outs = Vec::new();
        let mut tapes = Vec::new();
        for (x, net) in branch_inputs.iter().zip(&self.branches) {
            let (y, t) = plain_forward_taped(net, x)?;
            outs.push(y);
            tapes.push(t);
        }
        Ok((outs, tapes))
    }

    /// Gradient of one trunk point. Branch gradients (dL/d branch output) are
    /// accumulated into `d_branch` when branches are shared across points.
    fn point_backward(
        &self,
        tape: &PointTape,
        dout: &[f64],
        grads: &mut OperatorGrads,
        d_branch: &mut [Vec<f64>],
    ) -> Result<()> {
        let p = self.p();
        let k = self.branches.len();
        let df: Vec<f64> = if self.is_physical() {
            grads.b0[0] += dout[0];
            vec![dout[0]; p]
        } else {
            for (g, d) in grads.b0.iter_mut().zip(dout) {
                *g += d;
            }
            dout.to_vec()
        };
        let mut all: Vec<&[f64]> = tape.branch.iter().map(|t| t.output.as_slice()).collect();
        all.push(&tape.trunk.output);
        let others = product_except(&all, k, p);
        let dt: Vec<f64> = df.iter().zip(&others).map(|(a, b)| a * b).collect();
        match (&self.encoders, &tape.mix) {
            (Some((eb, et)), Some((ut, vt))) => {
                let w = eb.output_dim();
                let (mut du, mut dv) = (vec![0.0; w], vec![0.0; w]);
                let others_b = product_except(&all, 0, p);
                let db: Vec<f64> = df.iter().zip(&others_b).map(|(a, b)| a * b).collect();
                let (u, v) = (&ut.output, &vt.output);
                gated_backward_acc(&self.branches[0], &tape.branch[0], u, v, &db, &mut grads.nets[0], &mut du, &mut dv)?;
                gated_backward_acc(&self.trunk, &tape.trunk, u, v, &dt, &mut grads.nets[1], &mut du, &mut dv)?;
                plain_backward_acc(eb, ut, &du, &mut grads.nets[2])?;
                plain_backward_acc(et, vt, &dv, &mut grads.nets[3])?;
            }
            _ => {
                plain_backward_acc(&self.trunk, &tape.trunk, &dt, &mut grads.nets[k])?;
                for (i, acc) in d_branch.iter_mut().enumerate() {
                    let others = product_except(&all, i, p);
                    for j in 0..p {
                        acc[j] += df[j] * others[j];
                    }
                }
            }
        }
        Ok(())
    }

    fn points(&self, nodes: Option<&[usize]>) -> Vec<Option<usize>> {
        if !self.is_physical() {
            return vec![None];
        }
        match nodes {
            Some(ns) => ns.iter().map(|&i| Some(i)).collect(),
            None => (0..self.coords.len()).map(Some).collect(),
        }
    }

    /// Scaled prediction at `nodes` (all nodes when `None`) or the scaled latent.
    pub fn predict_scaled(
        &self,
        branch_inputs: &[Vec<f64>],
        lead: f64,
        nodes: Option<&[usize]>,
    ) -> Result<Vec<f64>> {
        self.check_inputs(branch_inputs)?;
        let cached = if self.encoders.is_none() {
            Some(self.branch_pass(branch_inputs)?)
        } else {
            None
        };
        let mut out = Vec::new();
        for pt in self.points(nodes) {
            let (y, _) = self.point_forward(branch_inputs, cached.as_ref(), &self.trunk_input(pt, lead))?;
            out.extend(y);
        }
        Ok(out)
    }

    fn check_inputs(&self, branch_inputs: &[Vec<f64>]) -> Result<()> {
        ensure_len("branch input list", branch_inputs.len(), self.branches.len())?;
        for (x, b) in branch_inputs.iter().zip(&self.branches) {
            ensure_len("branch input", x.len(), b.input_dim())?;
        }
        Ok(())
    }

    /// Prediction in physical (or latent) units at lead `beta` steps.
    pub fn predict(&self, state: &[f64], bc_window: &[Vec<f64>], r: f64, beta: f64) -> Result<Vec<f64>> {
        let inputs = self.scaled_inputs(state, bc_window, r)?;
        let y = self.predict_scaled(&inputs, beta / self.tau as f64, None)?;
        let out = self.scaling.unscale_state(&y)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("non-finite {} output", self.variant)));
        }
        Ok(out)
    }

    pub fn networks(&self) -> Vec<&Mlp> {
        let mut nets: Vec<&Mlp> = self.branches.iter().collect();
        nets.push(&self.trunk);
        if let Some((a, b)) = &self.encoders {
            nets.push(a);
            nets.push(b);
        }
        nets
    }

    pub fn to_parts(&self) -> OperatorParts {
        OperatorParts {
            variant: self.variant,
            k: self.branches.len(),
            q: self.trunk.layers()[0].output_dim(),
            p: self.p(),
            n_r: self.state_dim(),
            tau: self.tau,
            flags: self.bc_count as u8,
            nets: self.networks().into_iter().cloned().collect(),
            scaling: self.scaling.clone(),
            aux: self.coords.clone(),
            b0: self.b0.clone(),
            projection: None,
        }
    }

    pub fn from_parts(parts: OperatorParts) -> Result<Self> {
        if parts.variant == Variant::Mitonet {
            return Err(Error::format("expected a baseline container, found MITONet"));
        }
        let k = parts.k;
        let extra = if parts.variant == Variant::MDon { 2 } else { 0 };
        if parts.nets.len() != k + 1 + extra {
            return Err(Error::format("network count does not match the variant"));
        }
        let mut nets = parts.nets.into_iter();
        let branches: Vec<Mlp> = nets.by_ref().take(k).collect();
        let trunk = nets.next().unwrap();
        let encoders = if extra == 2 {
            Some((nets.next().unwrap(), nets.next().unwrap()))
        } else {
            None
        };
        let model = Self {
            variant: parts.variant,
            tau: parts.tau,
            bc_count: parts.flags as usize,
            branches,
            trunk,
            encoders,
            b0: parts.b0,
            coords: parts.aux,
            scaling: parts.scaling,
        };
        if model.state_dim() != parts.n_r || model.p() != parts.p {
            return Err(Error::format("header dimensions disagree with the stored networks"));
        }
        Ok(model)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.to_parts().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_parts(OperatorParts::from_bytes(bytes)?)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(content_hash(&self.to_bytes()?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Straight evaluation of a baseline at one trunk point, for cross-checks.
pub fn baseline_forward(
    model: &BaselineModel,
    branch_inputs: &[Vec<f64>],
    lead: f64,
    node: Option<usize>,
) -> Result<Vec<f64>> {
    model.check_inputs(branch_inputs)?;
    let nodes = node.map(|n| vec![n]);
    model.predict_scaled(branch_inputs, lead, nodes.as_deref())
}

impl Parameterized for BaselineModel {
    fn param_blocks(&self) -> Vec<&[f64]> {
        operator_blocks(self.networks(), &self.b0, None)
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let Self {
            branches,
            trunk,
            encoders,
            b0,
            ..
        } = self;
        let mut nets: Vec<&mut Mlp> = branches.iter_mut().collect();
        nets.push(trunk);
        if let Some((a, b)) = encoders {
            nets.push(a);
            nets.push(b);
        }
        operator_blocks_mut(nets, b0, None)
    }
}

impl SampleModel for BaselineModel {
    type Sample = BaselineSample;

    fn networks(&self) -> Vec<&Mlp> {
        BaselineModel::networks(self)
    }

    fn zero_grads(&self) -> OperatorGrads {
        OperatorGrads::zeros(&self.networks(), self.b0.len(), None)
    }

    fn sample_loss_grad(&self, s: &BaselineSample, weight: f64, grads: &mut OperatorGrads) -> Result<f64> {
        self.check_inputs(&s.branch_inputs)?;
        let points: Vec<Option<usize>> = if self.is_physical() {
            s.nodes.iter().map(|&i| Some(i)).collect()
        } else {
            vec![None]
        };
        ensure_len("sample target", s.target.len(), if self.is_physical() { points.len() } else { self.p() })?;
        let cached = if self.encoders.is_none() {
            Some(self.branch_pass(&s.branch_inputs)?)
        } else {
            None
        };
        let p = self.p();
        let mut d_branch = vec![vec![0.0; p]; self.branches.len()];
        let n = s.target.len() as f64;
        let mut loss = 0.0;
        for (idx, pt) in points.iter().enumerate() {
            let (y, tape) = self.point_forward(&s.branch_inputs, cached.as_ref(), &self.trunk_input(*pt, s.lead))?;
            let targets = if self.is_physical() { &s.target[idx..idx + 1] } else { &s.target[..] };
            let dout: Vec<f64> = y
                .iter()
                .zip(targets)
                .map(|(o, t)| {
                    let e = o - t;
                    loss += e * e / n;
                    2.0 * e / n * weight
                })
                .collect();
            self.point_backward(&tape, &dout, grads, &mut d_branch)?;
        }
        if let Some((_, tapes)) = &cached {
            for (i, (net, tape)) in self.branches.iter().zip(tapes).enumerate() {
                plain_backward_acc(net, tape, &d_branch[i], &mut grads.nets[i])?;
            }
        }
        Ok(loss)
    }

    fn sample_loss(&self, s: &BaselineSample) -> Result<f64> {
        let nodes = if self.is_physical() { Some(s.nodes.as_slice()) } else { None };
        let y = self.predict_scaled(&s.branch_inputs, s.lead, nodes)?;
        ensure_len("sample target", s.target.len(), y.len())?;
        Ok(y.iter().zip(&s.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
    }
}
