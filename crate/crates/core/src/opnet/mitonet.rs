use std::path::Path;

use serde::{Deserialize, Serialize};

use super::container::{content_hash, OperatorParts, Variant};
use super::fusion::{fuse, product, product_except};
use super::gated::{check_gated, gated_backward_acc, gated_forward_taped, GatedTape};
use super::objective::{operator_blocks, operator_blocks_mut, OperatorGrads, SampleModel};
use super::OperatorScaling;
use crate::error::{ensure_len, Error, Result};
use crate::numkit::{
    init_weights_with, seeded_rng, Activation, ForwardTape, InitScheme, Matrix, Mlp,
    Parameterized,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitonetConfig {
    pub n_r: usize,
    /// Boundary series, each fed to its own branch as one value.
    pub bc_count: usize,
    pub tau: usize,
    /// Layers per branch and trunk network (hidden layers are gated).
    pub layers: usize,
    /// Hidden and embedding width `q` as a multiple of `N_r`.
    pub width_factor: usize,
    /// Layers per encoder network; 1 is a single affine map plus activation.
    pub encoder_layers: usize,
    /// Encoder hidden width as a multiple of `N_r`.
    pub encoder_factor: usize,
    pub activation: Activation,
    /// Activation of the last branch/trunk layer.
    pub output_activation: Activation,
    pub init: InitScheme,
    /// Fusion width; when set, a trainable `N_r × p` projection is added.
    pub projection_dim: Option<usize>,
    /// Also gate the last layer (requires `p == q`).
    pub gate_final: bool,
    pub seed: u64,
}

impl MitonetConfig {
    pub fn toy(n_r: usize, bc_count: usize, tau: usize) -> Self {
        Self {
            n_r,
            bc_count,
            tau,
            layers: 3,
            width_factor: 4,
            encoder_layers: 1,
            encoder_factor: 2,
            activation: Activation::Tanh,
            output_activation: Activation::Identity,
            init: InitScheme::GlorotNormal,
            projection_dim: None,
            gate_final: false,
            seed: 0,
        }
    }

    pub fn q(&self) -> usize {
        self.width_factor * self.n_r
    }

    pub fn p(&self) -> usize {
        self.projection_dim.unwrap_or(self.n_r)
    }

    /// IC latent, one per boundary series, then `r`.
    pub fn k(&self) -> usize {
        self.bc_count + 2
    }

    pub fn branch_input_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.n_r];
        dims.extend(std::iter::repeat(1).take(self.bc_count));
        dims.push(1);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r == 0 || self.tau == 0 {
            return Err(Error::config("latent dimension and look-forward window must be positive"));
        }
        if self.layers < 2 {
            return Err(Error::config("branch and trunk networks need at least 2 layers"));
        }
        if self.width_factor == 0 || self.encoder_layers == 0 || self.encoder_factor == 0 {
            return Err(Error::config("width factors and encoder depth must be positive"));
        }
        if self.gate_final && self.p() != self.q() {
            return Err(Error::config(format!(
                "final-layer gating needs p == q, got p = {} and q = {}",
                self.p(),
                self.q()
            )));
        }
        if self.projection_dim == Some(0) {
            return Err(Error::config("projection width must be positive"));
        }
        Ok(())
    }
}

/// Multi-branch gated operator over latent states.
#[derive(Debug, Clone, PartialEq)]
pub struct MitonetModel {
    pub branches: Vec<Mlp>,
    pub trunk: Mlp,
    pub branch_encoders: Vec<Mlp>,
    pub trunk_encoder: Mlp,
    pub b0: Vec<f64>,
    pub projection: Option<Matrix>,
    pub tau: usize,
    pub gate_final: bool,
    pub scaling: OperatorScaling,
}

pub(crate) fn encoder_net<R: rand::Rng + ?Sized>(
    input: usize,
    hidden: usize,
    output: usize,
    layers: usize,
    act: Activation,
    init: InitScheme,
    rng: &mut R,
) -> Result<Mlp> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat(hidden).take(layers - 1));
    sizes.push(output);
    Mlp::random(&sizes, &vec![act; layers], init, rng)
}

pub(crate) fn gated_net<R: rand::Rng + ?Sized>(
    input: usize,
    q: usize,
    p: usize,
    layers: usize,
    act: Activation,
    out_act: Activation,
    init: InitScheme,
    rng: &mut R,
) -> Result<Mlp> {
    let mut sizes = vec![input];
    sizes.extend(std::iter::repeat(q).take(layers - 1));
    sizes.push(p);
    let mut acts = vec![act; layers];
    acts[layers - 1] = out_act;
    Mlp::random(&sizes, &acts, init, rng)
}

/// Everything recorded by a forward pass of [`MitonetModel`].
#[derive(Debug, Clone)]
pub struct MitonetTape {
    enc: Vec<ForwardTape>,
    trunk_enc: ForwardTape,
    branch: Vec<GatedTape>,
    trunk: GatedTape,
    u: Vec<Vec<f64>>,
    w: Vec<f64>,
    prod_u: Vec<f64>,
    fused: Vec<f64>,
}

impl MitonetModel {
    pub fn new(cfg: &MitonetConfig, scaling: OperatorScaling) -> Result<Self> {
        cfg.validate()?;
        if scaling.state.dim() != cfg.n_r || scaling.bc.len() != cfg.bc_count {
            return Err(Error::config("scaling does not match the model's inputs"));
        }
        let mut rng = seeded_rng(cfg.seed);
        let (q, p) = (cfg.q(), cfg.p());
        let dims = cfg.branch_input_dims();
        let branches = dims
            .iter()
            .map(|&d| {
                gated_net(
                    d,
                    q,
                    p,
                    cfg.layers,
                    cfg.activation,
                    cfg.output_activation,
                    cfg.init,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let trunk = gated_net(
            1,
            q,
            p,
            cfg.layers,
            cfg.activation,
            cfg.output_activation,
            cfg.init,
            &mut rng,
        )?;
        let hidden = cfg.encoder_factor * cfg.n_r;
        let branch_encoders = dims
            .iter()
            .map(|&d| encoder_net(d, hidden, q, cfg.encoder_layers, cfg.activation, cfg.init, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let trunk_encoder =
            encoder_net(1, hidden, q, cfg.encoder_layers, cfg.activation, cfg.init, &mut rng)?;
        let projection = match cfg.projection_dim {
            Some(pd) => Some(init_weights_with(cfg.n_r, pd, cfg.init, &mut rng)?),
            None => None,
        };
        let model = Self {
            branches,
            trunk,
            branch_encoders,
            trunk_encoder,
            b0: vec![0.0; p],
            projection,
            tau: cfg.tau,
            gate_final: cfg.gate_final,
            scaling,
        };
        model.check()?;
        Ok(model)
    }

    /// Validates the dimensional contract between all constituent networks.
    pub fn check(&self) -> Result<()> {
        let k = self.branches.len();
        if k == 0 || self.branch_encoders.len() != k {
            return Err(Error::config("need one encoder per branch and at least one branch"));
        }
        let q = self.trunk_encoder.output_dim();
        let p = self.trunk.output_dim();
        for (i, (b, e)) in self.branches.iter().zip(&self.branch_encoders).enumerate() {
            if b.input_dim() != e.input_dim() {
                return Err(Error::config(format!("branch {i} and its encoder disagree on input size")));
            }
            if e.output_dim() != q {
                return Err(Error::config(format!("encoder {i} emits {}, expected q = {q}", e.output_dim())));
            }
            if b.output_dim() != p {
                return Err(Error::config(format!("branch {i} emits {}, expected p = {p}", b.output_dim())));
            }
            check_gated(b, q, self.gate_final)?;
        }
        check_gated(&self.trunk, q, self.gate_final)?;
        if self.trunk.input_dim() != self.trunk_encoder.input_dim() {
            return Err(Error::config("trunk and trunk encoder disagree on input size"));
        }
        if self.b0.len() != p {
            return Err(Error::config("fusion bias must have length p"));
        }
        if let Some(proj) = &self.projection {
            if proj.cols() != p {
                return Err(Error::config("projection columns must equal p"));
            }
        }
        if self.tau == 0 {
            return Err(Error::config("look-forward window must be positive"));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.branches.len()
    }

    pub fn q(&self) -> usize {
        self.trunk_encoder.output_dim()
    }

    pub fn p(&self) -> usize {
        self.trunk.output_dim()
    }

    pub fn n_r(&self) -> usize {
        self.projection.as_ref().map_or(self.p(), |m| m.rows())
    }

    pub fn bc_count(&self) -> usize {
        self.k() - 2
    }

    /// Scaled branch inputs and trunk input for physical-unit arguments.
    ///
    /// `beta` is the lead in output steps; the trunk sees `beta / τ`.
    pub fn scaled_inputs(
        &self,
        ic_latent: &[f64],
        bc_values: &[f64],
        r: f64,
        beta: f64,
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        ensure_len("boundary values", bc_values.len(), self.bc_count())?;
        let mut inputs = Vec::with_capacity(self.k());
        inputs.push(self.scaling.scale_state(ic_latent)?);
        for (s, &v) in bc_values.iter().enumerate() {
            inputs.push(vec![self.scaling.scale_bc(s, v)]);
        }
        inputs.push(vec![self.scaling.scale_r(r)]);
        Ok((inputs, vec![beta / self.tau as f64]))
    }

    fn check_inputs(&self, branch_inputs: &[Vec<f64>], trunk_input: &[f64]) -> Result<()> {
        ensure_len("branch input list", branch_inputs.len(), self.k())?;
        for (x, b) in branch_inputs.iter().zip(&self.branches) {
            ensure_len("branch input", x.len(), b.input_dim())?;
        }
        ensure_len("trunk input", trunk_input.len(), self.trunk.input_dim())
    }

    /// Forward pass on already-scaled inputs; the output is a scaled latent.
    pub fn forward_scaled(
        &self,
        branch_inputs: &[Vec<f64>],
        trunk_input: &[f64],
    ) -> Result<(Vec<f64>, MitonetTape)> {
        self.check_inputs(branch_inputs, trunk_input)?;
        let q = self.q();
        let mut enc = Vec::with_capacity(self.k());
        let mut u = Vec::with_capacity(self.k());
        for (x, e) in branch_inputs.iter().zip(&self.branch_encoders) {
            let (uk, tape) = e.forward(x)?;
            u.push(uk);
            enc.push(tape);
        }
        let (w, trunk_enc) = self.trunk_encoder.forward(trunk_input)?;
        let u_refs: Vec<&[f64]> = u.iter().map(Vec::as_slice).collect();
        let prod_u = product(&u_refs, q);

        let mut branch = Vec::with_capacity(self.k());
        let mut outs = Vec::with_capacity(self.k());
        for ((x, net), uk) in branch_inputs.iter().zip(&self.branches).zip(&u) {
            let (y, tape) = gated_forward_taped(net, x, uk, &w, self.gate_final)?;
            outs.push(y);
            branch.push(tape);
        }
        let (t_out, trunk) = gated_forward_taped(&self.trunk, trunk_input, &prod_u, &w, self.gate_final)?;
        let fused = fuse(&outs, &t_out, &self.b0, None)?;
        let out = match &self.projection {
            Some(p) => p.matvec(&fused)?,
            None => fused.clone(),
        };
        Ok((
            out,
            MitonetTape {
                enc,
                trunk_enc,
                branch,
                trunk,
                u,
                w,
                prod_u,
                fused,
            },
        ))
    }

    /// Backpropagates `dout` (gradient w.r.t. the scaled output).
    pub fn backward_scaled(
        &self,
        tape: &MitonetTape,
        dout: &[f64],
        grads: &mut OperatorGrads,
    ) -> Result<()> {
        ensure_len("output gradient", dout.len(), self.n_r())?;
        let k = self.k();
        let (p, q) = (self.p(), self.q());
        let dfused = match (&self.projection, &mut grads.projection) {
            (Some(proj), Some(gp)) => {
                gp.rank1_acc(1.0, dout, &tape.fused);
                let mut d = vec![0.0; p];
                proj.matvec_t_acc(dout, &mut d);
                d
            }
            (None, None) => dout.to_vec(),
            _ => return Err(Error::shape("projection gradient buffer mismatch")),
        };
        for (g, d) in grads.b0.iter_mut().zip(&dfused) {
            *g += d;
        }

        let b_outs: Vec<&[f64]> = tape.branch.iter().map(|t| t.output.as_slice()).collect();
        let t_out = tape.trunk.output.as_slice();
        let mut all: Vec<&[f64]> = b_outs.clone();
        all.push(t_out);

        let mut d_u = vec![vec![0.0; q]; k];
        let mut d_w = vec![0.0; q];
        let mut d_prod_u = vec![0.0; q];
        for i in 0..k {
            let others = product_except(&all, i, p);
            let dy: Vec<f64> = dfused.iter().zip(&others).map(|(a, b)| a * b).collect();
            gated_backward_acc(
                &self.branches[i],
                &tape.branch[i],
                &tape.u[i],
                &tape.w,
                &dy,
                &mut grads.nets[i],
                &mut d_u[i],
                &mut d_w,
            )?;
        }
        let others = product_except(&all, k, p);
        let dt: Vec<f64> = dfused.iter().zip(&others).map(|(a, b)| a * b).collect();
        gated_backward_acc(
            &self.trunk,
            &tape.trunk,
            &tape.prod_u,
            &tape.w,
            &dt,
            &mut grads.nets[k],
            &mut d_prod_u,
            &mut d_w,
        )?;
        let u_refs: Vec<&[f64]> = tape.u.iter().map(Vec::as_slice).collect();
        for i in 0..k {
            let others = product_except(&u_refs, i, q);
            for j in 0..q {
                d_u[i][j] += d_prod_u[j] * others[j];
            }
            self.branch_encoders[i].backward_acc(&tape.enc[i], &d_u[i], &mut grads.nets[k + 1 + i])?;
        }
        self.trunk_encoder
            .backward_acc(&tape.trunk_enc, &d_w, &mut grads.nets[2 * k + 1])?;
        Ok(())
    }

    /// Networks in gradient order: branches, trunk, branch encoders, trunk encoder.
    pub fn networks(&self) -> Vec<&Mlp> {
        let mut nets: Vec<&Mlp> = self.branches.iter().collect();
        nets.push(&self.trunk);
        nets.extend(self.branch_encoders.iter());
        nets.push(&self.trunk_encoder);
        nets
    }

    pub fn to_parts(&self) -> OperatorParts {
        OperatorParts {
            variant: Variant::Mitonet,
            k: self.k(),
            q: self.q(),
            p: self.p(),
            n_r: self.n_r(),
            tau: self.tau,
            flags: self.gate_final as u8,
            nets: self.networks().into_iter().cloned().collect(),
            scaling: self.scaling.clone(),
            aux: Vec::new(),
            b0: self.b0.clone(),
            projection: self.projection.clone(),
        }
    }

    pub fn from_parts(parts: OperatorParts) -> Result<Self> {
        if parts.variant != Variant::Mitonet {
            return Err(Error::format(format!("expected a MITONet container, found {}", parts.variant)));
        }
        let k = parts.k;
        if parts.nets.len() != 2 * k + 2 {
            return Err(Error::format("network count does not match k"));
        }
        let mut nets = parts.nets.into_iter();
        let branches: Vec<Mlp> = nets.by_ref().take(k).collect();
        let trunk = nets.next().unwrap();
        let branch_encoders: Vec<Mlp> = nets.by_ref().take(k).collect();
        let trunk_encoder = nets.next().unwrap();
        let model = Self {
            branches,
            trunk,
            branch_encoders,
            trunk_encoder,
            b0: parts.b0,
            projection: parts.projection,
            tau: parts.tau,
            gate_final: parts.flags & 1 == 1,
            scaling: parts.scaling,
        };
        model.check().map_err(|e| Error::format(e.to_string()))?;
        if model.q() != parts.q || model.p() != parts.p || model.n_r() != parts.n_r {
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

/// Branch embeddings `U_1..U_k` and trunk embedding `W` for scaled inputs.
pub fn encoder_embeddings(
    model: &MitonetModel,
    branch_inputs: &[Vec<f64>],
    trunk_input: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    model.check_inputs(branch_inputs, trunk_input)?;
    let u = branch_inputs
        .iter()
        .zip(&model.branch_encoders)
        .map(|(x, e)| e.predict(x))
        .collect::<Result<Vec<_>>>()?;
    Ok((u, model.trunk_encoder.predict(trunk_input)?))
}

/// Predicted latent at lead `beta` steps, in the autoencoder's latent units.
pub fn mitonet_forward(
    model: &MitonetModel,
    ic_latent: &[f64],
    bc_values: &[f64],
    r: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    let (inputs, trunk) = model.scaled_inputs(ic_latent, bc_values, r, beta)?;
    let (out, _) = model.forward_scaled(&inputs, &trunk)?;
    let latent = model.scaling.unscale_state(&out)?;
    if latent.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence(format!("non-finite operator output at lead {beta}")));
    }
    Ok(latent)
}

impl Parameterized for MitonetModel {
    fn param_blocks(&self) -> Vec<&[f64]> {
        operator_blocks(self.networks(), &self.b0, self.projection.as_ref())
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let Self {
            branches,
            trunk,
            branch_encoders,
            trunk_encoder,
            b0,
            projection,
            ..
        } = self;
        let mut nets: Vec<&mut Mlp> = branches.iter_mut().collect();
        nets.push(trunk);
        nets.extend(branch_encoders.iter_mut());
        nets.push(trunk_encoder);
        operator_blocks_mut(nets, b0, projection.as_mut())
    }
}

/// One training pair in scaled units.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSample {
    pub branch_inputs: Vec<Vec<f64>>,
    pub trunk_input: Vec<f64>,
    pub target: Vec<f64>,
}

impl SampleModel for MitonetModel {
    type Sample = OperatorSample;

    fn networks(&self) -> Vec<&Mlp> {
        MitonetModel::networks(self)
    }

    fn zero_grads(&self) -> OperatorGrads {
        OperatorGrads::zeros(&self.networks(), self.b0.len(), self.projection.as_ref())
    }

    fn sample_loss_grad(
        &self,
        s: &OperatorSample,
        weight: f64,
        grads: &mut OperatorGrads,
    ) -> Result<f64> {
        let (out, tape) = self.forward_scaled(&s.branch_inputs, &s.trunk_input)?;
        ensure_len("target", s.target.len(), out.len())?;
        let n = out.len() as f64;
        let mut loss = 0.0;
        let dout: Vec<f64> = out
            .iter()
            .zip(&s.target)
            .map(|(o, t)| {
                let e = o - t;
                loss += e * e / n;
                2.0 * e / n * weight
            })
            .collect();
        self.backward_scaled(&tape, &dout, grads)?;
        Ok(loss)
    }

    fn sample_loss(&self, s: &OperatorSample) -> Result<f64> {
        let (out, _) = self.forward_scaled(&s.branch_inputs, &s.trunk_input)?;
        ensure_len("target", s.target.len(), out.len())?;
        Ok(out.iter().zip(&s.target).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() / out.len() as f64)
    }
}
