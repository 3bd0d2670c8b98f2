use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init_weights_with, Activation, InitScheme, Matrix};
use crate::error::{ensure_len, Error, Result};

/// Access to trainable parameters as an ordered list of flat blocks.
///
/// Gradient containers expose the same ordering through [`GradBlocks`], which is
/// what lets the optimizers stay model-agnostic.
pub trait Parameterized {
    fn param_blocks(&self) -> Vec<&[f64]>;
    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|b| b.len()).sum()
    }
}

pub trait GradBlocks {
    fn grad_blocks(&self) -> Vec<&[f64]>;
}

/// Affine map followed by an elementwise activation. Weights are `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        ensure_len("dense bias", bias.len(), weights.rows())?;
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Layer with zero weights and bias.
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(output, input),
            bias: vec![0.0; output],
            activation,
        }
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Writes the pre-activation into `z` and the activation into `y`.
    pub fn forward_into(&self, x: &[f64], z: &mut [f64], y: &mut [f64]) {
        self.weights.matvec_into(x, z);
        for ((zi, yi), bi) in z.iter_mut().zip(y.iter_mut()).zip(&self.bias) {
            *zi += bi;
            *yi = self.activation.apply(*zi);
        }
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = vec![0.0; self.output_dim()];
        let mut y = vec![0.0; self.output_dim()];
        self.forward_into(x, &mut z, &mut y);
        (z, y)
    }

    /// Given dL/dy, accumulates dL/dW and dL/db and returns dL/dz.
    pub fn backward_acc(
        &self,
        x: &[f64],
        z: &[f64],
        y: &[f64],
        dy: &[f64],
        grad: &mut DenseGrad,
    ) -> Vec<f64> {
        let dz: Vec<f64> = dy
            .iter()
            .zip(z.iter().zip(y))
            .map(|(&g, (&zi, &yi))| g * self.activation.derivative(zi, yi))
            .collect();
        grad.weights.rank1_acc(1.0, &dz, x);
        for (gb, d) in grad.bias.iter_mut().zip(&dz) {
            *gb += d;
        }
        dz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseGrad {
    pub fn zeros_like(layer: &Dense) -> Self {
        Self {
            weights: Matrix::zeros(layer.output_dim(), layer.input_dim()),
            bias: vec![0.0; layer.output_dim()],
        }
    }
}

/// Sequential multilayer perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Intermediates recorded by [`Mlp::forward`], consumed by [`Mlp::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTape {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl ForwardTape {
    pub fn len(&self) -> usize {
        self.pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pre.is_empty()
    }

    pub fn output(&self) -> &[f64] {
        self.post.last().map_or(&self.input, Vec::as_slice)
    }

    /// Input of layer `l`.
    pub fn layer_input(&self, l: usize) -> &[f64] {
        if l == 0 {
            &self.input
        } else {
            &self.post[l - 1]
        }
    }
}

/// Per-layer gradients of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrad>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net.layers.iter().map(DenseGrad::zeros_like).collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.as_mut_slice().iter_mut().for_each(|v| *v *= s);
            l.bias.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.grad_blocks().iter().all(|b| b.iter().all(|&v| v == 0.0))
    }
}

impl GradBlocks for MlpGrads {
    fn grad_blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("an MLP needs at least one layer"));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(format!(
                    "layer {l} outputs {} values but layer {} expects {}",
                    pair[0].output_dim(),
                    l + 1,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Random network with layer widths `sizes` (input first) and zero biases.
    pub fn random<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        init: InitScheme,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::argument("need at least input and output sizes"));
        }
        ensure_len("activation list", activations.len(), sizes.len() - 1)?;
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let weights = init_weights_with(w[1], w[0], init, rng)?;
                Dense::new(weights, vec![0.0; w[1]], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardTape)> {
        ensure_len("mlp input", x.len(), self.input_dim())?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = post.last().map_or(x, Vec::as_slice);
            let (z, y) = layer.forward(input);
            pre.push(z);
            post.push(y);
        }
        let y = post.last().cloned().unwrap_or_default();
        Ok((
            y,
            ForwardTape {
                input: x.to_vec(),
                pre,
                post,
            },
        ))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("mlp input", x.len(), self.input_dim())?;
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.forward(&cur).1;
        }
        Ok(cur)
    }

    fn check_tape(&self, tape: &ForwardTape) -> Result<()> {
        if tape.len() != self.layers.len() || tape.post.len() != self.layers.len() {
            return Err(Error::shape(format!(
                "tape has {} layers, network has {}",
                tape.len(),
                self.layers.len()
            )));
        }
        ensure_len("tape input", tape.input.len(), self.input_dim())?;
        for (l, layer) in self.layers.iter().enumerate() {
            if tape.pre[l].len() != layer.output_dim() || tape.post[l].len() != layer.output_dim()
            {
                return Err(Error::shape(format!(
                    "tape layer {l} width does not match the network"
                )));
            }
        }
        Ok(())
    }

    /// Accumulates parameter gradients into `grads` and returns dL/dx.
    pub fn backward_acc(
        &self,
        tape: &ForwardTape,
        dy: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec<f64>> {
        self.check_tape(tape)?;
        ensure_len("output gradient", dy.len(), self.output_dim())?;
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape("gradient buffer does not match the network"));
        }
        let mut upstream = dy.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let dz = layer.backward_acc(
                tape.layer_input(l),
                &tape.pre[l],
                &tape.post[l],
                &upstream,
                &mut grads.layers[l],
            );
            let mut dx = vec![0.0; layer.input_dim()];
            layer.weights.matvec_t_acc(&dz, &mut dx);
            upstream = dx;
        }
        Ok(upstream)
    }

    pub fn backward(&self, tape: &ForwardTape, dy: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let mut grads = MlpGrads::zeros_like(self);
        let dx = self.backward_acc(tape, dy, &mut grads)?;
        Ok((grads, dx))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

impl Parameterized for Mlp {
    fn param_blocks(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

pub fn mlp_forward(net: &Mlp, x: &[f64]) -> Result<(Vec<f64>, ForwardTape)> {
    net.forward(x)
}

pub fn mlp_backward(net: &Mlp, tape: &ForwardTape, dy: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
    net.backward(tape, dy)
}
