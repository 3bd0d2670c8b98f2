//! Gated forward pass: each hidden layer's activation mixes two embedding
//! vectors, `H ← (1 − Ψ(H))⊙a + Ψ(H)⊙b`.

use crate::error::{ensure_len, Error, Result};
use crate::numkit::{Mlp, MlpGrads};

/// Per-layer record of a gated pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedTape {
    /// Input to each layer (`H^{(l)}`, with `H^{(0)}` the network input).
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    /// Activation output: the gate `Ψ` for mixed layers, the result otherwise.
    pub act: Vec<Vec<f64>>,
    pub gated: Vec<bool>,
    pub output: Vec<f64>,
}

/// Checks that every mixed layer emits `q` values.
pub fn check_gated(net: &Mlp, q: usize, gate_final: bool) -> Result<()> {
    let depth = net.depth();
    for (l, layer) in net.layers().iter().enumerate() {
        let mixed = l + 1 < depth || gate_final;
        if mixed && layer.output_dim() != q {
            return Err(Error::config(format!(
                "gated layer {l} has width {}, embedding dimension is {q}",
                layer.output_dim()
            )));
        }
    }
    Ok(())
}

/// Hidden layers are mixed; the last layer is a plain affine map plus activation.
pub fn gated_forward(net: &Mlp, input: &[f64], mix_a: &[f64], mix_b: &[f64]) -> Result<Vec<f64>> {
    Ok(gated_forward_taped(net, input, mix_a, mix_b, false)?.0)
}

pub fn gated_forward_taped(
    net: &Mlp,
    input: &[f64],
    mix_a: &[f64],
    mix_b: &[f64],
    gate_final: bool,
) -> Result<(Vec<f64>, GatedTape)> {
    ensure_len("gated input", input.len(), net.input_dim())?;
    ensure_len("mix vectors", mix_b.len(), mix_a.len())?;
    check_gated(net, mix_a.len(), gate_final)?;
    let depth = net.depth();
    let mut tape = GatedTape {
        inputs: Vec::with_capacity(depth),
        pre: Vec::with_capacity(depth),
        act: Vec::with_capacity(depth),
        gated: Vec::with_capacity(depth),
        output: Vec::new(),
    };
    let mut h = input.to_vec();
    for (l, layer) in net.layers().iter().enumerate() {
        let mixed = l + 1 < depth || gate_final;
        let (z, g) = layer.forward(&h);
        let next = if mixed {
            g.iter()
                .zip(mix_a)
                .zip(mix_b)
                .map(|((g, a), b)| a + g * (b - a))
                .collect()
        } else {
            g.clone()
        };
        tape.inputs.push(std::mem::replace(&mut h, next));
        tape.pre.push(z);
        tape.act.push(g);
        tape.gated.push(mixed);
    }
    tape.output = h.clone();
    Ok((h, tape))
}

/// Accumulates parameter and mix-vector gradients; returns dL/d(input).
#[allow(clippy::too_many_arguments)]
pub fn gated_backward_acc(
    net: &Mlp,
    tape: &GatedTape,
    mix_a: &[f64],
    mix_b: &[f64],
    dy: &[f64],
    grads: &mut MlpGrads,
    d_mix_a: &mut [f64],
    d_mix_b: &mut [f64],
) -> Result<Vec<f64>> {
    if tape.inputs.len() != net.depth() {
        return Err(Error::shape("gated tape does not match the network depth"));
    }
    ensure_len("output gradient", dy.len(), net.output_dim())?;
    let mut up = dy.to_vec();
    for l in (0..net.depth()).rev() {
        let layer = &net.layers()[l];
        let g = &tape.act[l];
        let dact: Vec<f64> = if tape.gated[l] {
            for i in 0..up.len() {
                d_mix_a[i] += up[i] * (1.0 - g[i]);
                d_mix_b[i] += up[i] * g[i];
            }
            up.iter()
                .zip(mix_a)
                .zip(mix_b)
                .map(|((u, a), b)| u * (b - a))
                .collect()
        } else {
            up
        };
        let dz = layer.backward_acc(&tape.inputs[l], &tape.pre[l], g, &dact, &mut grads.layers[l]);
        let mut dx = vec![0.0; layer.input_dim()];
        layer.weights.matvec_t_acc(&dz, &mut dx);
        up = dx;
    }
    Ok(up)
}
