//! Straight-line reference evaluators shared by integration tests.
#![allow(dead_code)]

use mitonet::numkit::{
    seeded_rng, Activation, Dense, GradBlocks, InitScheme, Matrix, Mlp, Parameterized,
};
use mitonet::opnet::{BaselineModel, MitonetModel, Variant};
use rand::Rng;

pub fn act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Tanh => z.tanh(),
        Activation::Elu => {
            if z >= 0.0 {
                z
            } else {
                z.exp() - 1.0
            }
        }
        Activation::Relu => {
            if z > 0.0 {
                z
            } else {
                0.0
            }
        }
        Activation::Swish => z / (1.0 + (-z).exp()),
        Activation::Identity => z,
    }
}

pub fn dense(layer: &Dense, x: &[f64]) -> Vec<f64> {
    let w = &layer.weights;
    (0..w.rows())
        .map(|r| {
            let mut z = layer.bias[r];
            for c in 0..w.cols() {
                z += w.get(r, c) * x[c];
            }
            act(layer.activation, z)
        })
        .collect()
}

pub fn mlp(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for layer in net.layers() {
        h = dense(layer, &h);
    }
    h
}

/// Hidden layers mix `(1 − Ψ)·a + Ψ·b`; the last layer is plain.
pub fn gated(net: &Mlp, x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = net.layers().len();
    let mut h = x.to_vec();
    for (l, layer) in net.layers().iter().enumerate() {
        let g = dense(layer, &h);
        h = if l + 1 < n {
            (0..g.len()).map(|i| (1.0 - g[i]) * a[i] + g[i] * b[i]).collect()
        } else {
            g
        };
    }
    h
}

pub fn mitonet(model: &MitonetModel, branch_inputs: &[Vec<f64>], trunk_input: &[f64]) -> Vec<f64> {
    let u: Vec<Vec<f64>> = branch_inputs
        .iter()
        .zip(&model.branch_encoders)
        .map(|(x, e)| mlp(e, x))
        .collect();
    let w = mlp(&model.trunk_encoder, trunk_input);
    let q = w.len();
    let mut prod_u = vec![1.0; q];
    for uk in &u {
        for j in 0..q {
            prod_u[j] *= uk[j];
        }
    }
    let t = gated(&model.trunk, trunk_input, &prod_u, &w);
    let mut fused = t.clone();
    for ((x, net), uk) in branch_inputs.iter().zip(&model.branches).zip(&u) {
        let b = gated(net, x, uk, &w);
        for j in 0..fused.len() {
            fused[j] *= b[j];
        }
    }
    for j in 0..fused.len() {
        fused[j] += model.b0[j];
    }
    match &model.projection {
        Some(p) => (0..p.rows())
            .map(|r| (0..p.cols()).map(|c| p.get(r, c) * fused[c]).sum())
            .collect(),
        None => fused,
    }
}

/// One trunk point of a baseline; `node` is ignored by L-DON.
pub fn baseline(model: &BaselineModel, branch_inputs: &[Vec<f64>], lead: f64, node: usize) -> Vec<f64> {
    let trunk_in = if model.variant == Variant::LDon {
        vec![lead]
    } else {
        vec![model.coords[node], lead]
    };
    let (bs, t) = match (&model.variant, &model.encoders) {
        (Variant::MDon, Some((eb, et))) => {
            let u = mlp(eb, &branch_inputs[0]);
            let v = mlp(et, &trunk_in);
            (
                vec![gated(&model.branches[0], &branch_inputs[0], &u, &v)],
                gated(&model.trunk, &trunk_in, &u, &v),
            )
        }
        _ => (
            branch_inputs
                .iter()
                .zip(&model.branches)
                .map(|(x, n)| mlp(n, x))
                .collect(),
            mlp(&model.trunk, &trunk_in),
        ),
    };
    let mut prod = t;
    for b in &bs {
        for j in 0..prod.len() {
            prod[j] *= b[j];
        }
    }
    if model.variant == Variant::LDon {
        prod.iter().zip(&model.b0).map(|(a, c)| a + c).collect()
    } else {
        vec![prod.iter().sum::<f64>() + model.b0[0]]
    }
}

/// Overwrites every parameter with a uniform draw in `[-s, s]`.
pub fn randomize<M: Parameterized>(model: &mut M, s: f64, seed: u64) {
    let mut rng = seeded_rng(seed);
    for block in model.param_blocks_mut() {
        for v in block.iter_mut() {
            *v = rng.gen_range(-s..s);
        }
    }
}

pub fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Worst per-block relative error between backprop and central differences
/// of `L = c · net(x)` over a random tiny net.
pub fn mlp_fd_error(act: Activation, init: InitScheme, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let depth = rng.gen_range(1..=3);
    let sizes: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=16)).collect();
    let mut net = Mlp::random(&sizes, &vec![act; depth], init, &mut rng).unwrap();
    for layer in net.layers_mut() {
        for b in &mut layer.bias {
            *b = rng.gen_range(-0.5..0.5);
        }
    }
    let x = random_vec(&mut rng, sizes[0]);
    let c = random_vec(&mut rng, sizes[depth]);
    let loss = |n: &Mlp| -> f64 { mlp(n, &x).iter().zip(&c).map(|(y, c)| y * c).sum() };
    let (_, tape) = net.forward(&x).unwrap();
    let (grads, _) = net.backward(&tape, &c).unwrap();
    let analytic: Vec<Vec<f64>> = grads.grad_blocks().iter().map(|b| b.to_vec()).collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (b, block) in analytic.iter().enumerate() {
        let mut fd = vec![0.0; block.len()];
        for i in 0..block.len() {
            let mut plus = net.clone();
            plus.param_blocks_mut()[b][i] += h;
            let mut minus = net.clone();
            minus.param_blocks_mut()[b][i] -= h;
            fd[i] = (loss(&plus) - loss(&minus)) / (2.0 * h);
        }
        worst = worst.max(block_rel_error(block, &fd));
    }
    worst
}

/// `‖a − f‖ / max(‖a‖, ‖f‖, 1e-8)`.
pub fn block_rel_error(a: &[f64], f: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(f).map(|(x, y)| x - y));
    diff / norm(&mut a.iter().copied()).max(norm(&mut f.iter().copied())).max(1e-8)
}

/// `P·(B_1 ⊙ … ⊙ B_k ⊙ T + b0)` with explicit loops.
pub fn fuse(branches: &[Vec<f64>], trunk: &[f64], b0: &[f64], proj: Option<&Matrix>) -> Vec<f64> {
    let mut out = vec![0.0; trunk.len()];
    for j in 0..trunk.len() {
        let mut v = trunk[j];
        for b in branches {
            v *= b[j];
        }
        out[j] = v + b0[j];
    }
    match proj {
        Some(p) => (0..p.rows())
            .map(|r| (0..p.cols()).map(|c| p.get(r, c) * out[c]).sum())
            .collect(),
        None => out,
    }
}

pub fn oracle_rmse(s: &[Vec<f64>], p: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..s.len() {
        let mut acc = 0.0;
        for i in 0..s[j].len() {
            acc += (s[j][i] - p[j][i]).powi(2);
        }
        out.push((acc / s[j].len() as f64).sqrt());
    }
    out
}

pub fn oracle_nrmse(s: &[Vec<f64>], p: &[Vec<f64>]) -> Vec<f64> {
    let rmse = oracle_rmse(s, p);
    let mut out = Vec::new();
    for j in 0..s.len() {
        let mut hi = s[j][0];
        let mut lo = s[j][0];
        for i in 1..s[j].len() {
            if s[j][i] > hi {
                hi = s[j][i];
            }
            if s[j][i] < lo {
                lo = s[j][i];
            }
        }
        out.push(rmse[j] / (hi - lo));
    }
    out
}

pub fn oracle_mae(s: &[Vec<f64>], p: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..s[0].len() {
        let mut acc = 0.0;
        for j in 0..s.len() {
            acc += (s[j][i] - p[j][i]).abs();
        }
        out.push(acc / s.len() as f64);
    }
    out
}

pub fn oracle_acc(s: &[Vec<f64>], p: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for j in 0..s.len() {
        let n = s[j].len() as f64;
        let mut ms = 0.0;
        let mut mp = 0.0;
        for i in 0..s[j].len() {
            ms += s[j][i];
            mp += p[j][i];
        }
        ms /= n;
        mp /= n;
        let mut num = 0.0;
        let mut ds = 0.0;
        let mut dp = 0.0;
        for i in 0..s[j].len() {
            num += (s[j][i] - ms) * (p[j][i] - mp);
            ds += (s[j][i] - ms).powi(2);
            dp += (p[j][i] - mp).powi(2);
        }
        total += num / (ds * dp).sqrt();
    }
    total / s.len() as f64
}
