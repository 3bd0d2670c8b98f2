//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout.
//! Criteria 7-11 train the full toy tidal setup twice and take several minutes.
//! The process exits non-zero on a FAIL only with `ACCEPTANCE_STRICT=1`.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use mitonet::bundler::{
    make_bundles, rollout, subtrajectory_count, IdentityEmulator, OracleEmulator, RolloutConfig, RolloutIc,
};
use mitonet::experiment::{coldstart_check, run_experiment, ExperimentConfig, Protocol, RunReport};
use mitonet::latentae::{AutoencoderConfig, Normalizer, TrainedAutoencoder};
use mitonet::metrics::{acc, acc_series, mae_field, nrmse_series, rmse_series};
use mitonet::numkit::{seeded_rng, Activation, BatchObjective, InitScheme, Matrix, Mlp, Parameterized, Regularizer};
use mitonet::opnet::{
    encoder_embeddings, fuse, gated_forward, BaselineConfig, BaselineModel, BaselineSample, MitonetConfig,
    MitonetModel, OperatorSample, OperatorScaling, SampleModel, SampleObjective, Variant,
};
use mitonet::swegen::{swe_step, BoundaryValues, Channel1D, SweState};
use rand::Rng;

use common::{block_rel_error, max_abs_diff, random_vec};

type Outcome = (bool, String);

const BASELINES: [Variant; 4] = [Variant::Don, Variant::MDon, Variant::LDon, Variant::MioNet];

/// Relative error of the full analytic gradient against central differences of `loss`.
///
/// Blocks whose entries sit near 1e-7 carry ~1e-12 of FD roundoff, so the
/// norm is taken over the whole parameter vector rather than per block.
fn fd_error<M: Parameterized + Clone>(model: &M, analytic: &[Vec<f64>], loss: impl Fn(&M) -> f64) -> f64 {
    let h = 1e-5;
    let mut fd = Vec::new();
    for (b, block) in analytic.iter().enumerate() {
        for i in 0..block.len() {
            let mut plus = model.clone();
            plus.param_blocks_mut()[b][i] += h;
            let mut minus = model.clone();
            minus.param_blocks_mut()[b][i] -= h;
            fd.push((loss(&plus) - loss(&minus)) / (2.0 * h));
        }
    }
    block_rel_error(&analytic.concat(), &fd)
}

/// Initializers leave biases at zero; random biases keep pre-activations off
/// the ReLU kink and away from the flat centre of the gated products.
fn jitter_biases<'a, R: Rng>(nets: impl Iterator<Item = &'a mut Mlp>, rng: &mut R) {
    for net in nets {
        for layer in net.layers_mut() {
            layer.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        }
    }
}

fn mitonet_fd(act: Activation, init: InitScheme, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let mut cfg = MitonetConfig::toy(3, 1, 3);
    cfg.width_factor = 1;
    cfg.encoder_factor = 1;
    cfg.layers = 2;
    cfg.activation = act;
    cfg.init = init;
    cfg.projection_dim = if seed % 2 == 0 { Some(2) } else { None };
    cfg.seed = seed;
    let mut m = MitonetModel::new(&cfg, OperatorScaling::identity(3, 1)).unwrap();
    m.b0.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    let nets = m.branches.iter_mut().chain(&mut m.branch_encoders).chain([&mut m.trunk, &mut m.trunk_encoder]);
    jitter_biases(nets, &mut rng);
    let samples: Vec<OperatorSample> = (0..2)
        .map(|_| OperatorSample {
            branch_inputs: m.branches.iter().map(|b| random_vec(&mut rng, b.input_dim())).collect(),
            trunk_input: vec![rng.gen_range(0.0..1.0)],
            target: random_vec(&mut rng, 3),
        })
        .collect();
    let obj = SampleObjective::<MitonetModel> { train: &samples, val: &[], reg: Regularizer::NONE };
    let batch = [0, 1];
    let (_, grads) = obj.batch_loss_grad(&m, &batch).unwrap();
    let blocks = split_blocks(&m, &grads.flatten());
    fd_error(&m, &blocks, |m| obj.batch_loss_grad(m, &batch).unwrap().0)
}

fn baseline_fd(variant: Variant, act: Activation, init: InitScheme, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let state_dim = if variant == Variant::LDon { 3 } else { 4 };
    let mut cfg = BaselineConfig::toy(variant, state_dim, 1, 2);
    cfg.width = 3;
    if variant != Variant::LDon {
        cfg.p = 3;
    }
    cfg.activation = act;
    cfg.init = init;
    cfg.seed = seed;
    let coords = (0..state_dim).map(|i| i as f64 / (state_dim - 1) as f64).collect();
    let mut m = BaselineModel::new(&cfg, OperatorScaling::identity(state_dim, 1), coords).unwrap();
    m.b0.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    let (enc_u, enc_v) = match m.encoders.as_mut() {
        Some((u, v)) => (Some(u), Some(v)),
        None => (None, None),
    };
    let nets = m.branches.iter_mut().chain([&mut m.trunk]).chain(enc_u).chain(enc_v);
    jitter_biases(nets, &mut rng);
    let samples: Vec<BaselineSample> = (0..2)
        .map(|_| BaselineSample {
            branch_inputs: m.branches.iter().map(|b| random_vec(&mut rng, b.input_dim())).collect(),
            lead: rng.gen_range(0.0..1.0),
            nodes: if variant == Variant::LDon { vec![] } else { vec![0, 2, 3] },
            target: random_vec(&mut rng, 3),
        })
        .collect();
    let mut grads = m.zero_grads();
    for s in &samples {
        m.sample_loss_grad(s, 1.0, &mut grads).unwrap();
    }
    let blocks = split_blocks(&m, &grads.flatten());
    fd_error(&m, &blocks, |m| samples.iter().map(|s| m.sample_loss(s).unwrap()).sum())
}

fn split_blocks<M: Parameterized>(m: &M, flat: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut off = 0;
    for b in m.param_blocks() {
        out.push(flat[off..off + b.len()].to_vec());
        off += b.len();
    }
    assert_eq!(off, flat.len());
    out
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut nets = 0;
    for act in Activation::ALL {
        for init in InitScheme::ALL {
            for k in 0..20u64 {
                let seed = 1000 * act.code() as u64 + 100 * k + init as u64;
                worst = worst.max(common::mlp_fd_error(act, init, seed));
                worst = worst.max(mitonet_fd(act, init, seed));
                for v in BASELINES {
                    worst = worst.max(baseline_fd(v, act, init, seed));
                }
                nets += 6;
            }
        }
    }
    (worst < 1e-6, format!("{nets} nets (dense, gated operator, 4 baselines; 5 activations x 4 inits), worst rel err {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let mut rng = seeded_rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.gen_range(1..4);
        let p = rng.gen_range(1..6);
        let branches: Vec<Vec<f64>> = (0..k).map(|_| random_vec(&mut rng, p)).collect();
        let (t, b0) = (random_vec(&mut rng, p), random_vec(&mut rng, p));
        let proj = Matrix::from_vec(2, p, random_vec(&mut rng, 2 * p)).unwrap();
        for m in [None, Some(&proj)] {
            worst = worst.max(max_abs_diff(&fuse(&branches, &t, &b0, m).unwrap(), &common::fuse(&branches, &t, &b0, m)));
        }

        let net = Mlp::random(&[3, 4, 4, 2], &[Activation::Tanh, Activation::Swish, Activation::Elu], InitScheme::HeNormal, &mut rng)
            .unwrap();
        let (x, a, b) = (random_vec(&mut rng, 3), random_vec(&mut rng, 4), random_vec(&mut rng, 4));
        worst = worst.max(max_abs_diff(&gated_forward(&net, &x, &a, &b).unwrap(), &common::gated(&net, &x, &a, &b)));
    }
    for seed in 0..50u64 {
        let mut cfg = MitonetConfig::toy(3, 1, 5);
        cfg.width_factor = 1;
        cfg.encoder_factor = 1;
        cfg.layers = 2;
        cfg.projection_dim = if seed % 2 == 0 { Some(2) } else { None };
        cfg.seed = seed;
        let mut m = MitonetModel::new(&cfg, OperatorScaling::identity(3, 1)).unwrap();
        common::randomize(&mut m, 0.8, seed + 100);
        let inputs: Vec<Vec<f64>> = m.branches.iter().map(|b| random_vec(&mut rng, b.input_dim())).collect();
        let trunk = vec![rng.gen_range(0.0..1.0)];
        let (u, w) = encoder_embeddings(&m, &inputs, &trunk).unwrap();
        for ((uk, x), e) in u.iter().zip(&inputs).zip(&m.branch_encoders) {
            worst = worst.max(max_abs_diff(uk, &common::mlp(e, x)));
        }
        worst = worst.max(max_abs_diff(&w, &common::mlp(&m.trunk_encoder, &trunk)));
        let (y, _) = m.forward_scaled(&inputs, &trunk).unwrap();
        worst = worst.max(max_abs_diff(&y, &common::mitonet(&m, &inputs, &trunk)));

        for variant in BASELINES {
            let state_dim = if variant == Variant::LDon { 3 } else { 4 };
            let mut cfg = BaselineConfig::toy(variant, state_dim, 2, 2);
            cfg.width = 3;
            if variant != Variant::LDon {
                cfg.p = 3;
            }
            cfg.seed = seed;
            let coords = (0..state_dim).map(|i| i as f64 / (state_dim - 1) as f64).collect();
            let mut b = BaselineModel::new(&cfg, OperatorScaling::identity(state_dim, 2), coords).unwrap();
            common::randomize(&mut b, 0.8, seed + 7);
            let inputs: Vec<Vec<f64>> = b.branches.iter().map(|n| random_vec(&mut rng, n.input_dim())).collect();
            let lead = rng.gen_range(0.0..1.0);
            let all = b.predict_scaled(&inputs, lead, None).unwrap();
            if variant == Variant::LDon {
                worst = worst.max(max_abs_diff(&all, &common::baseline(&b, &inputs, lead, 0)));
            } else {
                for (i, v) in all.iter().enumerate() {
                    worst = worst.max((v - common::baseline(&b, &inputs, lead, i)[0]).abs());
                }
            }
        }
    }
    (worst <= 1e-12, format!("fusion, gating, embeddings, operator, 4 baselines x50 each; max abs diff {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut rng = seeded_rng(3);
    let mut pairs = vec![(2880, 5)];
    while pairs.len() < 21 {
        let n_t = rng.gen_range(2..300);
        pairs.push((n_t, rng.gen_range(1..n_t)));
    }
    let mut ok = subtrajectory_count(2880, 5).ok() == Some(2876);
    for &(n_t, tau) in &pairs {
        let traj: Vec<Vec<f64>> = (0..n_t).map(|i| vec![i as f64]).collect();
        let b = make_bundles(&traj, &[vec![0.0; n_t]], 0.01, tau).unwrap();
        let anchors: std::collections::BTreeSet<usize> = b.iter().map(|s| s.anchor).collect();
        // Anchors 0..=N_t−τ−1 carry targets; the final window starts at N_t−τ.
        ok &= subtrajectory_count(n_t, tau).ok() == Some(n_t - tau + 1) && anchors.len() == n_t - tau;
    }
    (ok, format!("(2880, 5) -> {} plus {} random pairs", subtrajectory_count(2880, 5).unwrap(), pairs.len() - 1))
}

fn criterion_4() -> Outcome {
    let mut cfg = AutoencoderConfig::toy(8, 3);
    cfg.layers = 2;
    cfg.fit.seed = 4;
    let ae = TrainedAutoencoder::random(&cfg, Normalizer::identity(8)).unwrap();
    let mut rng = seeded_rng(4);
    let truth: Vec<Vec<f64>> = (0..260).map(|_| random_vec(&mut rng, 3)).collect();
    let stub = OracleEmulator { truth: truth.clone(), tau: 5, latent: true };
    let bc = vec![vec![0.0; 260]];
    let start = 17;
    let rc = RolloutConfig { horizon: 200, tau_infer: 5, reencode: false };
    let out = rollout(&stub, Some(&ae), RolloutIc::State(truth[start].clone()), &bc, start, 0.01, &rc).unwrap();
    let worst = out
        .physical
        .iter()
        .enumerate()
        .map(|(j, col)| max_abs_diff(col, &ae.decode(&truth[start + 1 + j]).unwrap()))
        .fold(0.0, f64::max);

    let ic = random_vec(&mut rng, 5);
    let id = IdentityEmulator { tau: 5, latent: false };
    let rc = RolloutConfig { horizon: 200, tau_infer: 5, reencode: false };
    let flat = rollout(&id, None, RolloutIc::Physical(ic.clone()), &[vec![1.0; 260]], 2, 0.01, &rc).unwrap();
    let constant = flat.physical.iter().all(|c| c == &ic);
    (worst <= 1e-12 && constant, format!("oracle max diff {worst:.2e} over 200 steps; identity constant: {constant}"))
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut inv: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = seeded_rng(seed);
        let mut field = || -> Vec<Vec<f64>> { (0..8).map(|_| (0..10).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect() };
        let (s, p) = (field(), field());
        worst = worst.max(max_abs_diff(&rmse_series(&s, &p).unwrap(), &common::oracle_rmse(&s, &p)));
        worst = worst.max(max_abs_diff(&nrmse_series(&s, &p).unwrap(), &common::oracle_nrmse(&s, &p)));
        worst = worst.max(max_abs_diff(&mae_field(&s, &p).unwrap(), &common::oracle_mae(&s, &p)));
        worst = worst.max((acc(&s, &p).unwrap() - common::oracle_acc(&s, &p)).abs());

        let base = acc_series(&s, &p).unwrap();
        let shift = rng.gen_range(-50.0..50.0);
        let alpha = rng.gen_range(0.01..100.0);
        let shifted: Vec<Vec<f64>> = p.iter().map(|c| c.iter().map(|v| v + shift).collect()).collect();
        let scaled: Vec<Vec<f64>> = p.iter().map(|c| c.iter().map(|v| alpha * v).collect()).collect();
        inv = inv.max(max_abs_diff(&acc_series(&s, &shifted).unwrap(), &base));
        inv = inv.max(max_abs_diff(&acc_series(&s, &scaled).unwrap(), &base));
    }
    (
        worst <= 1e-12 && inv <= 1e-12,
        format!("100 pairs 10x8: oracle diff {worst:.2e}; ACC shift/scale deviation {inv:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let ch = Channel1D::linear_slope(40, 20_000.0, 8.0, 3.0).unwrap();
    let x = ch.unit_coordinates();
    let zeta = x.iter().map(|&s| 0.4 * (-((s - 0.3) / 0.1).powi(2)).exp()).collect();
    let s0 = SweState::new(&ch, zeta, vec![0.0; ch.nodes()]).unwrap();

    let m0 = s0.mass(&ch);
    let energy = |s: &SweState| s.kinetic_energy(&ch) + s.potential_energy(&ch);
    let mut s = s0.clone();
    let mut prev = energy(&s);
    let mut monotone = true;
    for k in 0..1000 {
        s = swe_step(&s, &ch, &BoundaryValues::CLOSED, 0.02, 30.0, k).unwrap();
        let e = energy(&s);
        monotone &= e <= prev * (1.0 + 1e-12);
        prev = e;
    }
    let drift = (s.mass(&ch) - m0).abs() / m0;

    let rest = SweState::rest(&ch);
    let mut r = rest.clone();
    for k in 0..1000 {
        r = swe_step(&r, &ch, &BoundaryValues::CLOSED, 0.02, 30.0, k).unwrap();
    }
    let fixed = r == rest;
    (
        drift < 1e-8 && fixed && monotone,
        format!("mass drift {drift:.2e} over 1000 steps; rest fixed point: {fixed}; energy monotone: {monotone}"),
    )
}

/// Every CSV and the JSON summary under `dir`, keyed by relative path.
fn report_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if matches!(p.extension().and_then(|x| x.to_str()), Some("csv") | Some("json"))
                && !p.ends_with("timings.json")
            {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn toy_run(dir: &Path) -> RunReport {
    let mut cfg = ExperimentConfig::default();
    cfg.output_dir = dir.to_path_buf();
    cfg.baselines.variants = vec![Variant::Don];
    run_experiment(&cfg, &[Protocol::Evaluate, Protocol::Compare, Protocol::Coldstart], None).unwrap()
}

fn end_to_end() -> Vec<(usize, Outcome)> {
    let t0 = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let report = toy_run(a.path());
    let first = t0.elapsed().as_secs_f64();
    let cfg = &report.config;
    let horizon = cfg.protocol.horizon;
    let mut out = Vec::new();

    let mut ok = true;
    let mut detail = Vec::new();
    for &r in &cfg.split.test_r {
        let e = report.find("evaluate", "MITONet", "H", r, "base").unwrap();
        ok &= e.horizon >= 200 && e.metrics.acc >= 0.9 && e.metrics.mean_nrmse <= 0.05;
        detail.push(format!("r={r}: ACC {:.4} NRMSE {:.4}", e.metrics.acc, e.metrics.mean_nrmse));
    }
    out.push((7, (ok, format!("H, {horizon} steps from day {}; {}; run {first:.0}s", cfg.split.test_start_day, detail.join(", ")))));

    let (mut ok, mut detail) = (true, Vec::new());
    for &r in &cfg.split.test_r {
        let m = report.find("compare", "MITONet", "H", r, "long").unwrap().metrics.mean_rmse;
        let d = report.find("compare", "DON", "H", r, "long").unwrap().metrics.mean_rmse;
        ok &= m <= d;
        detail.push(format!("r={r}: MITONet {m:.4} vs DON {d:.4}"));
    }
    out.push((8, (ok, format!("long-rollout mean RMSE, {}", detail.join(", ")))));

    let (mut ok, mut detail) = (true, Vec::new());
    for &r in &cfg.split.test_r {
        let base = report.find("evaluate", "MITONet", "H", r, "base").unwrap();
        let long = report.find("evaluate", "MITONet", "H", r, "long").unwrap();
        let growth = long.metrics.mean_rmse / base.metrics.mean_rmse - 1.0;
        ok &= long.horizon == 3 * base.horizon && growth < 0.25;
        detail.push(format!("r={r}: {:+.1}%", 100.0 * growth));
    }
    out.push((9, (ok, format!("RMSE growth base -> {}x horizon, {}", cfg.protocol.long_factor, detail.join(", ")))));

    let (mut ok, mut detail) = (true, Vec::new());
    for &r in &cfg.split.test_r {
        let c = coldstart_check(&report, "H", r).unwrap();
        ok &= c.passes();
        detail.push(format!(
            "r={r}: cold {:.4} / hot {:.4}, ramp slope {:.2e}",
            c.cold_steady, c.hot_steady, c.ramp_slope
        ));
    }
    out.push((10, (ok, detail.join(", "))));

    let b = tempfile::tempdir().unwrap();
    toy_run(b.path());
    let (fa, fb) = (report_files(a.path()), report_files(b.path()));
    let differing: Vec<&String> = fa.keys().filter(|k| fb.get(*k) != fa.get(*k)).collect();
    let ok = fa.len() == fb.len() && differing.is_empty() && fa.keys().any(|k| k.ends_with(".csv"));
    out.push((11, (ok, format!("{} report files compared, {} differ", fa.len(), differing.len()))));
    out
}

fn main() -> ExitCode {
    let quick: [(usize, fn() -> Outcome); 6] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
    ];
    let mut failed = 0;
    let mut report = |id: usize, (ok, detail): Outcome| {
        println!("{} criterion {id:>2}: {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    };
    for (id, f) in quick {
        report(id, f());
    }
    for (id, outcome) in end_to_end() {
        report(id, outcome);
    }
    println!("acceptance: {}/11 PASS", 11 - failed);
    if failed == 0 || std::env::var("ACCEPTANCE_STRICT").map_or(true, |v| v != "1") {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
