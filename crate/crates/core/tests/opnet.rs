mod common;

use mitonet::numkit::{
    seeded_rng, Activation, Dense, InitScheme, Matrix, Mlp, Parameterized, RegKind, Regularizer,
};
use mitonet::opnet::*;
use mitonet::Error;
use proptest::prelude::*;
use rand::Rng;

use common::{max_abs_diff, random_vec, randomize};

fn tiny_mitonet(projection: Option<usize>, seed: u64) -> MitonetModel {
    let mut cfg = MitonetConfig::toy(3, 1, 5);
    cfg.width_factor = 1;
    cfg.encoder_factor = 1;
    cfg.layers = 2;
    cfg.projection_dim = projection;
    cfg.seed = seed;
    let mut m = MitonetModel::new(&cfg, OperatorScaling::identity(3, 1)).unwrap();
    randomize(&mut m, 0.8, seed + 100);
    m
}

fn mitonet_inputs<R: Rng>(m: &MitonetModel, rng: &mut R) -> (Vec<Vec<f64>>, Vec<f64>) {
    let inputs = m.branches.iter().map(|b| random_vec(rng, b.input_dim())).collect();
    (inputs, vec![rng.gen_range(0.0..1.0)])
}

fn tiny_baseline(variant: Variant, seed: u64) -> BaselineModel {
    let state_dim = if variant == Variant::LDon { 3 } else { 4 };
    let mut cfg = BaselineConfig::toy(variant, state_dim, 2, 2);
    cfg.width = 3;
    if variant != Variant::LDon {
        cfg.p = 3;
    }
    cfg.seed = seed;
    let coords = (0..state_dim).map(|i| i as f64 / (state_dim - 1) as f64).collect();
    let mut m = BaselineModel::new(&cfg, OperatorScaling::identity(state_dim, 2), coords).unwrap();
    randomize(&mut m, 0.8, seed + 7);
    m
}

fn baseline_inputs<R: Rng>(m: &BaselineModel, rng: &mut R) -> Vec<Vec<f64>> {
    m.branches.iter().map(|b| random_vec(rng, b.input_dim())).collect()
}

fn constant_net(input: usize, output: usize, bias: f64, act: Activation) -> Dense {
    Dense::new(Matrix::zeros(output, input), vec![bias; output], act).unwrap()
}

#[test]
fn fuse_hand_examples() {
    let out = fuse(&[vec![1.0; 3]], &[1.0; 3], &[0.0; 3], None).unwrap();
    assert_eq!(out, vec![1.0; 3]);
    let out = fuse(&[vec![2.0, 3.0], vec![4.0, 5.0]], &[1.0, 0.5], &[0.1, 0.2], None).unwrap();
    assert!(max_abs_diff(&out, &[8.1, 7.7]) < 1e-12);
}

#[test]
fn fuse_applies_projection_and_rejects_mismatch() {
    let p = Matrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap();
    let out = fuse(&[vec![2.0, 3.0]], &[1.0, 1.0], &[0.0, 0.0], Some(&p)).unwrap();
    assert_eq!(out, vec![-1.0]);
    assert!(matches!(
        fuse(&[vec![1.0, 2.0, 3.0]], &[1.0, 1.0], &[0.0, 0.0], None),
        Err(Error::Shape(_))
    ));
    assert!(matches!(fuse(&[], &[1.0], &[0.0], None), Err(Error::Shape(_))));
}

proptest! {
    #[test]
    fn fuse_is_invariant_to_branch_order(
        a in prop::collection::vec(-5.0f64..5.0, 4),
        b in prop::collection::vec(-5.0f64..5.0, 4),
        c in prop::collection::vec(-5.0f64..5.0, 4),
        t in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let b0 = [0.5, -0.5, 0.0, 1.0];
        let x = fuse(&[a.clone(), b.clone(), c.clone()], &t, &b0, None).unwrap();
        let y = fuse(&[c, a, b], &t, &b0, None).unwrap();
        prop_assert!(max_abs_diff(&x, &y) < 1e-12);
    }

    #[test]
    fn gating_with_equal_mix_vectors_ignores_input(
        x in prop::collection::vec(-3.0f64..3.0, 2),
        c in prop::collection::vec(-2.0f64..2.0, 3),
        seed in 0u64..1000,
    ) {
        let mut rng = seeded_rng(seed);
        let net = Mlp::random(&[2, 3, 3, 2], &[Activation::Tanh, Activation::Tanh, Activation::Identity],
            InitScheme::GlorotNormal, &mut rng).unwrap();
        let y = gated_forward(&net, &x, &c, &c).unwrap();
        let expect = common::dense(&net.layers()[2], &c);
        prop_assert!(max_abs_diff(&y, &expect) < 1e-12);
    }
}

#[test]
fn closed_and_open_gates_select_mix_vectors() {
    let a = vec![0.3, -0.7];
    let b = vec![1.5, 2.0];
    let last = Dense::new(Matrix::identity(2), vec![0.0; 2], Activation::Identity).unwrap();
    for (bias, expect) in [(0.0, &a), (40.0, &b)] {
        let net = Mlp::new(vec![
            constant_net(3, 2, bias, Activation::Tanh),
            constant_net(2, 2, bias, Activation::Tanh),
            last.clone(),
        ])
        .unwrap();
        let (y, tape) = gated_forward_taped(&net, &[1.0, -2.0, 0.5], &a, &b, false).unwrap();
        assert_eq!(&tape.inputs[1], expect);
        assert_eq!(&tape.inputs[2], expect);
        assert_eq!(&y, expect);
    }
}

#[test]
fn gated_forward_matches_reference_recurrence() {
    let mut rng = seeded_rng(11);
    for _ in 0..50 {
        let net = Mlp::random(
            &[3, 4, 4, 2],
            &[Activation::Tanh, Activation::Swish, Activation::Elu],
            InitScheme::HeNormal,
            &mut rng,
        )
        .unwrap();
        let (x, a, b) = (random_vec(&mut rng, 3), random_vec(&mut rng, 4), random_vec(&mut rng, 4));
        let y = gated_forward(&net, &x, &a, &b).unwrap();
        assert!(max_abs_diff(&y, &common::gated(&net, &x, &a, &b)) < 1e-12);
    }
}

#[test]
fn gated_width_mismatch_is_a_config_error() {
    let mut rng = seeded_rng(1);
    let net = Mlp::random(&[2, 5, 3], &[Activation::Tanh, Activation::Identity], InitScheme::GlorotNormal, &mut rng)
        .unwrap();
    assert!(matches!(check_gated(&net, 4, false), Err(Error::Config(_))));
    assert!(check_gated(&net, 5, false).is_ok());
    assert!(matches!(check_gated(&net, 5, true), Err(Error::Config(_))));
}

#[test]
fn model_build_enforces_dimension_contract() {
    let mut m = tiny_mitonet(None, 1);
    assert!(m.check().is_ok());
    let mut rng = seeded_rng(2);
    m.trunk = Mlp::random(&[1, 5, 3], &[Activation::Tanh, Activation::Identity], InitScheme::GlorotNormal, &mut rng)
        .unwrap();
    assert!(matches!(m.check(), Err(Error::Config(_))));

    let mut cfg = MitonetConfig::toy(3, 1, 5);
    cfg.gate_final = true;
    assert!(matches!(MitonetModel::new(&cfg, OperatorScaling::identity(3, 1)), Err(Error::Config(_))));
    let cfg = MitonetConfig::toy(3, 1, 5);
    assert!(matches!(MitonetModel::new(&cfg, OperatorScaling::identity(4, 1)), Err(Error::Config(_))));
}

#[test]
fn toy_model_dimensions() {
    let m = MitonetModel::new(&MitonetConfig::toy(8, 1, 5), OperatorScaling::identity(8, 1)).unwrap();
    assert_eq!((m.k(), m.q(), m.p(), m.n_r()), (3, 32, 8, 8));
    assert_eq!(m.trunk.input_dim(), 1);
    let (inputs, trunk) = m.scaled_inputs(&[0.1; 8], &[0.2], 0.01, 5.0).unwrap();
    assert_eq!(trunk, vec![1.0]);
    assert_eq!(inputs.iter().map(Vec::len).collect::<Vec<_>>(), vec![8, 1, 1]);
}

#[test]
fn zero_encoders_give_zero_embeddings() {
    let mut m = tiny_mitonet(None, 3);
    for e in m.branch_encoders.iter_mut().chain(std::iter::once(&mut m.trunk_encoder)) {
        for block in e.param_blocks_mut() {
            block.fill(0.0);
        }
    }
    let mut rng = seeded_rng(4);
    let (inputs, trunk) = mitonet_inputs(&m, &mut rng);
    let (u, w) = encoder_embeddings(&m, &inputs, &trunk).unwrap();
    assert_eq!(u.len(), 3);
    for v in u.iter().chain(std::iter::once(&w)) {
        assert_eq!(v, &vec![0.0; m.q()]);
    }
}

#[test]
fn embeddings_match_direct_network_evaluation() {
    let mut rng = seeded_rng(5);
    for seed in 0..50 {
        let m = tiny_mitonet(None, seed);
        let (inputs, trunk) = mitonet_inputs(&m, &mut rng);
        let (u, w) = encoder_embeddings(&m, &inputs, &trunk).unwrap();
        for ((uk, x), e) in u.iter().zip(&inputs).zip(&m.branch_encoders) {
            assert!(max_abs_diff(uk, &e.predict(x).unwrap()) < 1e-15);
            assert!(max_abs_diff(uk, &common::mlp(e, x)) < 1e-12);
        }
        assert!(max_abs_diff(&w, &m.trunk_encoder.predict(&trunk).unwrap()) < 1e-15);
    }
    let m = tiny_mitonet(None, 0);
    assert!(matches!(encoder_embeddings(&m, &[vec![0.0; 3]], &[0.0]), Err(Error::Shape(_))));
}

#[test]
fn forward_matches_composition_oracle() {
    let mut rng = seeded_rng(6);
    for seed in 0..50 {
        for proj in [None, Some(2)] {
            let m = tiny_mitonet(proj, seed);
            let (inputs, trunk) = mitonet_inputs(&m, &mut rng);
            let (y, _) = m.forward_scaled(&inputs, &trunk).unwrap();
            assert_eq!(y.len(), 3);
            assert!(max_abs_diff(&y, &common::mitonet(&m, &inputs, &trunk)) < 1e-12);
        }
    }
}

#[test]
fn forward_is_pure() {
    let m = tiny_mitonet(None, 9);
    let before = m.clone();
    let y1 = mitonet_forward(&m, &[0.1, 0.2, 0.3], &[0.5], 0.01, 2.0).unwrap();
    let y2 = mitonet_forward(&m, &[0.1, 0.2, 0.3], &[0.5], 0.01, 2.0).unwrap();
    assert_eq!(y1, y2);
    assert_eq!(m, before);
}

#[test]
fn non_finite_output_is_divergence() {
    let mut m = tiny_mitonet(None, 2);
    m.b0[0] = f64::NAN;
    assert!(matches!(
        mitonet_forward(&m, &[0.0; 3], &[0.0], 0.01, 1.0),
        Err(Error::Divergence(_))
    ));
}

/// Central differences of `loss` over every parameter, compared per block.
fn check_gradient<M, F>(model: &M, analytic: &[f64], loss: F, label: &str)
where
    M: Parameterized + Clone,
    F: Fn(&M) -> f64,
{
    let h = 1e-5;
    let sizes: Vec<usize> = model.param_blocks().iter().map(|b| b.len()).collect();
    let mut offset = 0;
    for (bi, &n) in sizes.iter().enumerate() {
        let mut fd = Vec::with_capacity(n);
        for j in 0..n {
            let mut plus = model.clone();
            plus.param_blocks_mut()[bi][j] += h;
            let mut minus = model.clone();
            minus.param_blocks_mut()[bi][j] -= h;
            fd.push((loss(&plus) - loss(&minus)) / (2.0 * h));
        }
        let an = &analytic[offset..offset + n];
        let diff: f64 = fd.iter().zip(an).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        assert!(diff / norm < 1e-5, "{label}: block {bi} relative error {}", diff / norm);
        offset += n;
    }
    assert_eq!(offset, analytic.len());
}

#[test]
fn mitonet_gradient_matches_finite_differences() {
    let mut rng = seeded_rng(21);
    for proj in [None, Some(2)] {
        for act in [Activation::Tanh, Activation::Swish] {
            let mut cfg = MitonetConfig::toy(3, 2, 5);
            cfg.width_factor = 1;
            cfg.encoder_factor = 1;
            cfg.encoder_layers = 2;
            cfg.projection_dim = proj;
            cfg.activation = act;
            let mut m = MitonetModel::new(&cfg, OperatorScaling::identity(3, 2)).unwrap();
            randomize(&mut m, 0.7, 5);
            let samples: Vec<OperatorSample> = (0..3)
                .map(|_| {
                    let (branch_inputs, trunk_input) = mitonet_inputs(&m, &mut rng);
                    OperatorSample { branch_inputs, trunk_input, target: random_vec(&mut rng, 3) }
                })
                .collect();
            let reg = Regularizer { kind: RegKind::L2, lambda: 1e-3 };
            let obj = SampleObjective::<MitonetModel> { train: &samples, val: &[], reg };
            let batch = [0, 1, 2];
            let (_, grads) = mitonet::numkit::BatchObjective::batch_loss_grad(&obj, &m, &batch).unwrap();
            let loss = |m: &MitonetModel| {
                mitonet::numkit::BatchObjective::batch_loss_grad(&obj, m, &batch).unwrap().0
            };
            check_gradient(&m, &grads.flatten(), loss, &format!("{proj:?}/{act}"));
        }
    }
}

#[test]
fn baseline_gradients_match_finite_differences() {
    let mut rng = seeded_rng(22);
    for variant in [Variant::Don, Variant::MDon, Variant::LDon, Variant::MioNet] {
        let m = tiny_baseline(variant, 3);
        let samples: Vec<BaselineSample> = (0..2)
            .map(|_| {
                let nodes = if variant == Variant::LDon { vec![] } else { vec![0, 2, 3] };
                BaselineSample {
                    branch_inputs: baseline_inputs(&m, &mut rng),
                    lead: rng.gen_range(0.0..1.0),
                    nodes,
                    target: random_vec(&mut rng, 3),
                }
            })
            .collect();
        let mut grads = m.zero_grads();
        for s in &samples {
            m.sample_loss_grad(s, 0.5, &mut grads).unwrap();
        }
        let loss = |m: &BaselineModel| samples.iter().map(|s| m.sample_loss(s).unwrap()).sum::<f64>() * 0.5;
        check_gradient(&m, &grads.flatten(), loss, variant.name());
    }
}

#[test]
fn baselines_match_reference_evaluators() {
    let mut rng = seeded_rng(23);
    for variant in [Variant::Don, Variant::MDon, Variant::LDon, Variant::MioNet] {
        for seed in 0..50 {
            let m = tiny_baseline(variant, seed);
            let inputs = baseline_inputs(&m, &mut rng);
            let lead = rng.gen_range(0.0..1.0);
            let all = m.predict_scaled(&inputs, lead, None).unwrap();
            if variant == Variant::LDon {
                assert!(max_abs_diff(&all, &common::baseline(&m, &inputs, lead, 0)) < 1e-12);
            } else {
                assert_eq!(all.len(), 4);
                for (i, v) in all.iter().enumerate() {
                    let r = common::baseline(&m, &inputs, lead, i);
                    assert!((v - r[0]).abs() < 1e-12, "{variant} node {i}");
                    let single = baseline_forward(&m, &inputs, lead, Some(i)).unwrap();
                    assert_eq!(single, vec![*v]);
                }
            }
        }
    }
}

#[test]
fn don_with_unit_networks_sums_to_p() {
    let mut cfg = BaselineConfig::toy(Variant::Don, 2, 1, 2);
    cfg.p = 4;
    let mut m = BaselineModel::new(&cfg, OperatorScaling::identity(2, 1), vec![0.0, 1.0]).unwrap();
    for net in [&mut m.branches[0], &mut m.trunk] {
        for block in net.param_blocks_mut() {
            block.fill(0.0);
        }
        net.layers_mut().last_mut().unwrap().bias.fill(1.0);
    }
    let y = m.predict_scaled(&[vec![0.3; 5]], 0.5, None).unwrap();
    assert_eq!(y, vec![4.0, 4.0]);
}

#[test]
fn mdon_with_equal_embeddings_reduces_to_final_layers() {
    let mut m = tiny_baseline(Variant::MDon, 4);
    let c = 0.37f64;
    let (eb, et) = m.encoders.as_mut().unwrap();
    for e in [eb, et] {
        for block in e.param_blocks_mut() {
            block.fill(0.0);
        }
        e.layers_mut()[0].bias.fill(c.atanh());
    }
    let shared = vec![c.atanh().tanh(); 3];
    let b = common::dense(m.branches[0].layers().last().unwrap(), &shared);
    let t = common::dense(m.trunk.layers().last().unwrap(), &shared);
    let expect = b.iter().zip(&t).map(|(x, y)| x * y).sum::<f64>() + m.b0[0];
    let mut rng = seeded_rng(8);
    for _ in 0..5 {
        let inputs = baseline_inputs(&m, &mut rng);
        let y = m.predict_scaled(&inputs, rng.gen_range(0.0..1.0), None).unwrap();
        for v in y {
            assert!((v - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn baseline_layouts_consume_ic_windows_and_r() {
    let don = BaselineConfig::toy(Variant::Don, 64, 1, 5);
    assert_eq!(don.branch_input_dims(), vec![64 + 5 + 1]);
    assert_eq!(don.trunk_input_dim(), 2);
    let mio = BaselineConfig::toy(Variant::MioNet, 64, 2, 5);
    assert_eq!(mio.branch_input_dims(), vec![64, 5, 5, 1]);
    let ldon = BaselineConfig::toy(Variant::LDon, 8, 1, 5);
    assert_eq!(ldon.branch_input_dims(), vec![8 + 5 + 1]);
    assert_eq!(ldon.trunk_input_dim(), 1);
    assert_eq!(ldon.p, 8);

    let m = tiny_baseline(Variant::Don, 0);
    assert!(matches!(m.scaled_inputs(&[0.0; 4], &[vec![0.0; 2]], 0.01), Err(Error::Shape(_))));
    assert!(matches!(m.predict_scaled(&[vec![0.0; 3]], 0.5, None), Err(Error::Shape(_))));
    let inputs = m.scaled_inputs(&[0.0; 4], &[vec![0.0; 2], vec![1.0; 2]], 0.01).unwrap();
    assert_eq!(inputs[0].len(), 4 + 4 + 1);
}

#[test]
fn operator_loss_examples_and_oracle() {
    let m = tiny_mitonet(None, 0);
    let preds = vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 0.5]];
    assert_eq!(operator_loss(&preds, &preds, &m, &Regularizer::NONE).unwrap(), 0.0);
    let shifted: Vec<Vec<f64>> = preds.iter().map(|p| p.iter().map(|v| v + 2.0).collect()).collect();
    assert!((operator_loss(&shifted, &preds, &m, &Regularizer::NONE).unwrap() - 4.0).abs() < 1e-12);

    let mut rng = seeded_rng(30);
    let reg = Regularizer { kind: RegKind::L1, lambda: 0.01 };
    let a: Vec<Vec<f64>> = (0..6).map(|_| random_vec(&mut rng, 3)).collect();
    let b: Vec<Vec<f64>> = (0..6).map(|_| random_vec(&mut rng, 3)).collect();
    let mut total = 0.0;
    for i in 0..6 {
        for j in 0..3 {
            total += (a[i][j] - b[i][j]).powi(2);
        }
    }
    let mut penalty = 0.0;
    for net in m.networks() {
        for layer in net.layers() {
            for r in 0..layer.weights.rows() {
                for c in 0..layer.weights.cols() {
                    penalty += 0.01 * layer.weights.get(r, c).abs();
                }
            }
        }
    }
    let got = operator_loss(&a, &b, &m, &reg).unwrap();
    assert!((got - (total / 18.0 + penalty)).abs() < 1e-12);
    assert!(matches!(operator_loss(&a, &b[..5], &m, &reg), Err(Error::Shape(_))));
}

#[test]
fn containers_round_trip() {
    for proj in [None, Some(2)] {
        let m = tiny_mitonet(proj, 12);
        let bytes = m.to_bytes().unwrap();
        assert_eq!(&bytes[..5], OPERATOR_MAGIC);
        let back = MitonetModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash().unwrap(), m.hash().unwrap());
        assert!(matches!(MitonetModel::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        assert!(matches!(BaselineModel::from_bytes(&bytes), Err(Error::Format(_))));
    }
    for variant in [Variant::Don, Variant::MDon, Variant::LDon, Variant::MioNet] {
        let m = tiny_baseline(variant, 13);
        let back = BaselineModel::from_bytes(&m.to_bytes().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(matches!(MitonetModel::from_bytes(&m.to_bytes().unwrap()), Err(Error::Format(_))));
    }
    let mut bytes = tiny_mitonet(None, 1).to_bytes().unwrap();
    bytes[0] = b'X';
    assert!(matches!(MitonetModel::from_bytes(&bytes), Err(Error::Format(_))));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mito");
    let m = tiny_mitonet(None, 14);
    m.save(&path).unwrap();
    assert_eq!(MitonetModel::load(&path).unwrap(), m);
    assert!(matches!(MitonetModel::load(dir.path().join("missing")), Err(Error::Io { .. })));
}

#[test]
fn variant_names_parse() {
    for v in Variant::ALL {
        assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        assert_eq!(Variant::from_tag(v.tag()), Some(v));
    }
    assert_eq!("mdon".parse::<Variant>().unwrap(), Variant::MDon);
    assert!(matches!("fno".parse::<Variant>(), Err(Error::Config(_))));
}

#[test]
fn training_reduces_operator_loss() {
    let mut m = tiny_mitonet(None, 15);
    let mut rng = seeded_rng(31);
    let samples: Vec<OperatorSample> = (0..20)
        .map(|_| {
            let (branch_inputs, trunk_input) = mitonet_inputs(&m, &mut rng);
            let target = branch_inputs[0].iter().map(|v| 0.5 * v + trunk_input[0]).collect();
            OperatorSample { branch_inputs, trunk_input, target }
        })
        .collect();
    let before = mean_sample_loss(&m, &samples).unwrap();
    let cfg = mitonet::numkit::FitConfig { epochs: 200, batch_size: 20, lr: 1e-2, ..Default::default() };
    train_samples(&mut m, &samples, &[], Regularizer::NONE, &cfg).unwrap();
    let after = mean_sample_loss(&m, &samples).unwrap();
    assert!(after < 0.2 * before, "{before} -> {after}");
}
