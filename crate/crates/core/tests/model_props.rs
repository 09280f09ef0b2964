use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use streamsig::matrix::expm;
use streamsig::slice::{forward, interval_flow, lift, ForwardMode, LogSliceModel, ModelSpec, Structure};
use streamsig::testing::{random_lie, random_vector};
use streamsig::train::{batch_loss, clip_global_norm, grad, Sample};
use streamsig::{BlockDiag, LyndonBasis, Mat};

fn model(rng: &mut ChaCha8Rng, d_x: usize, d_h: usize, block: usize, d_out: usize) -> LogSliceModel {
    let spec = ModelSpec {
        d_x,
        d_h,
        d_out,
        structure: Structure::BlockDiagonal { block },
        init_inputs: None,
    };
    LogSliceModel::init(&spec, rng.random()).unwrap()
}

fn as_dense(m: &LogSliceModel) -> LogSliceModel {
    let mut d = m.clone();
    d.structure = Structure::Dense;
    d.channels = m.channels.iter().map(|c| BlockDiag { blocks: vec![c.to_dense()] }).collect();
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn block_diagonal_matches_dense(seed in any::<u64>(), depth in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = model(&mut rng, 3, 8, 2, 2);
        let basis = LyndonBasis::shared(3, depth).unwrap();
        let lb = lift(&m, &basis).unwrap();
        let ld = lift(&as_dense(&m), &basis).unwrap();
        for (b, d) in lb.mats.iter().zip(&ld.mats) {
            prop_assert_eq!(b.n_blocks(), 4);
            prop_assert!(b.to_dense().max_abs_diff(&d.blocks[0]) <= 1e-12);
        }
        let phi = random_lie(&mut rng, &basis, 0.5);
        let fb = interval_flow(&lb, &phi).unwrap();
        prop_assert_eq!(fb.n_blocks(), 4);
        let fd = interval_flow(&ld, &phi).unwrap();
        prop_assert!(fb.to_dense().max_abs_diff(&fd.blocks[0]) <= 1e-12);
    }

    #[test]
    fn flows_compose(seed in any::<u64>(), depth in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = model(&mut rng, 2, 8, 4, 1);
        let basis = LyndonBasis::shared(2, depth).unwrap();
        let lifted = lift(&m, &basis).unwrap();
        let phis = vec![random_lie(&mut rng, &basis, 0.5), random_lie(&mut rng, &basis, 0.5)];
        let h0 = m.initial_state(None).unwrap();
        let h1 = interval_flow(&lifted, &phis[0]).unwrap().matvec(&h0);
        let h2 = interval_flow(&lifted, &phis[1]).unwrap().matvec(&h1);
        let seq = forward(&lifted, &phis, &h0, ForwardMode::Sequential).unwrap();
        prop_assert_eq!(&seq, &vec![h1, h2]);
        let scan = forward(&lifted, &phis, &h0, ForwardMode::Scan).unwrap();
        for (a, b) in seq.iter().zip(&scan) {
            for (x, y) in a.iter().zip(b) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn padding_changes_nothing(seed in any::<u64>(), extra in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = model(&mut rng, 2, 4, 2, 2);
        let basis = LyndonBasis::shared(2, 2).unwrap();
        let samples: Vec<Sample> = (0..3).map(|_| {
            let k = rng.random_range(1..4);
            let logsigs = (0..k).map(|_| random_lie(&mut rng, &basis, 0.5)).collect();
            let targets = (0..k).map(|_| random_vector(&mut rng, 2, 1.0)).collect();
            Sample::new(logsigs, targets)
        }).collect();
        let padded: Vec<Sample> = samples.iter().map(|s| s.padded(extra, &basis)).collect();
        let a: Vec<&Sample> = samples.iter().collect();
        let b: Vec<&Sample> = padded.iter().collect();
        let la = batch_loss(&m, &a, ForwardMode::Sequential).unwrap();
        let lb = batch_loss(&m, &b, ForwardMode::Sequential).unwrap();
        prop_assert!((la - lb).abs() <= 1e-12);
        let (_, ga) = grad(&m, &a).unwrap();
        let (_, gb) = grad(&m, &b).unwrap();
        for (x, y) in ga.iter().zip(&gb) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn clipping_never_grows(seed in any::<u64>(), max_norm in 0.01f64..10.0, scale in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = random_vector(&mut rng, 20, scale);
        let before = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        clip_global_norm(&mut g, max_norm);
        let after = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(after <= before);
        prop_assert!(after <= max_norm * (1.0 + 1e-12) || after == before);
    }
}

/// Classical RK4 for `dh/dt = A h` over `[0, 1]`.
fn rk4(a: &Mat, h: &[f64], steps: usize) -> Vec<f64> {
    let dt = 1.0 / steps as f64;
    let mut h = h.to_vec();
    let axpy = |x: &[f64], y: &[f64], s: f64| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p + s * q).collect() };
    for _ in 0..steps {
        let k1 = a.matvec(&h);
        let k2 = a.matvec(&axpy(&h, &k1, dt / 2.0));
        let k3 = a.matvec(&axpy(&h, &k2, dt / 2.0));
        let k4 = a.matvec(&axpy(&h, &k3, dt));
        for i in 0..h.len() {
            h[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    h
}

#[test]
fn single_segment_flow_matches_rk4() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let m = model(&mut rng, 3, 8, 8, 1);
        let basis = LyndonBasis::shared(3, 1).unwrap();
        let v = random_vector(&mut rng, 3, 1.0);
        let phi = streamsig::LieElement::new(basis.clone(), v.clone()).unwrap();
        let flow = interval_flow(&lift(&m, &basis).unwrap(), &phi).unwrap();
        let mut a = Mat::zeros(8, 8);
        for (c, x) in m.channels.iter().zip(&v) {
            a.add_scaled(&c.to_dense(), *x);
        }
        let h0 = random_vector(&mut rng, 8, 1.0);
        let want = rk4(&a, &h0, 10_000);
        let got = flow.matvec(&h0);
        let err = want.iter().zip(&got).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
        assert!(expm(&a).matvec(&h0).iter().zip(&got).all(|(x, y)| (x - y).abs() <= 1e-12));
    }
}
