//! Analytic BPTT gradients against central finite differences.

mod common;

use common::gradcheck::{check_case, random_case, rel_err, FD_STEP, KINK, TOL};
use orbitwatch::nn::{
    finite_diff_grad, lstm_cell_forward, mae_loss, LstmLayerParams, Matrix, ParameterSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn full_model_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..25 {
        let (cfg, w, windows) = random_case(&mut rng);
        let worst = check_case(&cfg, &w, &windows);
        assert!(
            worst < TOL,
            "case {case} {cfg:?}: worst relative error {worst:e}"
        );
    }
}

#[test]
fn lstm_layer_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let k = rng.gen_range(1..=5);
        let input = rng.gen_range(1..=3);
        let hidden = rng.gen_range(1..=4);
        let mut p = LstmLayerParams::zeros(input, hidden);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.gen_range(-0.8..0.8);
            }
        }
        let seq = Matrix::from_vec(
            k,
            input,
            (0..k * input).map(|_| rng.gen_range(-1.5..1.5)).collect(),
        )
        .unwrap();
        let target: Vec<f64> = (0..k * hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |p: &LstmLayerParams| {
            let h = p.forward_cached(&seq).unwrap().hidden_states();
            mae_loss(h.as_slice(), &target).unwrap().0
        };
        let cache = p.forward_cached(&seq).unwrap();
        let h = cache.hidden_states();
        if h.as_slice()
            .iter()
            .zip(&target)
            .any(|(a, b)| (a - b).abs() < KINK)
        {
            continue;
        }
        let (_, g) = mae_loss(h.as_slice(), &target).unwrap();
        let mut grads = p.zeros_like();
        p.backward(&cache, &Matrix::from_vec(k, hidden, g).unwrap(), &mut grads)
            .unwrap();
        let numeric = finite_diff_grad(loss, &p, FD_STEP).unwrap();
        for (a, n) in grads.tensors().iter().zip(numeric.tensors()) {
            for (x, y) in a.iter().zip(n.iter()) {
                assert!(rel_err(*x, *y) < TOL, "{x} vs {y}");
            }
        }
    }
}

#[test]
fn sequence_forward_is_iterated_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let k = rng.gen_range(1..=6);
        let (input, hidden) = (rng.gen_range(1..=3), rng.gen_range(1..=4));
        let mut p = LstmLayerParams::zeros(input, hidden);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        let seq = Matrix::from_vec(
            k,
            input,
            (0..k * input).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let (mut h, mut c) = (vec![0.0; hidden], vec![0.0; hidden]);
        let mut manual = Vec::new();
        for t in 0..k {
            let (h2, c2, _) = lstm_cell_forward(seq.row(t), &h, &c, &p).unwrap();
            manual.extend_from_slice(&h2);
            h = h2;
            c = c2;
        }
        let got = p.forward_cached(&seq).unwrap().hidden_states();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(got.as_slice()), bits(&manual));
    }
}
