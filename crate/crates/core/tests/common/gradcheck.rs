//! Full-model gradient check cases shared by the gradient and acceptance
//! tests.

use orbitwatch::autoencoder::{
    batch_loss, forward, init_model, loss_and_gradient, AutoencoderConfig, AutoencoderWeights,
};
use orbitwatch::nn::{finite_diff_grad, Mode, ParameterSet, Tensor3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;
pub const KINK: f64 = 1e-4;
pub const TOL: f64 = 1e-5;
/// Denominator floor. Central differences at h = 1e-6 carry ~1e-10 of
/// round-off, so smaller gradients (and exact zeros) cannot be compared
/// relatively.
const REL_FLOOR: f64 = 1e-4;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

pub fn random_case(rng: &mut ChaCha8Rng) -> (AutoencoderConfig, AutoencoderWeights, Tensor3) {
    loop {
        let cfg = AutoencoderConfig {
            window_k: rng.gen_range(1..=5),
            feature_m: rng.gen_range(1..=2),
            hidden_dim: rng.gen_range(1..=4),
            dropout_rate: 0.0,
            seed: rng.gen(),
        };
        let mut w = init_model(&cfg).unwrap().weights;
        for t in w.tensors_mut() {
            for v in t.iter_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
        }
        let n = rng.gen_range(1..=3);
        let data = (0..n * cfg.window_k * cfg.feature_m)
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let windows = Tensor3::from_vec(n, cfg.window_k, cfg.feature_m, data).unwrap();
        // Reject draws with any residual near the |·| kink.
        let mut model = init_model(&cfg).unwrap();
        model.weights = w.clone();
        let mut rng2 = ChaCha8Rng::seed_from_u64(0);
        let recon = forward(&model, &windows, Mode::Eval, &mut rng2).unwrap();
        let near_kink = recon
            .as_slice()
            .iter()
            .zip(windows.as_slice())
            .any(|(p, t)| (p - t).abs() < KINK);
        if !near_kink {
            return (cfg, w, windows);
        }
    }
}

/// Returns the worst relative error over all parameters.
pub fn check_case(cfg: &AutoencoderConfig, w: &AutoencoderWeights, windows: &Tensor3) -> f64 {
    let (_, analytic) = loss_and_gradient(w, cfg, windows).unwrap();
    let numeric = finite_diff_grad(|p| batch_loss(p, cfg, windows).unwrap(), w, FD_STEP).unwrap();
    analytic
        .tensors()
        .iter()
        .zip(numeric.tensors())
        .flat_map(|(a, n)| a.iter().zip(n.iter()).map(|(x, y)| rel_err(*x, *y)))
        .fold(0.0, f64::max)
}
