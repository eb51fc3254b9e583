//! Central finite differences against the analytic backward pass on the
//! tiny architecture (1×8×8 input, two 4-channel blocks), in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagnoise::convnet::{backward, bce_with_logits, forward, ArchSpec, ModelParams, Mode};

pub const H: f64 = 1e-5;
/// Central-difference roundoff is about ε·|L|/h ≈ 1e-11 here; gradients
/// below this floor are compared in absolute terms.
pub const FLOOR: f64 = 1e-6;

pub fn setup() -> (ModelParams<f64>, Vec<f64>, Vec<f64>, usize) {
    let arch = ArchSpec::tiny(3);
    let mut p = ModelParams::<f64>::he_uniform(&arch, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    // move batchnorm and biases away from their defaults so every path is exercised
    for b in &mut p.blocks {
        b.gain.iter_mut().for_each(|g| *g = rng.random_range(0.5..1.5));
        b.beta.iter_mut().for_each(|g| *g = rng.random_range(-0.5..0.5));
        b.bias.iter_mut().for_each(|g| *g = rng.random_range(-0.1..0.1));
    }
    p.dense_bias.iter_mut().for_each(|g| *g = rng.random_range(-0.2..0.2));
    let n = 3;
    let x: Vec<f64> = (0..n * 64).map(|_| rng.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = (0..n * 3).map(|_| rng.random_range(0..2) as f64).collect();
    (p, x, y, n)
}

fn loss(p: &ModelParams<f64>, x: &[f64], y: &[f64], n: usize) -> f64 {
    bce_with_logits(&forward(p, x, n, Mode::Train).unwrap().logits, y)
}

/// Per tensor: largest |analytic − numeric| / max(|analytic|, |numeric|, floor) per tensor.
pub fn max_relative_errors(floor: f64) -> Vec<(String, f64, f64)> {
    let (p, x, y, n) = setup();
    let f = forward(&p, &x, n, Mode::Train).unwrap();
    let grads = backward(&p, &f, &y).unwrap();
    let names = p.trainable_names();
    let mut out = Vec::new();
    for (t, name) in names.iter().enumerate() {
        let (mut worst, mut worst_abs) = (0.0f64, 0.0f64);
        for i in 0..grads[t].len() {
            let mut plus = p.clone();
            plus.trainable_mut()[t][i] += H;
            let mut minus = p.clone();
            minus.trainable_mut()[t][i] -= H;
            let numeric = (loss(&plus, &x, &y, n) - loss(&minus, &x, &y, n)) / (2.0 * H);
            let analytic = grads[t][i];
            let diff = (analytic - numeric).abs();
            worst_abs = worst_abs.max(diff);
            worst = worst.max(diff / analytic.abs().max(numeric.abs()).max(floor));
        }
        out.push((name.clone(), worst, worst_abs));
    }
    out
}

