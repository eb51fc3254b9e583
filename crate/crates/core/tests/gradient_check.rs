mod support;

use support::gradcheck::{max_relative_errors, setup, FLOOR};
use tagnoise::convnet::{backward, forward, Mode};

#[test]
fn every_tensor_matches_finite_differences() {
    let errors = max_relative_errors(FLOOR);
    assert_eq!(errors.len(), 10);
    for (name, rel, abs) in errors {
        assert!(rel <= 1e-5, "{name}: relative {rel:.3e}, absolute {abs:.3e}");
    }
}

#[test]
fn conv_bias_gradient_vanishes_under_batchnorm() {
    // batchnorm subtracts the batch mean, so a per-channel shift has no effect
    let (p, x, y, n) = setup();
    let g = backward(&p, &forward(&p, &x, n, Mode::Train).unwrap(), &y).unwrap();
    for t in [1, 5] {
        assert!(g[t].iter().all(|v| v.abs() < 1e-12), "{:?}", g[t]);
    }
}
