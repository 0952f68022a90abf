//! Analytic gradients of the three adaptation losses against central
//! differences.

mod common;

use common::gradcheck::{entropy_error, mcr_codebook_error, mcr_network_error, prediction_error, TOL};

const CONFIGS: u64 = 20;

fn check(name: &str, f: fn(u64) -> f64) {
    for seed in 0..CONFIGS {
        let e = f(seed);
        assert!(e < TOL, "{name} config {seed}: relative error {e:e}");
    }
}

#[test]
fn entropy_gradients_match_finite_differences() {
    check("entropy", entropy_error);
}

#[test]
fn prediction_consistency_gradients_match_finite_differences() {
    check("prediction", prediction_error);
}

#[test]
fn codebook_consistency_gradients_match_finite_differences() {
    check("mcr network", mcr_network_error);
    check("mcr codebook", mcr_codebook_error);
}
