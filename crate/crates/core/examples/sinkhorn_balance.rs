//! Balance a skewed score matrix with Sinkhorn rounds and print how the
//! prototype masses approach uniform.
//!
//! cargo run --example sinkhorn_balance -- [rounds]

use bee::mcr::sinkhorn_traced;
use bee::netcore::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bee::Result<()> {
    let rounds: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let mut r = ChaCha8Rng::seed_from_u64(0);
    // Every sample prefers prototype 0, so raw softmax rows pile up there.
    let (n, m) = (32, 6);
    let scores = Tensor::matrix(
        n,
        m,
        (0..n * m).map(|k| if k % m == 0 { 3.0 } else { 0.0 } + r.gen_range(-1.0..1.0)).collect(),
    );
    let (assign, trace) = sinkhorn_traced(&scores, rounds)?;
    for (i, v) in trace.iter().enumerate() {
        println!("round {:>2}: marginal violation {v:.3e}", i + 1);
    }
    let masses: Vec<String> = assign.prototype_marginals().iter().map(|c| format!("{c:.4}")).collect();
    println!("prototype masses [{}] (uniform is {:.4})", masses.join(" "), 1.0 / m as f64);
    Ok(())
}
