//! Check reverse-mode gradients of the entropy and codebook losses against
//! central differences on a random point.
//!
//! cargo run --example gradient_check

use bee::netcore::{grad_check, ParamSet, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect())
}

fn main() -> bee::Result<()> {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let mut point = ParamSet::new();
    point.insert("h", random(&mut r, 5, 4))?;
    point.insert("q", random(&mut r, 4, 6))?;
    point.insert("w", random(&mut r, 4, 3))?;

    let entropy = grad_check(&point, 1e-5, |g, p| {
        let logits = g.matmul(p.get("h"), p.get("w"))?;
        let probs = g.softmax_rows(logits);
        Ok(g.entropy(probs))
    })?;
    println!("entropy of softmax(h w): worst relative error {entropy:.2e}");

    let target = {
        let t = random(&mut r, 5, 6).map(f64::exp);
        let sums = t.row_sums();
        Tensor::matrix(5, 6, (0..30).map(|k| t.data()[k] / sums[k / 6]).collect())
    };
    let codebook = grad_check(&point, 1e-5, |g, p| {
        let cos = g.cosine_scores(p.get("h"), p.get("q"))?;
        let probs = g.softmax_with_temperature(cos, 0.1)?;
        g.cross_entropy(target.clone(), probs)
    })?;
    println!("codebook cross-entropy at temperature 0.1: worst relative error {codebook:.2e}");
    Ok(())
}
