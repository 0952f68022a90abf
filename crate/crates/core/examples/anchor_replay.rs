//! Store periodic anchors of a drifting parameter set, pick the most
//! divergent ones on a batch and merge them into the student.
//!
//! cargo run --example anchor_replay

use bee::car::{ensemble_weights, merge, select_candidates, AnchorPool};
use bee::netcore::{Network, NetworkSpec, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> bee::Result<()> {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let net = Network::new(NetworkSpec::new(4, vec![8, 8], 3))?;
    let mut student = net.init_params(&mut r);
    let mut pool = AnchorPool::new(4, 10)?;
    for step in 1..=60 {
        for (_, t) in student.iter_mut() {
            for v in t.data_mut() {
                *v += r.gen_range(-0.05..0.05);
            }
        }
        if pool.maybe_store(&student, step) {
            println!("step {step}: stored anchor, pool holds {}", pool.len());
        }
    }
    let batch = Tensor::matrix(16, 4, (0..64).map(|_| r.gen_range(-2.0..2.0)).collect());
    let set = select_candidates(&net, &student, &pool, &batch, 2)?;
    let weights = ensemble_weights(&set);
    println!("candidates: student + anchors from steps {:?}", set.anchor_steps());
    for (row, w) in set.divergences().iter().zip(&weights) {
        let d: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        println!("  divergences [{}]  weight {w:.4}", d.join(" "));
    }
    let merged = merge(&set, &weights)?;
    println!("merged {} tensors into the new student", merged.iter().count());
    Ok(())
}
