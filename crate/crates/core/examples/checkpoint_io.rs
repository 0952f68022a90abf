//! Save a parameter set and a dataset to disk, load them back and confirm
//! the round trip is bit-exact.
//!
//! cargo run --example checkpoint_io -- [dir]

use std::path::PathBuf;

use bee::netcore::{load_checkpoint, save_checkpoint, Network, NetworkSpec};
use bee::stream::{gen_source, load_dataset, save_dataset, SourceTask};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> bee::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir)?;

    let net = Network::new(NetworkSpec::new(6, vec![10, 10], 3))?;
    let params = net.init_params(&mut ChaCha8Rng::seed_from_u64(1));
    let ckpt = dir.join("example.ckpt");
    save_checkpoint(&params, &ckpt)?;
    let back = load_checkpoint(&ckpt)?;
    println!("{}: {} tensors, identical after reload: {}", ckpt.display(), back.iter().count(), back == params);

    let task = SourceTask {
        dim: 6,
        classes: 3,
        sigma: 1.0,
        center_scale: 3.0,
        min_separation: 4.0,
        n_train: 200,
        n_holdout: 50,
        seed: 7,
    };
    let (train, _) = gen_source(&task)?;
    let path = dir.join("example.beed");
    save_dataset(&train, &path)?;
    println!("{}: {} samples, identical after reload: {}", path.display(), train.len(), load_dataset(&path)? == train);
    Ok(())
}
