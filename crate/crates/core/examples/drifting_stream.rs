//! Generate the default drifting benchmark and print each domain's
//! corruption and how far its features move from the clean source data.
//!
//! cargo run --example drifting_stream -- [seed]

use bee::beeloop::{make_benchmark, BeeConfig};

fn main() -> bee::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = BeeConfig::default();
    let bench = make_benchmark(&cfg, seed)?;
    let mean_norm = |rows: &[f64], dim: usize| {
        rows.chunks(dim).map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>() / (rows.len() / dim) as f64
    };
    let dim = cfg.data.dim;
    println!("source train: {} samples, mean feature norm {:.2}", bench.train.len(), mean_norm(bench.train.features.data(), dim));
    let per_domain = cfg.data.batches_per_domain * cfg.data.batch_size * dim;
    let data = bench.stream.dataset().features.data();
    for (i, d) in bench.schedule.domains.iter().enumerate() {
        let rows = &data[i * per_domain..(i + 1) * per_domain];
        println!(
            "domain {i}: {:<18} {:?} severity {}  mean feature norm {:.2}",
            d.name,
            d.corruption.kind,
            d.corruption.severity,
            mean_norm(rows, dim)
        );
    }
    println!("{} batches of {}", bench.stream.num_batches(), bench.stream.batch_size());
    Ok(())
}
