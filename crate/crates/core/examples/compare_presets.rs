//! Mean error of the source model, entropy minimisation and the full method
//! on the default drifting benchmark, over a few seeds.
//!
//! cargo run --release --example compare_presets -- [seeds]

use std::time::Instant;

use bee::beeloop::{prepare, run_prepared, BeeConfig, Preset};

fn main() -> bee::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let base = BeeConfig::default();
    let presets = [
        ("source-only", Preset::SourceOnly),
        ("entropy-only", Preset::EntropyOnly),
        ("bee", Preset::Bee),
    ];
    let mut totals = vec![0.0; presets.len()];
    for seed in 0..seeds {
        let t = Instant::now();
        let prep = prepare(&base, seed)?;
        print!("seed {seed} (prep {:.1}s)", t.elapsed().as_secs_f64());
        for (i, (name, preset)) in presets.iter().enumerate() {
            let mut cfg = base.clone();
            cfg.apply_preset(*preset);
            let t = Instant::now();
            let out = run_prepared(&prep, &cfg, seed)?;
            totals[i] += out.summary.mean_error_pct;
            print!("  {name} {:.2}% ({:.1}s)", out.summary.mean_error_pct, t.elapsed().as_secs_f64());
        }
        println!();
    }
    for (i, (name, _)) in presets.iter().enumerate() {
        println!("{name:>14}: {:.2}%", totals[i] / seeds as f64);
    }
    Ok(())
}
