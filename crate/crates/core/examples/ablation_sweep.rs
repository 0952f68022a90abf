//! Component and replay-strategy ablations on the default benchmark.
//!
//! cargo run --release --example ablation_sweep -- [seeds] [components|replay|all]

use bee::beeloop::{component_rows, configure_ablation, prepare, replay_rows, run_prepared, BeeConfig};

fn main() -> bee::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let which = args.next().unwrap_or_else(|| "components".into());
    let base = BeeConfig::default();
    let mut rows = Vec::new();
    if which == "components" || which == "all" {
        rows.extend(component_rows());
    }
    if which == "replay" || which == "all" {
        rows.extend(replay_rows());
    }
    let preps = (0..seeds).map(|s| prepare(&base, s)).collect::<bee::Result<Vec<_>>>()?;
    for row in &rows {
        let cfg = configure_ablation(&base, &row.switches)?;
        let mut errs = Vec::new();
        for (seed, prep) in preps.iter().enumerate() {
            errs.push(run_prepared(prep, &cfg, seed as u64)?.summary.mean_error_pct);
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let per: Vec<String> = errs.iter().map(|e| format!("{e:.2}")).collect();
        println!("{:>10} {:>2} {:<22} {mean:6.2}%  [{}]", row.table, row.row, row.label, per.join(" "));
    }
    Ok(())
}
