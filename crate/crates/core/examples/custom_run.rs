//! Run one configuration, given as dotted `key=value` overrides, and print
//! per-domain errors and replay events.
//!
//! cargo run --release --example custom_run -- [seeds] car.strategy=\"fixed:80\" adapt.inner_steps=1

use bee::beeloop::{prepare, run_prepared, BeeConfig};

fn main() -> bee::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let overrides: Vec<(String, toml::Value)> = args
        .map(|a| {
            let (k, v) = a.split_once('=').expect("overrides look like key=value");
            let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
                .map(|t| t["v"].clone())
                .unwrap_or_else(|_| toml::Value::String(v.to_string()));
            (k.to_string(), value)
        })
        .collect();
    let cfg = BeeConfig::from_pairs(overrides.iter().map(|(k, v)| (k.as_str(), v)))?;
    let mut mean = 0.0;
    for seed in 0..seeds {
        let prep = prepare(&cfg, seed)?;
        let out = run_prepared(&prep, &cfg, seed)?;
        let doms: Vec<String> = out.summary.domains.iter().map(|d| format!("{:.1}", d.error_pct)).collect();
        let merges = out.reports.iter().filter(|r| r.merge.is_some()).count();
        let triggers: Vec<u64> = out.reports.iter().filter(|r| r.trigger).map(|r| r.step).collect();
        let acc: Vec<String> = out.boundary_accuracy.iter().map(|a| format!("{:.1}", 100.0 * a)).collect();
        println!(
            "seed {seed}: mean {:.2}%  domains [{}]  merges {merges} triggers {:?}  holdout acc [{}]",
            out.summary.mean_error_pct,
            doms.join(" "),
            triggers,
            acc.join(" ")
        );
        mean += out.summary.mean_error_pct;
    }
    println!("mean over seeds: {:.2}%", mean / seeds as f64);
    Ok(())
}
