//! Acceptance suite: one PASS/FAIL line per criterion, with supporting
//! figures indented underneath.
//!
//! Criteria 1 to 6, 10 and 11 are contracts and fail the process when red.
//! Criteria 7 to 9 are directional experiment outcomes; they are always
//! reported truthfully but only fail the process when `BEE_ACCEPT_STRICT=1`.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use bee::beeloop::{
    component_rows, configure_ablation, prepare, run_prepared, warm_state_from_params, warm_state_to_params,
    BeeConfig, BeeState, Consistency, Preset, Prepared, ReplayStrategy, RunOutput,
};
use bee::car::{merge, sym_kl, weights_from_divergences, CandidateSet, DetectorConfig, Member, ShiftDetector};
use bee::cli::{self, render_config};
use bee::mcr::{sinkhorn_normalize, sinkhorn_traced};
use bee::netcore::{decode_checkpoint, encode_checkpoint, ema_update, load_checkpoint, save_checkpoint, ParamSet, Tensor};
use bee::seed::sub_seed;
use bee::stream::{load_dataset, save_dataset};
use common::gradcheck::{entropy_error, mcr_codebook_error, mcr_network_error, prediction_error, TOL};
use common::schema::{check_schema, golden};
use common::scripted::{scripted_stream, triggers};
use common::{oracle_sym_kl, random_simplex, random_tensor, rng, tiny_config, EntropyOracle};
use rand::Rng;
use rand_distr::{Distribution, Normal};

const SEEDS: u64 = 5;

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Self {
            pass,
            summary: summary.into(),
            details: Vec::new(),
        }
    }

    fn with(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }
}

/// Runs `f`, turning a panic into a failed verdict carrying its message.
fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Verdict::new(false, format!("check aborted: {msg}"))
        }
    }
}

fn gradients() -> Verdict {
    let checks: [(&str, fn(u64) -> f64); 4] = [
        ("entropy", entropy_error),
        ("prediction consistency", prediction_error),
        ("codebook consistency (network)", mcr_network_error),
        ("codebook consistency (prototypes)", mcr_codebook_error),
    ];
    let mut pass = true;
    let mut details = Vec::new();
    for (name, f) in checks {
        let worst = (0..20).map(f).fold(0.0_f64, f64::max);
        pass &= worst < TOL;
        details.push(format!("{name}: worst relative error {worst:.2e} over 20 configurations"));
    }
    Verdict::new(pass, format!("analytic vs central differences, tolerance {TOL:e}")).with(details)
}

fn sinkhorn() -> Verdict {
    let mut r = rng(11);
    let (mut worst_row, mut worst_rise) = (0.0_f64, f64::NEG_INFINITY);
    for case in 0..500 {
        let (rows, cols) = (r.gen_range(1..20), r.gen_range(2..12));
        let scale = if case % 5 == 0 { 2000.0 } else { 30.0 };
        let s = random_tensor(&mut r, rows, cols, scale);
        let iters = r.gen_range(1..15);
        let (a, trace) = sinkhorn_traced(&s, iters).unwrap();
        for i in 0..rows {
            worst_row = worst_row.max((a.tensor().row(i).iter().sum::<f64>() - 1.0).abs());
        }
        for w in trace.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
    }
    let mut worst_marginal = 0.0_f64;
    for _ in 0..50 {
        let s = random_tensor(&mut r, 16, 8, 5.0);
        let a = sinkhorn_normalize(&s, 50).unwrap();
        for m in a.prototype_marginals() {
            worst_marginal = worst_marginal.max((m - 1.0 / 8.0).abs());
        }
    }
    let pass = worst_row < 1e-9 && worst_rise <= 1e-12 && worst_marginal < 1e-3;
    Verdict::new(pass, "row sums, monotone marginal violation, 50-round balance").with(vec![
        format!("worst row-sum error {worst_row:.1e} over 500 random inputs"),
        format!("largest per-round change in violation {worst_rise:.1e} (must be <= 0)"),
        format!("worst 16x8 marginal deviation after 50 rounds {worst_marginal:.1e}"),
    ])
}

fn single(v: &[f64]) -> ParamSet {
    let mut p = ParamSet::new();
    p.insert("w", Tensor::matrix(1, v.len(), v.to_vec())).unwrap();
    p
}

fn ema() -> Verdict {
    let mut r = rng(12);
    let mut worst = 0.0_f64;
    let mut edges = true;
    for _ in 0..500 {
        let n = r.gen_range(1..30);
        let t: Vec<f64> = (0..n).map(|_| r.gen_range(-1e3..1e3)).collect();
        let s: Vec<f64> = (0..n).map(|_| r.gen_range(-1e3..1e3)).collect();
        let m = r.gen_range(0.0..1.0);
        let mut teacher = single(&t);
        ema_update(&mut teacher, &single(&s), m).unwrap();
        for ((tv, sv), got) in t.iter().zip(&s).zip(teacher.get("w").unwrap().data()) {
            worst = worst.max((got - (m * tv + (1.0 - m) * sv)).abs() / tv.abs().max(sv.abs()).max(1.0));
        }
        let mut keep = single(&t);
        ema_update(&mut keep, &single(&s), 1.0).unwrap();
        let mut copy = single(&t);
        ema_update(&mut copy, &single(&s), 0.0).unwrap();
        edges &= keep.get("w").unwrap().data() == &t[..] && copy.get("w").unwrap().data() == &s[..];
    }
    Verdict::new(worst <= 1e-12 && edges, "elementwise blend and exact edge momenta").with(vec![
        format!("worst scaled deviation {worst:.1e} over 500 random blends"),
        format!("m = 1 keeps the teacher and m = 0 copies the student bit-exactly: {edges}"),
    ])
}

fn symmetric_kl() -> Verdict {
    let mut r = rng(13);
    let (mut asym, mut oracle_gap) = (0.0_f64, 0.0_f64);
    let mut zero_iff_equal = true;
    for _ in 0..500 {
        let (rows, cols) = (r.gen_range(1..6), r.gen_range(2..8));
        let p = random_simplex(&mut r, rows, cols);
        let q = random_simplex(&mut r, rows, cols);
        let (a, b) = (sym_kl(&p, &q).unwrap(), sym_kl(&q, &p).unwrap());
        asym = asym.max((a - b).abs());
        zero_iff_equal &= a > 0.0 && sym_kl(&p, &p).unwrap() == 0.0;
        let o = (0..rows).map(|i| oracle_sym_kl(p.row(i), q.row(i))).sum::<f64>() / rows as f64;
        oracle_gap = oracle_gap.max((a - o).abs());
    }
    let oracle = oracle_sym_kl(&[0.5, 0.5], &[0.9, 0.1]);
    let got = sym_kl(&Tensor::matrix(1, 2, vec![0.5, 0.5]), &Tensor::matrix(1, 2, vec![0.9, 0.1])).unwrap();
    let pass = asym <= 1e-12
        && zero_iff_equal
        && oracle_gap < 1e-9
        && (oracle - 0.4394).abs() < 1e-3
        && (got - oracle).abs() < 1e-12;
    Verdict::new(pass, "symmetry, zero iff equal, hand case").with(vec![
        format!("worst asymmetry {asym:.1e}; zero exactly on equal inputs and positive otherwise: {zero_iff_equal}"),
        format!("worst gap to the series-logarithm oracle {oracle_gap:.1e}"),
        format!("(0.5,0.5) vs (0.9,0.1): oracle {oracle:.6}, implementation {got:.6}, pinned 0.4394"),
    ])
}

fn merging() -> Verdict {
    let mut r = rng(14);
    let (mut weight_err, mut hull_ok, mut identity_ok) = (0.0_f64, true, true);
    for _ in 0..300 {
        let (n, len) = (r.gen_range(1..7), r.gen_range(1..12));
        let members: Vec<(Member, ParamSet)> = (0..n)
            .map(|i| {
                let v: Vec<f64> = (0..len).map(|_| r.gen_range(-5.0..5.0)).collect();
                let m = if i == 0 { Member::Student } else { Member::Anchor { step: i as u64 } };
                (m, single(&v))
            })
            .collect();
        let mut div = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = r.gen_range(0.0..3.0);
                div[i][j] = d;
                div[j][i] = d;
            }
        }
        let w = weights_from_divergences(&div);
        weight_err = weight_err.max((w.iter().sum::<f64>() - 1.0).abs());
        let merged = merge(&CandidateSet::with_divergences(members.clone(), div).unwrap(), &w).unwrap();
        for (k, got) in merged.get("w").unwrap().data().iter().enumerate() {
            let vals = members.iter().map(|(_, p)| p.get("w").unwrap().data()[k]);
            let lo = vals.clone().fold(f64::INFINITY, f64::min);
            let hi = vals.fold(f64::NEG_INFINITY, f64::max);
            hull_ok &= *got >= lo && *got <= hi;
        }
        let same = single(&(0..len).map(|_| r.gen_range(-1e3..1e3)).collect::<Vec<_>>());
        let twins: Vec<(Member, ParamSet)> =
            (0..n).map(|i| (Member::Anchor { step: i as u64 }, same.clone())).collect();
        let set = CandidateSet::with_divergences(twins, vec![vec![0.0; n]; n]).unwrap();
        let out = merge(&set, &weights_from_divergences(set.divergences())).unwrap();
        identity_ok &= out == same;
    }
    Verdict::new(weight_err <= 1e-12 && hull_ok && identity_ok, "weights, convex hull, identity").with(vec![
        format!("worst weight-sum error {weight_err:.1e} over 300 random candidate sets"),
        format!("every merged element inside its members' range: {hull_ok}"),
        format!("identical members merge bit-exactly: {identity_ok}"),
    ])
}

fn detector() -> Verdict {
    let mut cases = 0;
    let mut good = 0;
    for plateau in [50, 100, 200] {
        for period in [2, 3, 5, 7, 10, 16, 25] {
            for phase in [0.0, 0.5, 1.3] {
                let fired = triggers(&scripted_stream(&[(1.0, plateau), (6.0, 400)], 0.01, period, phase));
                cases += 1;
                good += (fired.len() == 1 && (plateau..=plateau + 3).contains(&fired[0])) as usize;
            }
        }
    }
    let constant_quiet = [0.0, 1.0, 3.7, 1e6].iter().all(|&v| {
        let mut d = ShiftDetector::new(DetectorConfig::default());
        (0..2000).all(|_| !d.observe(v))
    });

    // Not part of the criterion: how the same threshold behaves when the
    // plateau ripple is independent Gaussian noise instead of scripted.
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut exact = 0;
    let mut spurious = 0;
    for seed in 0..20 {
        let mut r = rng(1000 + seed);
        let stream: Vec<f64> = (0..450).map(|i| if i < 50 { 1.0 } else { 6.0 } + noise.sample(&mut r)).collect();
        let fired = triggers(&stream);
        exact += (fired.len() == 1 && (50..=53).contains(&fired[0])) as usize;
        spurious += fired.iter().filter(|&&i| !(50..=53).contains(&i)).count();
    }
    Verdict::new(good == cases && constant_quiet, "single trigger at a step, silence on constant input").with(vec![
        format!("{good}/{cases} scripted plateaus (sigma 0.01, lengths 50/100/200, 7 ripple periods, 3 phases) fire exactly once within 3 batches of the step"),
        format!("constant streams of 2000 values stay silent: {constant_quiet}"),
        format!("note: with i.i.d. Gaussian ripple instead, {exact}/20 streams fire exactly once ({spurious} extra triggers in total); a z-threshold of 1.5 is exceeded by chance on noisy plateaus"),
    ])
}

struct SeedRuns {
    source: RunOutput,
    entropy: RunOutput,
    mcr: RunOutput,
    mcr_queue: RunOutput,
    bee: RunOutput,
    /// Data, source training, warm-up and the three runs of the headline
    /// comparison.
    headline_time: Duration,
}

fn preset(base: &BeeConfig, p: Preset) -> BeeConfig {
    let mut c = base.clone();
    c.apply_preset(p);
    c
}

fn timed(prep: &Prepared, cfg: &BeeConfig, seed: u64) -> (RunOutput, Duration) {
    let t = Instant::now();
    let out = run_prepared(prep, cfg, seed).unwrap();
    (out, t.elapsed())
}

fn experiments() -> Vec<SeedRuns> {
    let base = BeeConfig::default();
    let rows = component_rows();
    let mcr = configure_ablation(&base, &rows[3].switches).unwrap();
    let mcr_queue = configure_ablation(&base, &rows[5].switches).unwrap();
    assert_eq!(rows[3].label, "ent+mcr234");
    assert_eq!(rows[5].label, "ent+mcr234+queue");
    (0..SEEDS)
        .map(|seed| {
            let t = Instant::now();
            let prep = prepare(&base, seed).unwrap();
            let prep_time = t.elapsed();
            let (source, t1) = timed(&prep, &preset(&base, Preset::SourceOnly), seed);
            let (entropy, t2) = timed(&prep, &preset(&base, Preset::EntropyOnly), seed);
            let (bee, t3) = timed(&prep, &preset(&base, Preset::Bee), seed);
            let (mcr, _) = timed(&prep, &mcr, seed);
            let (mcr_queue, _) = timed(&prep, &mcr_queue, seed);
            eprintln!("  seed {seed} done");
            SeedRuns {
                source,
                entropy,
                mcr,
                mcr_queue,
                bee,
                headline_time: prep_time + t1 + t2 + t3,
            }
        })
        .collect()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn err(o: &RunOutput) -> f64 {
    o.summary.mean_error_pct
}

fn end_to_end(runs: &[SeedRuns]) -> Verdict {
    let (s, e, b) = (
        mean(runs.iter().map(|r| err(&r.source))),
        mean(runs.iter().map(|r| err(&r.entropy))),
        mean(runs.iter().map(|r| err(&r.bee))),
    );
    let time: Duration = runs.iter().map(|r| r.headline_time).sum();
    let margin = e - b;
    let pass = b < e && e < s && margin >= 2.0 && time < Duration::from_secs(300);
    let mut details: Vec<String> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            format!(
                "seed {i}: source {:.2}  entropy {:.2}  BEE {:.2}  margin {:.2}",
                err(&r.source),
                err(&r.entropy),
                err(&r.bee),
                err(&r.entropy) - err(&r.bee)
            )
        })
        .collect();
    details.push(format!("runtime of data, training, warm-up and the three runs: {:.0} s", time.as_secs_f64()));
    if !pass && b < e && e < s {
        details.push(format!(
            "analysis: the ordering holds but BEE gains {margin:.2} points over entropy-only, short of 2; see criterion 9 for where the gain comes from"
        ));
    }
    Verdict::new(
        pass,
        format!("mean error over {SEEDS} seeds: BEE {b:.2}% < entropy-only {e:.2}% < source-only {s:.2}%, margin {margin:.2} (need >= 2), {:.0} s (need < 300)", time.as_secs_f64()),
    )
    .with(details)
}

fn forgetting(runs: &[SeedRuns]) -> Verdict {
    let mut wins = 0;
    let mut worst_drop = f64::NEG_INFINITY;
    let mut details = Vec::new();
    for (i, r) in runs.iter().enumerate() {
        let (with, without) = (&r.bee.boundary_accuracy, &r.mcr_queue.boundary_accuracy);
        let (fw, fo) = (100.0 * with.last().unwrap(), 100.0 * without.last().unwrap());
        wins += (fw >= fo) as usize;
        let drop = with
            .iter()
            .zip(without)
            .map(|(a, b)| 100.0 * (b - a))
            .fold(f64::NEG_INFINITY, f64::max);
        worst_drop = worst_drop.max(drop);
        details.push(format!("seed {i}: final holdout accuracy with replay {fw:.2}%, without {fo:.2}%; largest boundary drop {drop:.2} points"));
    }
    let pass = wins >= 4 && worst_drop <= 5.0;
    if !pass {
        let gap = runs
            .iter()
            .map(|r| 100.0 * (r.bee.boundary_accuracy.last().unwrap() - r.mcr_queue.boundary_accuracy.last().unwrap()).abs())
            .fold(0.0_f64, f64::max);
        let floor = runs
            .iter()
            .flat_map(|r| r.bee.boundary_accuracy.iter().chain(&r.mcr_queue.boundary_accuracy))
            .fold(f64::INFINITY, |a, &b| a.min(b));
        details.push(format!(
            "analysis: holdout accuracy never falls below {:.2}% with or without replay, so there is almost no forgetting to undo; the largest final gap is {gap:.2} points",
            100.0 * floor
        ));
    }
    Verdict::new(
        pass,
        format!("replay keeps source accuracy on {wins}/{SEEDS} seeds (need >= 4); worst boundary drop {worst_drop:.2} points (need <= 5)"),
    )
    .with(details)
}

fn ablation(runs: &[SeedRuns]) -> Verdict {
    let (e, m, q) = (
        mean(runs.iter().map(|r| err(&r.entropy))),
        mean(runs.iter().map(|r| err(&r.mcr))),
        mean(runs.iter().map(|r| err(&r.mcr_queue))),
    );
    let pass = m < e && q <= m;
    let mut details: Vec<String> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| format!("seed {i}: entropy {:.2}  +mcr234 {:.2}  +queue {:.2}", err(&r.entropy), err(&r.mcr), err(&r.mcr_queue)))
        .collect();
    if q > m {
        let names = runs[0].mcr.summary.domains.iter().map(|d| d.name.clone()).collect::<Vec<_>>();
        let deltas: Vec<f64> = (0..names.len())
            .map(|d| mean(runs.iter().map(|r| r.mcr_queue.summary.domains[d].error_pct - r.mcr.summary.domains[d].error_pct)))
            .collect();
        let worse = runs.iter().filter(|r| err(&r.mcr_queue) > err(&r.mcr)).count();
        let (k, dk) = deltas
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, &d)| if d > acc.1 { (k, d) } else { acc });
        details.push(format!(
            "analysis: the sample queue raises error on {worse}/{SEEDS} seeds by {:.2} points on average; the largest per-domain increase is {dk:.2} points on {}",
            q - m,
            names[k]
        ));
        details.push(format!(
            "per-domain change from the queue: {}",
            names.iter().zip(&deltas).map(|(n, d)| format!("{n} {d:+.2}")).collect::<Vec<_>>().join(", ")
        ));
    }
    Verdict::new(
        pass,
        format!("entropy {e:.2}% -> +mcr234 {m:.2}% (must drop) -> +queue {q:.2}% (must not rise)"),
    )
    .with(details)
}

fn round_trips() -> Verdict {
    let mut r = rng(15);
    let mut ckpt_ok = true;
    for _ in 0..100 {
        let mut ps = ParamSet::new();
        for i in 0..r.gen_range(1..5) {
            let (a, b) = (r.gen_range(1..6), r.gen_range(1..6));
            let data = (0..a * b).map(|_| f64::from_bits(r.gen::<u64>() & 0x7fef_ffff_ffff_ffff)).collect();
            ps.insert(format!("p{i}.w"), Tensor::matrix(a, b, data)).unwrap();
        }
        let back = decode_checkpoint(&encode_checkpoint(&ps)).unwrap();
        ckpt_ok &= encode_checkpoint(&back) == encode_checkpoint(&ps);
    }

    let dir = tempfile::TempDir::new().unwrap();
    let cfg = tiny_config();
    let prep = prepare(&cfg, 0).unwrap();
    let mut data_ok = true;
    for (name, ds) in [("train", &prep.bench.train), ("target", prep.bench.stream.dataset())] {
        let p = dir.path().join(format!("{name}.beed"));
        save_dataset(ds, &p).unwrap();
        data_ok &= &load_dataset(&p).unwrap() == ds;
    }
    let p = dir.path().join("warm.ckpt");
    save_checkpoint(&warm_state_to_params(&prep.warm), &p).unwrap();
    let warm_ok = warm_state_from_params(&load_checkpoint(&p).unwrap(), &prep.net, &cfg).unwrap() == prep.warm;

    let conf = dir.path().join("tiny.toml");
    fs::write(&conf, render_config(&cfg)).unwrap();
    let out = dir.path().join("run");
    let status = Command::new(env!("CARGO_BIN_EXE_bee"))
        .args(["--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(["run", "--auto", "--car-strategy", "fixed:3"])
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "bee run exited with {status}");
    let metrics = fs::read_to_string(out.join(cli::METRICS)).unwrap();
    let mut records = 0;
    for line in metrics.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let obj = v.as_object().unwrap();
        check_schema(obj, &golden("metrics_record.txt"));
        if let Some(m) = obj["merge"].as_object() {
            check_schema(m, &golden("merge_record.txt"));
        }
        records += 1;
    }
    let summary = fs::read_to_string(out.join(cli::SUMMARY)).unwrap();
    let summary_ok = summary.starts_with(&golden("summary_header.csv"));
    let pass = ckpt_ok && data_ok && warm_ok && summary_ok && records > 0;
    Verdict::new(pass, "bit-exact round trips and golden output schemas").with(vec![
        format!("100 random checkpoints re-encode identically: {ckpt_ok}"),
        format!("datasets and the warm-up state reload bit-exactly: {}", data_ok && warm_ok),
        format!("{records} metrics records match the golden schema; summary header matches: {summary_ok}"),
    ])
}

fn oracle_equivalence() -> Verdict {
    let mut cfg = tiny_config();
    cfg.mcr.kind = Consistency::None;
    cfg.adapt.use_queue = false;
    cfg.car.strategy = ReplayStrategy::Off;
    let mut batches = 0;
    let mut identical = true;
    for seed in 0..3 {
        let prep = prepare(&cfg, seed).unwrap();
        let mut state = BeeState::new(prep.net.clone(), cfg.clone(), prep.warm.clone(), sub_seed(seed, "adapt")).unwrap();
        let mut oracle = EntropyOracle::new(prep.net.clone(), &prep.warm, cfg.adam(), cfg.adapt.ema);
        for b in prep.bench.stream.batches() {
            let (y, _) = state.process_batch(&b.features).unwrap();
            identical &= y.data() == oracle.step(&b.features).data();
            batches += 1;
        }
        identical &= state.student() == &oracle.student && state.teacher() == &oracle.teacher;
    }
    Verdict::new(identical, "entropy-only loop vs independent baseline")
        .with(vec![format!("{batches} batches over 3 seeds; predictions and final parameters bitwise equal: {identical}")])
}

fn main() -> ExitCode {
    let strict = std::env::var("BEE_ACCEPT_STRICT").is_ok_and(|v| v == "1");
    panic::set_hook(Box::new(|_| {}));
    let mut hard_fail = false;
    let mut report = |n: usize, name: &str, contract: bool, v: Verdict| {
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {status} {name}: {}", v.summary);
        for d in &v.details {
            println!("      {d}");
        }
        if !v.pass && (contract || strict) {
            hard_fail = true;
        }
    };

    report(1, "gradient oracle", true, guarded(gradients));
    report(2, "sinkhorn contract", true, guarded(sinkhorn));
    report(3, "ema exactness", true, guarded(ema));
    report(4, "symmetric kl", true, guarded(symmetric_kl));
    report(5, "merging", true, guarded(merging));
    report(6, "trigger behaviour", true, guarded(detector));

    eprintln!("running the end-to-end experiments ({SEEDS} seeds, default benchmark)");
    match panic::catch_unwind(experiments) {
        Ok(runs) => {
            report(7, "end-to-end direction", false, guarded(|| end_to_end(&runs)));
            report(8, "anti-forgetting", false, guarded(|| forgetting(&runs)));
            report(9, "ablation direction", false, guarded(|| ablation(&runs)));
        }
        Err(_) => {
            for (n, name) in [(7, "end-to-end direction"), (8, "anti-forgetting"), (9, "ablation direction")] {
                report(n, name, false, Verdict::new(false, "experiments aborted"));
            }
        }
    }

    report(10, "round trips and schemas", true, guarded(round_trips));
    report(11, "oracle equivalence", true, guarded(oracle_equivalence));

    if hard_fail {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
