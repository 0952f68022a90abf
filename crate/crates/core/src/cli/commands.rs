use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beeloop::{
    component_rows, configure_ablation, eval_source_holdout, init_params, make_benchmark, prepare, replay_rows,
    run, run_prepared, train_source, warm_state_from_params, warm_state_to_params, warmup, AblationRow, BeeConfig,
    BeeState, MergeKind, ReplayStrategy, RunOutput, StepReport, WarmState,
};
use crate::error::{invalid, Error, Result};
use crate::netcore::{load_checkpoint, save_checkpoint, Network, ParamSet};
use crate::seed::sub_seed;
use crate::stream::{load_dataset, save_dataset, Dataset, DomainSchedule, TargetStream};

use super::args::{AblateArgs, Cli, Command, DataArgs, EvalArgs, GlobalArgs, PlotArgs, RunArgs, TableChoice};
use super::config::{apply_switches, load_config, render_config};
use super::plot::{line_chart, loss_series, Series};

pub const SOURCE_TRAIN: &str = "source_train.beed";
pub const SOURCE_HOLDOUT: &str = "source_holdout.beed";
pub const TARGET_STREAM: &str = "target_stream.beed";
pub const SCHEDULE: &str = "schedule.json";
pub const SOURCE_CKPT: &str = "source.ckpt";
pub const WARMUP_CKPT: &str = "warmup.ckpt";
pub const METRICS: &str = "metrics.jsonl";
pub const SUMMARY: &str = "summary.csv";
pub const BOUNDARY: &str = "boundary.csv";
pub const MANIFEST: &str = "manifest.json";
pub const ABLATION: &str = "ablation.csv";
pub const FORGETTING: &str = "forgetting.csv";
pub const LOSS_SVG: &str = "loss.svg";
pub const ACCURACY_SVG: &str = "accuracy.svg";

pub fn execute(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::GenData { domains } => gen_data(g, *domains),
        Command::TrainSource(a) => cmd_train_source(g, a),
        Command::Warmup(a) => cmd_warmup(g, a),
        Command::Run(a) => cmd_run(g, a),
        Command::Ablate(a) => cmd_ablate(g, a),
        Command::EvalSource(a) => cmd_eval_source(g, a),
        Command::Plot(a) => cmd_plot(g, a),
    }
}

/// Refuse to touch existing `names` under `dir` unless forced, and create
/// `dir` when missing.
fn claim(dir: &Path, names: &[&str], force: bool) -> Result<Vec<PathBuf>> {
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(Error::Exists(p.display().to_string()));
        }
    }
    fs::create_dir_all(dir)?;
    Ok(paths)
}

struct Data {
    train: Dataset,
    holdout: Dataset,
    stream: TargetStream,
    /// Files the data was read from; empty when generated from the seed.
    inputs: Vec<PathBuf>,
}

fn load_data(cfg: &BeeConfig, seed: u64, dir: Option<&Path>) -> Result<Data> {
    let Some(dir) = dir else {
        let b = make_benchmark(cfg, seed)?;
        return Ok(Data {
            train: b.train,
            holdout: b.holdout,
            stream: b.stream,
            inputs: Vec::new(),
        });
    };
    let inputs: Vec<PathBuf> = [SOURCE_TRAIN, SOURCE_HOLDOUT, TARGET_STREAM, SCHEDULE]
        .iter()
        .map(|n| dir.join(n))
        .collect();
    let schedule: DomainSchedule = serde_json::from_slice(&fs::read(&inputs[3])?)?;
    let names = schedule.domains.iter().map(|d| d.name.clone()).collect();
    Ok(Data {
        train: load_dataset(&inputs[0])?,
        holdout: load_dataset(&inputs[1])?,
        stream: TargetStream::new(load_dataset(&inputs[2])?, schedule.batch_size, names)?,
        inputs,
    })
}

fn gen_data(g: &GlobalArgs, domains: Option<usize>) -> Result<()> {
    let mut cfg = load_config(g.config.as_deref())?;
    if let Some(n) = domains {
        cfg.data.domains = n;
    }
    cfg.validate()?;
    let paths = claim(&g.out, &[SOURCE_TRAIN, SOURCE_HOLDOUT, TARGET_STREAM, SCHEDULE], g.force)?;
    let b = make_benchmark(&cfg, g.seed)?;
    save_dataset(&b.train, &paths[0])?;
    save_dataset(&b.holdout, &paths[1])?;
    save_dataset(b.stream.dataset(), &paths[2])?;
    fs::write(&paths[3], serde_json::to_vec_pretty(&b.schedule)?)?;
    println!(
        "{} domains x {} batches x {} samples; source {} train / {} holdout",
        b.schedule.domains.len(),
        b.schedule.batches_per_domain,
        b.schedule.batch_size,
        b.train.len(),
        b.holdout.len()
    );
    for (i, d) in b.schedule.domains.iter().enumerate() {
        println!("  domain {i}: {}", d.name);
    }
    Ok(())
}

fn train_and_save(net: &Network, cfg: &BeeConfig, seed: u64, train: &Dataset, path: &Path) -> Result<ParamSet> {
    let source = train_source(net, &init_params(net, seed), train, &cfg.source, sub_seed(seed, "source"))?;
    save_checkpoint(&source, path)?;
    Ok(source)
}

fn warm_and_save(
    net: &Network,
    cfg: &BeeConfig,
    seed: u64,
    source: &ParamSet,
    train: &Dataset,
    path: &Path,
) -> Result<WarmState> {
    let warm = warmup(net, source, train, cfg, sub_seed(seed, "warmup"))?;
    save_checkpoint(&warm_state_to_params(&warm), path)?;
    Ok(warm)
}

fn cmd_train_source(g: &GlobalArgs, a: &DataArgs) -> Result<()> {
    let cfg = load_config(g.config.as_deref())?;
    let paths = claim(&g.out, &[SOURCE_CKPT], g.force)?;
    let data = load_data(&cfg, g.seed, a.data.as_deref())?;
    let net = Network::new(cfg.network_spec())?;
    let source = train_and_save(&net, &cfg, g.seed, &data.train, &paths[0])?;
    let acc = eval_source_holdout(&net, &source, &data.holdout)?;
    println!("source holdout accuracy {:.2}%", 100.0 * acc);
    Ok(())
}

fn cmd_warmup(g: &GlobalArgs, a: &DataArgs) -> Result<()> {
    let cfg = load_config(g.config.as_deref())?;
    let paths = claim(&g.out, &[WARMUP_CKPT], g.force)?;
    let data = load_data(&cfg, g.seed, a.data.as_deref())?;
    let net = Network::new(cfg.network_spec())?;
    let source = load_checkpoint(g.out.join(SOURCE_CKPT))?;
    net.check_params(&source)?;
    let warm = warm_and_save(&net, &cfg, g.seed, &source, &data.train, &paths[0])?;
    let acc = eval_source_holdout(&net, &warm.student, &data.holdout)?;
    println!("post-warm-up holdout accuracy {:.2}%", 100.0 * acc);
    Ok(())
}

/// Source and warm-up state from `dir`, or freshly computed (and saved when
/// `save`) if missing and `auto` is set.
fn models(
    net: &Network,
    cfg: &BeeConfig,
    seed: u64,
    data: &Data,
    dir: &Path,
    auto: bool,
    save: bool,
) -> Result<(ParamSet, WarmState)> {
    let src_path = dir.join(SOURCE_CKPT);
    let warm_path = dir.join(WARMUP_CKPT);
    let missing = |p: &Path| {
        Error::InvalidArgument(format!("{} not found (run train-source and warmup, or pass --auto)", p.display()))
    };
    let source = if src_path.exists() {
        let s = load_checkpoint(&src_path)?;
        net.check_params(&s)?;
        s
    } else if auto {
        let s = train_source(net, &init_params(net, seed), &data.train, &cfg.source, sub_seed(seed, "source"))?;
        if save {
            save_checkpoint(&s, &src_path)?;
        }
        s
    } else {
        return Err(missing(&src_path));
    };
    let warm = if warm_path.exists() {
        warm_state_from_params(&load_checkpoint(&warm_path)?, net, cfg)?
    } else if auto {
        let w = warmup(net, &source, &data.train, cfg, sub_seed(seed, "warmup"))?;
        if save {
            save_checkpoint(&warm_state_to_params(&w), &warm_path)?;
        }
        w
    } else {
        return Err(missing(&warm_path));
    };
    Ok((source, warm))
}

fn new_state(net: &Network, cfg: &BeeConfig, seed: u64, source: &ParamSet, warm: &WarmState) -> Result<BeeState> {
    if cfg.adapt.frozen {
        BeeState::frozen(net.clone(), cfg, source.clone())
    } else {
        BeeState::new(net.clone(), cfg.clone(), warm.clone(), sub_seed(seed, "adapt"))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, toml::Value>,
    pub seed: u64,
    /// SHA-256 over the rendered config, the seed and every input file.
    pub input_hash: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
}

fn input_hash(cfg: &BeeConfig, seed: u64, inputs: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(render_config(cfg).as_bytes());
    h.update(seed.to_le_bytes());
    for p in inputs {
        h.update(p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        h.update(fs::read(p)?);
    }
    Ok(format!("{:x}", h.finalize()))
}

fn write_summary(path: &Path, out: &RunOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["domain_name", "error_pct"]).map_err(csv_err)?;
    for d in &out.summary.domains {
        w.write_record([d.name.clone(), d.error_pct.to_string()]).map_err(csv_err)?;
    }
    w.write_record(["mean".to_string(), out.summary.mean_error_pct.to_string()])
        .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

fn write_boundary(path: &Path, names: &[String], acc: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["boundary", "domain_name", "holdout_acc_pct"]).map_err(csv_err)?;
    for (i, (n, a)) in names.iter().zip(acc).enumerate() {
        w.write_record([i.to_string(), n.clone(), (100.0 * a).to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

fn cmd_run(g: &GlobalArgs, a: &RunArgs) -> Result<()> {
    let t0 = Instant::now();
    let mut cfg = load_config(g.config.as_deref())?;
    apply_switches(&mut cfg, &a.switches)?;
    let names = [METRICS, SUMMARY, BOUNDARY, MANIFEST];
    let paths = claim(&g.out, &names, g.force)?;
    let data = load_data(&cfg, g.seed, a.data.data.as_deref())?;
    let net = Network::new(cfg.network_spec())?;
    let (source, warm) = models(&net, &cfg, g.seed, &data, &g.out, a.auto, true)?;
    let t_prep = t0.elapsed().as_secs_f64();

    let mut state = new_state(&net, &cfg, g.seed, &source, &warm)?;
    let mut metrics = BufWriter::new(File::create(&paths[0])?);
    let out = run(&mut state, &data.stream, Some(&data.holdout), |r| {
        serde_json::to_writer(&mut metrics, r)?;
        metrics.write_all(b"\n")?;
        Ok(())
    })?;
    metrics.flush()?;
    let t_run = t0.elapsed().as_secs_f64() - t_prep;
    write_summary(&paths[1], &out)?;
    write_boundary(&paths[2], data.stream.domain_names(), &out.boundary_accuracy)?;

    let mut outputs: Vec<String> = paths[..3].iter().map(|p| p.display().to_string()).collect();
    if a.dump_anchors {
        let dir = g.out.join("anchors");
        fs::create_dir_all(&dir)?;
        for anchor in state.pool().iter() {
            let p = dir.join(format!("anchor_{:06}.ckpt", anchor.step));
            save_checkpoint(&anchor.params, &p)?;
            outputs.push(p.display().to_string());
        }
    }
    let mut inputs = data.inputs.clone();
    inputs.extend([g.out.join(SOURCE_CKPT), g.out.join(WARMUP_CKPT)].into_iter().filter(|p| p.exists()));
    let manifest = RunManifest {
        command: "run".into(),
        config: cfg.to_pairs().into_iter().collect(),
        seed: g.seed,
        input_hash: input_hash(&cfg, g.seed, &inputs)?,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs,
        timings_s: BTreeMap::from([("prepare".to_string(), t_prep), ("adapt".to_string(), t_run)]),
    };
    fs::write(&paths[3], serde_json::to_vec_pretty(&manifest)?)?;

    for d in &out.summary.domains {
        println!("{:<18} {:6.2}%", d.name, d.error_pct);
    }
    println!("{:<18} {:6.2}%", "mean", out.summary.mean_error_pct);
    let triggers = out.reports.iter().filter(|r| r.trigger).count();
    let merges = out.reports.iter().filter(|r| r.merge.is_some()).count();
    println!("triggers {triggers}, merges {merges}");
    Ok(())
}

/// Worker count from `BEE_THREADS`; zero or unset lets rayon decide.
pub fn thread_count() -> Result<usize> {
    match std::env::var("BEE_THREADS") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("BEE_THREADS must be a count, got {s:?}"))),
        Err(_) => Ok(0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub row: AblationRow,
    pub errors: Vec<f64>,
}

impl AblationResult {
    pub fn mean(&self) -> f64 {
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }
}

/// Every `(row, seed)` run, in parallel but assembled in row order.
pub fn ablate(base: &BeeConfig, rows: &[AblationRow], seeds: &[u64], threads: usize) -> Result<Vec<AblationResult>> {
    let configs = rows
        .iter()
        .map(|r| configure_ablation(base, &r.switches))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        let preps = seeds.par_iter().map(|&s| prepare(base, s)).collect::<Result<Vec<_>>>()?;
        let jobs: Vec<(usize, usize)> = (0..rows.len()).flat_map(|r| (0..seeds.len()).map(move |s| (r, s))).collect();
        let errs = jobs
            .par_iter()
            .map(|&(r, s)| run_prepared(&preps[s], &configs[r], seeds[s]).map(|o| o.summary.mean_error_pct))
            .collect::<Result<Vec<_>>>()?;
        Ok(rows
            .iter()
            .zip(errs.chunks(seeds.len()))
            .map(|(row, e)| AblationResult {
                row: row.clone(),
                errors: e.to_vec(),
            })
            .collect())
    })
}

fn cmd_ablate(g: &GlobalArgs, a: &AblateArgs) -> Result<()> {
    if a.seeds == 0 {
        return invalid("--seeds must be at least 1");
    }
    let cfg = load_config(g.config.as_deref())?;
    let paths = claim(&g.out, &[ABLATION], g.force)?;
    let rows: Vec<AblationRow> = match a.table {
        TableChoice::Components => component_rows(),
        TableChoice::Replay => replay_rows(),
        TableChoice::All => component_rows().into_iter().chain(replay_rows()).collect(),
    };
    let seeds: Vec<u64> = (g.seed..g.seed + a.seeds).collect();
    let results = ablate(&cfg, &rows, &seeds, thread_count()?)?;

    let mut w = csv::Writer::from_path(&paths[0]).map_err(csv_err)?;
    let mut header = vec!["table".to_string(), "row".into(), "label".into(), "mean_error_pct".into()];
    header.extend(seeds.iter().map(|s| format!("seed_{s}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in &results {
        let mut rec = vec![r.row.table.to_string(), r.row.row.to_string(), r.row.label.clone(), r.mean().to_string()];
        rec.extend(r.errors.iter().map(|e| e.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
        println!("{:<10} {:>2} {:<24} {:6.2}%", r.row.table, r.row.row, r.row.label, r.mean());
    }
    w.flush()?;
    Ok(())
}

fn cmd_eval_source(g: &GlobalArgs, a: &EvalArgs) -> Result<()> {
    let cfg = load_config(g.config.as_deref())?;
    let net = Network::new(cfg.network_spec())?;
    let data = load_data(&cfg, g.seed, a.data.data.as_deref())?;
    if let Some(path) = &a.checkpoint {
        let ps = load_checkpoint(path)?;
        let params = if net.check_params(&ps).is_ok() {
            ps
        } else {
            warm_state_from_params(&ps, &net, &cfg)?.student
        };
        let acc = eval_source_holdout(&net, &params, &data.holdout)?;
        println!("{}: source holdout accuracy {:.2}%", path.display(), 100.0 * acc);
        return Ok(());
    }
    let paths = claim(&g.out, &[FORGETTING], g.force)?;
    let (source, warm) = models(&net, &cfg, g.seed, &data, &g.out, true, false)?;
    let mut with_car = cfg.clone();
    if with_car.car.strategy == ReplayStrategy::Off {
        with_car.car.strategy = ReplayStrategy::Trigger(MergeKind::Weighted);
    }
    let mut without = cfg.clone();
    without.car.strategy = ReplayStrategy::Off;
    let mut curves = Vec::new();
    for c in [&with_car, &without] {
        let mut state = new_state(&net, c, g.seed, &source, &warm)?;
        curves.push(run(&mut state, &data.stream, Some(&data.holdout), |_| Ok(()))?.boundary_accuracy);
    }
    let mut w = csv::Writer::from_path(&paths[0]).map_err(csv_err)?;
    w.write_record(["boundary", "domain_name", "with_car_acc_pct", "without_car_acc_pct"])
        .map_err(csv_err)?;
    for (i, name) in data.stream.domain_names().iter().enumerate() {
        let (x, y) = (100.0 * curves[0][i], 100.0 * curves[1][i]);
        w.write_record([i.to_string(), name.clone(), x.to_string(), y.to_string()])
            .map_err(csv_err)?;
        println!("{name:<18} with CAR {x:6.2}%  without {y:6.2}%");
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<StepReport>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    if out.is_empty() {
        return invalid(format!("{} holds no metrics", path.display()));
    }
    Ok(out)
}

/// Accuracy series from a boundary CSV: every column after `boundary` and
/// `domain_name` is one series.
fn read_boundary(path: &Path, label: &str) -> Result<Vec<Series>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if headers.len() < 3 || headers[0] != "boundary" {
        return invalid(format!("{} is not a boundary-accuracy table", path.display()));
    }
    let mut series: Vec<Series> = headers[2..]
        .iter()
        .map(|h| Series {
            label: if headers.len() == 3 {
                label.to_string()
            } else {
                format!("{label} {}", h.trim_end_matches("_acc_pct").replace('_', " "))
            },
            points: Vec::new(),
            marks: Vec::new(),
        })
        .collect();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("{}: bad number {s:?}", path.display())))
        };
        let x = parse(&rec[0])?;
        for (k, s) in series.iter_mut().enumerate() {
            s.points.push((x, parse(&rec[k + 2])?));
        }
    }
    if series.iter().all(|s| s.points.is_empty()) {
        return invalid(format!("{} holds no rows", path.display()));
    }
    Ok(series)
}

fn cmd_plot(g: &GlobalArgs, a: &PlotArgs) -> Result<()> {
    let mut loss = Vec::new();
    let mut acc = Vec::new();
    for (i, p) in a.inputs.iter().enumerate() {
        let label = a.labels.get(i).cloned().unwrap_or_else(|| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        });
        match p.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => loss.push(loss_series(&label, &read_metrics(p)?)),
            Some("csv") => acc.extend(read_boundary(p, &label)?),
            _ => return invalid(format!("{}: expected a .jsonl or .csv file", p.display())),
        }
    }
    let mut names = Vec::new();
    if !loss.is_empty() {
        names.push(LOSS_SVG);
    }
    if !acc.is_empty() {
        names.push(ACCURACY_SVG);
    }
    let paths = claim(&g.out, &names, g.force)?;
    let mut paths = paths.into_iter();
    if !loss.is_empty() {
        let p = paths.next().expect("claimed");
        fs::write(&p, line_chart("Consistency loss", "step", "loss", &loss)?)?;
        println!("wrote {}", p.display());
    }
    if !acc.is_empty() {
        let p = paths.next().expect("claimed");
        fs::write(
            &p,
            line_chart("Source holdout accuracy", "domain boundary", "accuracy (%)", &acc)?,
        )?;
        println!("wrote {}", p.display());
    }
    Ok(())
}
