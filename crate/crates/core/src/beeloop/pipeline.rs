//! End-to-end experiment helpers: data, source model, warm-up, runs.

use crate::error::Result;
use crate::netcore::{Network, ParamSet};
use crate::seed::{rng, sub_seed};
use crate::stream::{gen_source, Dataset, DomainSchedule, TargetStream};

use super::config::BeeConfig;
use super::run::{run, RunOutput};
use super::state::BeeState;
use super::training::{train_source, warmup, WarmState};

/// Source data and the target stream for one seed.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub train: Dataset,
    pub holdout: Dataset,
    pub schedule: DomainSchedule,
    pub stream: TargetStream,
}

pub fn make_benchmark(cfg: &BeeConfig, seed: u64) -> Result<Benchmark> {
    let data_seed = sub_seed(seed, "data");
    let task = cfg.task(data_seed);
    let (train, holdout) = gen_source(&task)?;
    let schedule = DomainSchedule::desk_default(
        cfg.data.domains,
        cfg.data.batches_per_domain,
        cfg.data.batch_size,
        sub_seed(seed, "corruption"),
    )?;
    let stream = schedule.generate(&task, &cfg.data.severity, sub_seed(seed, "stream"))?;
    Ok(Benchmark {
        train,
        holdout,
        schedule,
        stream,
    })
}

/// Fresh fan-in-uniform initialisation for `seed`.
pub fn init_params(net: &Network, seed: u64) -> ParamSet {
    net.init_params(&mut rng(sub_seed(seed, "init")))
}

/// Everything a run needs that does not depend on the adaptation switches.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub net: Network,
    pub bench: Benchmark,
    pub source: ParamSet,
    pub warm: WarmState,
}

/// Generate data, train the source model and warm up, all from `seed`.
pub fn prepare(cfg: &BeeConfig, seed: u64) -> Result<Prepared> {
    cfg.validate()?;
    let net = Network::new(cfg.network_spec())?;
    let bench = make_benchmark(cfg, seed)?;
    let source = train_source(&net, &init_params(&net, seed), &bench.train, &cfg.source, sub_seed(seed, "source"))?;
    let warm = warmup(&net, &source, &bench.train, cfg, sub_seed(seed, "warmup"))?;
    Ok(Prepared {
        net,
        bench,
        source,
        warm,
    })
}

/// Run `cfg` on a prepared benchmark. A frozen config evaluates the source
/// model itself; anything else starts from the warm-up state.
pub fn run_prepared(prep: &Prepared, cfg: &BeeConfig, seed: u64) -> Result<RunOutput> {
    let mut state = if cfg.adapt.frozen {
        BeeState::frozen(prep.net.clone(), cfg, prep.source.clone())?
    } else {
        BeeState::new(prep.net.clone(), cfg.clone(), prep.warm.clone(), sub_seed(seed, "adapt"))?
    };
    run(&mut state, &prep.bench.stream, Some(&prep.bench.holdout), |_| Ok(()))
}
