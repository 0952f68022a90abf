use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use toml::Value;

use crate::car::DetectorConfig;
use crate::error::{Error, Result};
use crate::mcr::McrConfig;
use crate::netcore::{AdamConfig, NetworkSpec};
use crate::stream::{SeverityTable, SourceTask};

/// How the two models' outputs are combined into the committed prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Average of the two softmax outputs.
    #[default]
    Probability,
    /// Softmax of the averaged logits.
    Logit,
}

/// Which teacher-student consistency loss drives the first update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Consistency {
    None,
    /// Codebook assignment consistency over the configured blocks.
    #[default]
    Mcr,
    /// Cross-entropy between teacher and student class predictions.
    Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeKind {
    /// Top-K anchors, divergence-softmax weights.
    Weighted,
    /// Top-K anchors, uniform weights.
    Average,
    /// Restore the post-warm-up student.
    SourceReset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayStrategy {
    Off,
    /// Replay when the shift detector fires.
    Trigger(MergeKind),
    /// Weighted replay every `n` batches, ignoring the detector.
    FixedInterval(u64),
}

impl fmt::Display for ReplayStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayStrategy::Off => f.write_str("off"),
            ReplayStrategy::Trigger(MergeKind::Weighted) => f.write_str("trigger"),
            ReplayStrategy::Trigger(MergeKind::Average) => f.write_str("average"),
            ReplayStrategy::Trigger(MergeKind::SourceReset) => f.write_str("source-reset"),
            ReplayStrategy::FixedInterval(n) => write!(f, "fixed:{n}"),
        }
    }
}

impl FromStr for ReplayStrategy {
    type Err = Error;

    /// `trigger` and `weighted` both name trigger-driven weighted merging.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "off" => ReplayStrategy::Off,
            "trigger" | "weighted" => ReplayStrategy::Trigger(MergeKind::Weighted),
            "average" => ReplayStrategy::Trigger(MergeKind::Average),
            "source-reset" => ReplayStrategy::Trigger(MergeKind::SourceReset),
            _ => match s.strip_prefix("fixed:").map(str::parse::<u64>) {
                Some(Ok(n)) if n > 0 => ReplayStrategy::FixedInterval(n),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown replay strategy {s:?} (expected trigger, fixed:N, source-reset, average, weighted or off)"
                    )))
                }
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Bee,
    EntropyOnly,
    SourceOnly,
    PredConsistency,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bee" => Preset::Bee,
            "entropy-only" => Preset::EntropyOnly,
            "source-only" => Preset::SourceOnly,
            "pred-consistency" => Preset::PredConsistency,
            _ => return Err(Error::InvalidArgument(format!("unknown preset {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub dim: usize,
    pub classes: usize,
    pub sigma: f64,
    pub center_scale: f64,
    pub min_separation: f64,
    pub n_train: usize,
    pub n_holdout: usize,
    pub domains: usize,
    pub batches_per_domain: usize,
    pub batch_size: usize,
    pub severity: SeverityTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub widths: Vec<usize>,
    pub shallow: BTreeSet<usize>,
    pub train_head: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmupConfig {
    pub epochs: usize,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptConfig {
    /// No parameter updates at all; predictions come from the source model.
    pub frozen: bool,
    pub lr: f64,
    /// Teacher EMA momentum.
    pub ema: f64,
    pub entropy: bool,
    pub averaging: Averaging,
    pub use_queue: bool,
    pub inner_steps: usize,
    pub queue_capacity: usize,
    pub inner_batch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyConfig {
    pub kind: Consistency,
    pub prototypes: usize,
    pub tau_student: f64,
    pub tau_teacher: f64,
    pub sinkhorn_iters: usize,
    pub feature_queue: usize,
    pub blocks: BTreeSet<usize>,
    /// Std of Gaussian noise added to the student's input for the
    /// consistency loss. Zero disables augmentation.
    pub student_noise: f64,
    /// Whether teacher features of samples replayed from the sample queue
    /// also enter the balancing queue (they are already there once).
    pub enqueue_replayed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarConfig {
    pub strategy: ReplayStrategy,
    pub top_k: usize,
    pub period: u64,
    pub capacity: usize,
    pub detector: DetectorConfig,
}

/// Every tunable of an experiment, addressed by dotted keys such as
/// `car.period` or `mcr.blocks`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeeConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub source: SourceConfig,
    pub warmup: WarmupConfig,
    pub adapt: AdaptConfig,
    pub mcr: ConsistencyConfig,
    pub car: CarConfig,
}

impl Default for BeeConfig {
    fn default() -> Self {
        Self {
            data: DataConfig {
                dim: 32,
                classes: 10,
                sigma: 1.0,
                center_scale: 1.2,
                min_separation: 6.0,
                n_train: 5000,
                n_holdout: 2000,
                domains: 8,
                batches_per_domain: 50,
                batch_size: 64,
                severity: SeverityTable::default(),
            },
            model: ModelConfig {
                widths: vec![64, 64, 64, 64],
                shallow: BTreeSet::from([1]),
                train_head: false,
            },
            source: SourceConfig {
                epochs: 10,
                lr: 1e-3,
                batch_size: 64,
            },
            warmup: WarmupConfig {
                epochs: 1,
                batch_size: 64,
            },
            adapt: AdaptConfig {
                frozen: false,
                lr: 1e-3,
                ema: 0.999,
                entropy: true,
                averaging: Averaging::Probability,
                use_queue: true,
                inner_steps: 2,
                queue_capacity: 640,
                inner_batch: 64,
            },
            mcr: ConsistencyConfig {
                kind: Consistency::Mcr,
                prototypes: 64,
                tau_student: 0.1,
                tau_teacher: 0.05,
                sinkhorn_iters: 3,
                feature_queue: 512,
                blocks: BTreeSet::from([2, 3, 4]),
                student_noise: 0.0,
                enqueue_replayed: false,
            },
            car: CarConfig {
                strategy: ReplayStrategy::Trigger(MergeKind::Weighted),
                top_k: 5,
                period: 30,
                capacity: 50,
                detector: DetectorConfig::default(),
            },
        }
    }
}

fn int(v: &Value) -> std::result::Result<i64, String> {
    v.as_integer().ok_or_else(|| format!("expected an integer, got {v}"))
}

fn uint(v: &Value) -> std::result::Result<usize, String> {
    let i = int(v)?;
    usize::try_from(i).map_err(|_| format!("expected a non-negative integer, got {i}"))
}

fn real(v: &Value) -> std::result::Result<f64, String> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(format!("expected a number, got {v}")),
    }
}

fn boolean(v: &Value) -> std::result::Result<bool, String> {
    v.as_bool().ok_or_else(|| format!("expected true or false, got {v}"))
}

fn text(v: &Value) -> std::result::Result<&str, String> {
    v.as_str().ok_or_else(|| format!("expected a string, got {v}"))
}

fn uint_list(v: &Value) -> std::result::Result<Vec<usize>, String> {
    v.as_array()
        .ok_or_else(|| format!("expected a list of integers, got {v}"))?
        .iter()
        .map(uint)
        .collect()
}

fn five(v: &Value) -> std::result::Result<[f64; 5], String> {
    let xs = v
        .as_array()
        .ok_or_else(|| format!("expected a list of 5 numbers, got {v}"))?
        .iter()
        .map(real)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    xs.try_into().map_err(|xs: Vec<f64>| format!("expected 5 numbers, got {}", xs.len()))
}

fn list(xs: impl IntoIterator<Item = usize>) -> Value {
    Value::Array(xs.into_iter().map(|x| Value::Integer(x as i64)).collect())
}

fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::Float(x)).collect())
}

impl BeeConfig {
    /// Set one dotted key. Errors are returned as messages so callers can
    /// report every bad key at once.
    pub fn set(&mut self, key: &str, v: &Value) -> std::result::Result<(), String> {
        let sev = &mut self.data.severity;
        match key {
            "data.dim" => self.data.dim = uint(v)?,
            "data.classes" => self.data.classes = uint(v)?,
            "data.sigma" => self.data.sigma = real(v)?,
            "data.center_scale" => self.data.center_scale = real(v)?,
            "data.min_separation" => self.data.min_separation = real(v)?,
            "data.n_train" => self.data.n_train = uint(v)?,
            "data.n_holdout" => self.data.n_holdout = uint(v)?,
            "data.domains" => self.data.domains = uint(v)?,
            "data.batches_per_domain" => self.data.batches_per_domain = uint(v)?,
            "data.batch_size" => self.data.batch_size = uint(v)?,
            "data.severity.additive_noise" => sev.additive_noise = five(v)?,
            "data.severity.rotation_deg" => sev.rotation_deg = five(v)?,
            "data.severity.scaling" => sev.scaling = five(v)?,
            "data.severity.coordinate_mask" => sev.coordinate_mask = five(v)?,
            "data.severity.mean_shift" => sev.mean_shift = five(v)?,
            "model.widths" => self.model.widths = uint_list(v)?,
            "model.shallow" => self.model.shallow = uint_list(v)?.into_iter().collect(),
            "model.train_head" => self.model.train_head = boolean(v)?,
            "source.epochs" => self.source.epochs = uint(v)?,
            "source.lr" => self.source.lr = real(v)?,
            "source.batch_size" => self.source.batch_size = uint(v)?,
            "warmup.epochs" => self.warmup.epochs = uint(v)?,
            "warmup.batch_size" => self.warmup.batch_size = uint(v)?,
            "adapt.frozen" => self.adapt.frozen = boolean(v)?,
            "adapt.lr" => self.adapt.lr = real(v)?,
            "adapt.ema" => self.adapt.ema = real(v)?,
            "adapt.entropy" => self.adapt.entropy = boolean(v)?,
            "adapt.averaging" => {
                self.adapt.averaging = match text(v)? {
                    "probability" => Averaging::Probability,
                    "logit" => Averaging::Logit,
                    s => return Err(format!("expected \"probability\" or \"logit\", got {s:?}")),
                }
            }
            "adapt.use_queue" => self.adapt.use_queue = boolean(v)?,
            "adapt.inner_steps" => self.adapt.inner_steps = uint(v)?,
            "adapt.queue_capacity" => self.adapt.queue_capacity = uint(v)?,
            "adapt.inner_batch" => self.adapt.inner_batch = uint(v)?,
            "mcr.kind" => {
                self.mcr.kind = match text(v)? {
                    "none" => Consistency::None,
                    "mcr" => Consistency::Mcr,
                    "prediction" => Consistency::Prediction,
                    s => return Err(format!("expected \"none\", \"mcr\" or \"prediction\", got {s:?}")),
                }
            }
            "mcr.prototypes" => self.mcr.prototypes = uint(v)?,
            "mcr.tau_student" => self.mcr.tau_student = real(v)?,
            "mcr.tau_teacher" => self.mcr.tau_teacher = real(v)?,
            "mcr.sinkhorn_iters" => self.mcr.sinkhorn_iters = uint(v)?,
            "mcr.feature_queue" => self.mcr.feature_queue = uint(v)?,
            "mcr.blocks" => self.mcr.blocks = uint_list(v)?.into_iter().collect(),
            "mcr.student_noise" => self.mcr.student_noise = real(v)?,
            "mcr.enqueue_replayed" => self.mcr.enqueue_replayed = boolean(v)?,
            "car.strategy" => self.car.strategy = text(v)?.parse().map_err(|e: Error| e.to_string())?,
            "car.top_k" => self.car.top_k = uint(v)?,
            "car.period" | "car.xi" => self.car.period = uint(v)? as u64,
            "car.capacity" => self.car.capacity = uint(v)?,
            "car.window" => self.car.detector.window = uint(v)?,
            "car.threshold" | "car.eta" => self.car.detector.threshold = real(v)?,
            "car.momentum" => self.car.detector.momentum = real(v)?,
            "car.min_fill" => self.car.detector.min_fill = uint(v)?,
            "car.sigma_floor" => self.car.detector.sigma_floor = real(v)?,
            "car.restart_smoothing" => self.car.detector.restart_smoothing = boolean(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Canonical flat view of the configuration, in key order.
    pub fn to_pairs(&self) -> Vec<(String, Value)> {
        let sev = &self.data.severity;
        let kind = match self.mcr.kind {
            Consistency::None => "none",
            Consistency::Mcr => "mcr",
            Consistency::Prediction => "prediction",
        };
        let averaging = match self.adapt.averaging {
            Averaging::Probability => "probability",
            Averaging::Logit => "logit",
        };
        let i = |x: usize| Value::Integer(x as i64);
        let d = &self.car.detector;
        vec![
            ("data.dim", i(self.data.dim)),
            ("data.classes", i(self.data.classes)),
            ("data.sigma", Value::Float(self.data.sigma)),
            ("data.center_scale", Value::Float(self.data.center_scale)),
            ("data.min_separation", Value::Float(self.data.min_separation)),
            ("data.n_train", i(self.data.n_train)),
            ("data.n_holdout", i(self.data.n_holdout)),
            ("data.domains", i(self.data.domains)),
            ("data.batches_per_domain", i(self.data.batches_per_domain)),
            ("data.batch_size", i(self.data.batch_size)),
            ("data.severity.additive_noise", reals(&sev.additive_noise)),
            ("data.severity.rotation_deg", reals(&sev.rotation_deg)),
            ("data.severity.scaling", reals(&sev.scaling)),
            ("data.severity.coordinate_mask", reals(&sev.coordinate_mask)),
            ("data.severity.mean_shift", reals(&sev.mean_shift)),
            ("model.widths", list(self.model.widths.iter().copied())),
            ("model.shallow", list(self.model.shallow.iter().copied())),
            ("model.train_head", Value::Boolean(self.model.train_head)),
            ("source.epochs", i(self.source.epochs)),
            ("source.lr", Value::Float(self.source.lr)),
            ("source.batch_size", i(self.source.batch_size)),
            ("warmup.epochs", i(self.warmup.epochs)),
            ("warmup.batch_size", i(self.warmup.batch_size)),
            ("adapt.frozen", Value::Boolean(self.adapt.frozen)),
            ("adapt.lr", Value::Float(self.adapt.lr)),
            ("adapt.ema", Value::Float(self.adapt.ema)),
            ("adapt.entropy", Value::Boolean(self.adapt.entropy)),
            ("adapt.averaging", Value::String(averaging.into())),
            ("adapt.use_queue", Value::Boolean(self.adapt.use_queue)),
            ("adapt.inner_steps", i(self.adapt.inner_steps)),
            ("adapt.queue_capacity", i(self.adapt.queue_capacity)),
            ("adapt.inner_batch", i(self.adapt.inner_batch)),
            ("mcr.kind", Value::String(kind.into())),
            ("mcr.prototypes", i(self.mcr.prototypes)),
            ("mcr.tau_student", Value::Float(self.mcr.tau_student)),
            ("mcr.tau_teacher", Value::Float(self.mcr.tau_teacher)),
            ("mcr.sinkhorn_iters", i(self.mcr.sinkhorn_iters)),
            ("mcr.feature_queue", i(self.mcr.feature_queue)),
            ("mcr.blocks", list(self.mcr.blocks.iter().copied())),
            ("mcr.student_noise", Value::Float(self.mcr.student_noise)),
            ("mcr.enqueue_replayed", Value::Boolean(self.mcr.enqueue_replayed)),
            ("car.strategy", Value::String(self.car.strategy.to_string())),
            ("car.top_k", i(self.car.top_k)),
            ("car.period", i(self.car.period as usize)),
            ("car.capacity", i(self.car.capacity)),
            ("car.window", i(d.window)),
            ("car.threshold", Value::Float(d.threshold)),
            ("car.momentum", Value::Float(d.momentum)),
            ("car.min_fill", i(d.min_fill)),
            ("car.sigma_floor", Value::Float(d.sigma_floor)),
            ("car.restart_smoothing", Value::Boolean(d.restart_smoothing)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Apply `pairs` on top of the defaults, then validate. Every problem
    /// found is reported in one [`Error::Config`].
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a Value)>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_pairs(pairs)?;
        Ok(cfg)
    }

    pub fn apply_pairs<'a>(&mut self, pairs: impl IntoIterator<Item = (&'a str, &'a Value)>) -> Result<()> {
        let mut errors: Vec<String> = pairs
            .into_iter()
            .filter_map(|(k, v)| self.set(k, v).err().map(|e| format!("{k}: {e}")))
            .collect();
        errors.extend(self.problems());
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.problems();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut e = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                e.push(msg.to_string());
            }
        };
        let depth = self.model.widths.len();
        need(self.data.dim >= 2, "data.dim: must be at least 2");
        need(self.data.classes >= 2, "data.classes: must be at least 2");
        need(self.data.sigma >= 0.0 && self.data.sigma.is_finite(), "data.sigma: must be finite and >= 0");
        need(self.data.center_scale > 0.0, "data.center_scale: must be positive");
        need(self.data.n_train > 0 && self.data.n_holdout > 0, "data.n_train/n_holdout: must be positive");
        need(self.data.domains > 0, "data.domains: must be positive");
        need(self.data.batches_per_domain > 0, "data.batches_per_domain: must be positive");
        need(self.data.batch_size > 0, "data.batch_size: must be positive");
        need(depth > 0 && self.model.widths.iter().all(|&w| w > 0), "model.widths: need at least one positive width");
        need(
            self.model.shallow.iter().all(|&j| (1..=depth).contains(&j)),
            "model.shallow: block indices must lie in 1..=depth",
        );
        need(self.source.lr > 0.0 && self.source.batch_size > 0, "source: lr and batch_size must be positive");
        need(self.warmup.batch_size > 0, "warmup.batch_size: must be positive");
        need(self.adapt.lr > 0.0, "adapt.lr: must be positive");
        need((0.0..=1.0).contains(&self.adapt.ema), "adapt.ema: must lie in [0, 1]");
        need(self.adapt.inner_batch > 0, "adapt.inner_batch: must be positive");
        need(
            !self.adapt.use_queue || self.adapt.queue_capacity > 0,
            "adapt.queue_capacity: must be positive when the queue is on",
        );
        need(self.mcr.prototypes >= 2, "mcr.prototypes: must be at least 2");
        need(
            self.mcr.tau_student > 0.0 && self.mcr.tau_teacher > 0.0,
            "mcr.tau_student/tau_teacher: must be positive",
        );
        need(self.mcr.sinkhorn_iters >= 1, "mcr.sinkhorn_iters: must be at least 1");
        need(
            self.mcr.blocks.iter().all(|&j| (1..=depth).contains(&j)),
            "mcr.blocks: block indices must lie in 1..=depth",
        );
        need(self.mcr.student_noise >= 0.0, "mcr.student_noise: must be >= 0");
        need(self.car.top_k >= 1, "car.top_k: must be at least 1");
        need(self.car.period >= 1, "car.period: must be at least 1");
        let d = &self.car.detector;
        need(d.window >= 2, "car.window: must be at least 2");
        need(d.threshold > 0.0, "car.threshold: must be positive");
        need((0.0..1.0).contains(&d.momentum), "car.momentum: must lie in [0, 1)");
        need(d.sigma_floor > 0.0, "car.sigma_floor: must be positive");
        need(
            self.adapt.frozen || self.adapt.entropy || self.consistency_active(),
            "adapt: at least one loss must be active unless the model is frozen",
        );
        e
    }

    /// True when a consistency loss contributes gradients.
    pub fn consistency_active(&self) -> bool {
        match self.mcr.kind {
            Consistency::None => false,
            Consistency::Mcr => !self.mcr.blocks.is_empty(),
            Consistency::Prediction => true,
        }
    }

    /// Inner steps actually taken per batch.
    pub fn effective_inner_steps(&self) -> usize {
        if self.adapt.use_queue && self.consistency_active() {
            self.adapt.inner_steps
        } else {
            0
        }
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        let d = BeeConfig::default();
        self.adapt.frozen = false;
        self.adapt.entropy = true;
        match preset {
            Preset::Bee => {
                self.mcr.kind = Consistency::Mcr;
                self.mcr.blocks = d.mcr.blocks;
                self.adapt.use_queue = true;
                self.car.strategy = d.car.strategy;
            }
            Preset::EntropyOnly => {
                self.mcr.kind = Consistency::None;
                self.adapt.use_queue = false;
                self.car.strategy = ReplayStrategy::Off;
            }
            Preset::SourceOnly => {
                self.adapt.frozen = true;
                self.car.strategy = ReplayStrategy::Off;
            }
            Preset::PredConsistency => {
                self.mcr.kind = Consistency::Prediction;
                self.adapt.use_queue = true;
                self.car.strategy = d.car.strategy;
            }
        }
    }

    pub fn task(&self, seed: u64) -> SourceTask {
        SourceTask {
            dim: self.data.dim,
            classes: self.data.classes,
            sigma: self.data.sigma,
            center_scale: self.data.center_scale,
            min_separation: self.data.min_separation,
            n_train: self.data.n_train,
            n_holdout: self.data.n_holdout,
            seed,
        }
    }

    pub fn network_spec(&self) -> NetworkSpec {
        let mut s = NetworkSpec::new(self.data.dim, self.model.widths.clone(), self.data.classes);
        s.shallow = self.model.shallow.clone();
        s.train_head = self.model.train_head;
        s
    }

    pub fn mcr_config(&self) -> McrConfig {
        McrConfig {
            prototypes: self.mcr.prototypes,
            tau_student: self.mcr.tau_student,
            tau_teacher: self.mcr.tau_teacher,
            sinkhorn_iters: self.mcr.sinkhorn_iters,
            queue_capacity: self.mcr.feature_queue,
            active_blocks: self.mcr.blocks.clone(),
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.adapt.lr,
            ..AdamConfig::default()
        }
    }
}

/// Component toggles of one ablation row.
#[derive(Debug, Clone, PartialEq)]
pub struct Switches {
    pub entropy: bool,
    pub mcr_blocks: BTreeSet<usize>,
    pub queue: bool,
    pub replay: ReplayStrategy,
}

/// A copy of `base` with the given components switched on or off.
pub fn configure_ablation(base: &BeeConfig, sw: &Switches) -> Result<BeeConfig> {
    let mut cfg = base.clone();
    cfg.adapt.frozen = false;
    cfg.adapt.entropy = sw.entropy;
    cfg.mcr.blocks = sw.mcr_blocks.clone();
    cfg.mcr.kind = if sw.mcr_blocks.is_empty() {
        Consistency::None
    } else {
        Consistency::Mcr
    };
    cfg.adapt.use_queue = sw.queue;
    cfg.car.strategy = sw.replay;
    cfg.validate()?;
    Ok(cfg)
}

/// One row of an ablation table.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub table: &'static str,
    pub row: usize,
    pub label: String,
    pub switches: Switches,
}

fn blocks(js: &[usize]) -> BTreeSet<usize> {
    js.iter().copied().collect()
}

/// Component ablation: entropy alone, then MCR from the deepest block
/// outward, then the sample queue and replay on top of blocks {2,3,4}.
pub fn component_rows() -> Vec<AblationRow> {
    let weighted = ReplayStrategy::Trigger(MergeKind::Weighted);
    let spec: [(&str, &[usize], bool, bool); 8] = [
        ("ent", &[], false, false),
        ("ent+mcr4", &[4], false, false),
        ("ent+mcr34", &[3, 4], false, false),
        ("ent+mcr234", &[2, 3, 4], false, false),
        ("ent+mcr1234", &[1, 2, 3, 4], false, false),
        ("ent+mcr234+queue", &[2, 3, 4], true, false),
        ("ent+mcr234+car", &[2, 3, 4], false, true),
        ("ent+mcr234+queue+car", &[2, 3, 4], true, true),
    ];
    spec.iter()
        .enumerate()
        .map(|(i, &(label, js, queue, car))| AblationRow {
            table: "components",
            row: i + 1,
            label: label.into(),
            switches: Switches {
                entropy: true,
                mcr_blocks: blocks(js),
                queue,
                replay: if car { weighted } else { ReplayStrategy::Off },
            },
        })
        .collect()
}

/// Replay-strategy ablation on top of MCR {2,3,4} with the sample queue.
pub fn replay_rows() -> Vec<AblationRow> {
    let mut strategies = vec![ReplayStrategy::Off];
    strategies.extend([40, 80, 160, 320, 640].map(ReplayStrategy::FixedInterval));
    strategies.extend([
        ReplayStrategy::Trigger(MergeKind::Weighted),
        ReplayStrategy::Trigger(MergeKind::SourceReset),
        ReplayStrategy::Trigger(MergeKind::Average),
    ]);
    strategies
        .into_iter()
        .enumerate()
        .map(|(i, replay)| AblationRow {
            table: "replay",
            row: i + 1,
            label: replay.to_string(),
            switches: Switches {
                entropy: true,
                mcr_blocks: blocks(&[2, 3, 4]),
                queue: true,
                replay,
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_round_trip() {
        let mut cfg = BeeConfig::default();
        cfg.car.strategy = ReplayStrategy::FixedInterval(160);
        cfg.mcr.blocks = blocks(&[4]);
        let pairs = cfg.to_pairs();
        let back = BeeConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v))).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn all_errors_reported_together() {
        let pairs = [
            ("car.xi", Value::Integer(0)),
            ("bogus.key", Value::Integer(1)),
            ("adapt.lr", Value::String("fast".into())),
        ];
        let err = BeeConfig::from_pairs(pairs.iter().map(|(k, v)| (*k, v))).unwrap_err();
        let Error::Config(msgs) = err else { panic!("wrong error kind") };
        assert_eq!(msgs.len(), 3, "{msgs:?}");
        assert!(msgs.iter().any(|m| m.starts_with("bogus.key")));
    }

    #[test]
    fn strategies_parse() {
        assert_eq!("weighted".parse::<ReplayStrategy>().unwrap(), "trigger".parse().unwrap());
        assert_eq!("fixed:160".parse::<ReplayStrategy>().unwrap(), ReplayStrategy::FixedInterval(160));
        assert!("fixed:0".parse::<ReplayStrategy>().is_err());
        assert!("sometimes".parse::<ReplayStrategy>().is_err());
    }

    #[test]
    fn ablation_rows_and_rejection() {
        let base = BeeConfig::default();
        let first = &component_rows()[0];
        let cfg = configure_ablation(&base, &first.switches).unwrap();
        assert!(!cfg.consistency_active() && cfg.adapt.entropy && !cfg.adapt.use_queue);
        assert_eq!(cfg.car.strategy, ReplayStrategy::Off);

        let fixed = replay_rows().into_iter().find(|r| r.label == "fixed:160").unwrap();
        let cfg = configure_ablation(&base, &fixed.switches).unwrap();
        assert_eq!(cfg.car.strategy, ReplayStrategy::FixedInterval(160));

        let none = Switches {
            entropy: false,
            mcr_blocks: BTreeSet::new(),
            queue: false,
            replay: ReplayStrategy::Off,
        };
        assert!(configure_ablation(&base, &none).is_err());
        assert_eq!(component_rows().len(), 8);
        assert_eq!(replay_rows().len(), 9);
    }
}
