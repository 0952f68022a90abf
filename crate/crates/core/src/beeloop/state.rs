use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::car::{ensemble_weights, merge, select_candidates, uniform_weights, AnchorPool, Member, ShiftDetector};
use crate::error::Result;
use crate::mcr::McrState;
use crate::netcore::{ema_update, AdamState, Network, ParamSet, Tensor};
use crate::seed::{rng, sub_seed};

use super::config::{BeeConfig, Consistency, MergeKind, ReplayStrategy};
use super::sample_queue::SampleQueue;
use super::steps::{entropy_step, mcr_step, predict, prediction_step};
use super::training::{check_finite, WarmState};

/// Members merged back into the student. `anchors[0]` is the student itself,
/// listed under the current step; `weights` aligns with `anchors`. A reset
/// to the source snapshot is reported as anchor `0` with weight 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub anchors: Vec<u64>,
    pub weights: Vec<f64>,
}

/// Parameter update phases, in the order they ran, for instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Inner(usize),
    Consistency,
    Entropy,
    Teacher,
    Merge,
}

/// What one call to [`BeeState::process_batch`] did. Carries no labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub step: u64,
    pub consistency_loss: Option<f64>,
    pub entropy_loss: Option<f64>,
    pub trigger: bool,
    pub merge: Option<MergeEvent>,
    pub n_anchors: usize,
    /// Student parameters after each phase, when tracing is on.
    pub trace: Vec<(Phase, ParamSet)>,
}

/// Online adaptation state. It sees feature batches only.
#[derive(Debug, Clone)]
pub struct BeeState {
    net: Network,
    cfg: BeeConfig,
    student: ParamSet,
    teacher: ParamSet,
    source: ParamSet,
    mcr: Option<McrState>,
    adam: AdamState,
    queue: Option<SampleQueue>,
    pool: AnchorPool,
    detector: ShiftDetector,
    step: u64,
    queue_rng: ChaCha8Rng,
    aug_rng: ChaCha8Rng,
    tracing: bool,
}

impl BeeState {
    /// Adaptation state starting from a warm-up result. The post-warm-up
    /// student is kept as the source snapshot for resets.
    pub fn new(net: Network, cfg: BeeConfig, warm: WarmState, seed: u64) -> Result<Self> {
        cfg.validate()?;
        net.check_params(&warm.student)?;
        warm.teacher.check_same_layout(&warm.student, "BeeState::new")?;
        let mcr = if cfg.mcr.kind == Consistency::Mcr && !cfg.mcr.blocks.is_empty() {
            Some(McrState::new(cfg.mcr_config(), warm.codebooks)?)
        } else {
            None
        };
        let queue = cfg
            .adapt
            .use_queue
            .then(|| SampleQueue::new(net.input_dim(), cfg.adapt.queue_capacity));
        Ok(Self {
            adam: AdamState::new(cfg.adam()),
            pool: AnchorPool::new(cfg.car.capacity, cfg.car.period)?,
            detector: ShiftDetector::new(cfg.car.detector),
            source: warm.student.clone(),
            student: warm.student,
            teacher: warm.teacher,
            mcr,
            queue,
            step: 0,
            queue_rng: rng(sub_seed(seed, "queue")),
            aug_rng: rng(sub_seed(seed, "augment")),
            tracing: false,
            net,
            cfg,
        })
    }

    /// A state that never updates and predicts with `params` alone.
    pub fn frozen(net: Network, cfg: &BeeConfig, params: ParamSet) -> Result<Self> {
        let mut cfg = cfg.clone();
        cfg.adapt.frozen = true;
        cfg.car.strategy = ReplayStrategy::Off;
        let warm = WarmState {
            student: params.clone(),
            teacher: params,
            codebooks: Vec::new(),
        };
        cfg.mcr.kind = Consistency::None;
        Self::new(net, cfg, warm, 0)
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.tracing = on;
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn config(&self) -> &BeeConfig {
        &self.cfg
    }

    pub fn student(&self) -> &ParamSet {
        &self.student
    }

    pub fn teacher(&self) -> &ParamSet {
        &self.teacher
    }

    pub fn source_snapshot(&self) -> &ParamSet {
        &self.source
    }

    pub fn pool(&self) -> &AnchorPool {
        &self.pool
    }

    pub fn mcr(&self) -> Option<&McrState> {
        self.mcr.as_ref()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    fn student_view(&mut self, x: &Tensor) -> Tensor {
        let s = self.cfg.mcr.student_noise;
        if s == 0.0 {
            return x.clone();
        }
        let mut out = x.clone();
        for v in out.data_mut() {
            *v += s * self.aug_rng.sample::<f64, _>(StandardNormal);
        }
        out
    }

    /// One consistency update on `x`, returning its loss before the update.
    fn consistency_step(&mut self, x: &Tensor, teacher: &crate::netcore::Forward, fresh: bool) -> Result<Option<f64>> {
        if !self.cfg.consistency_active() {
            return Ok(None);
        }
        let xs = self.student_view(x);
        let loss = match self.cfg.mcr.kind {
            Consistency::Mcr => {
                let mcr = self.mcr.as_mut().expect("created when consistency is codebook based");
                mcr_step(&self.net, &mut self.student, &teacher.features, &xs, mcr, &mut self.adam, fresh || self.cfg.mcr.enqueue_replayed)?
            }
            Consistency::Prediction => prediction_step(&self.net, &mut self.student, &teacher.logits, &xs, &mut self.adam)?,
            Consistency::None => unreachable!("checked by consistency_active"),
        };
        check_finite(loss, "consistency loss", self.step)?;
        Ok(Some(loss))
    }

    fn record(&self, trace: &mut Vec<(Phase, ParamSet)>, phase: Phase) {
        if self.tracing {
            trace.push((phase, self.student.clone()));
        }
    }

    /// Adapt on one unlabelled batch and return the committed class
    /// probabilities (computed before this batch's updates).
    ///
    /// Order per batch: queue the batch; run the inner consistency steps on
    /// queue samples, each followed by a teacher EMA; predict; take one
    /// consistency step and one entropy step on the batch; EMA; store an
    /// anchor when due; run the shift detector and replay anchors.
    pub fn process_batch(&mut self, x: &Tensor) -> Result<(Tensor, StepOutcome)> {
        self.step += 1;
        let mut trace = Vec::new();
        if self.cfg.adapt.frozen {
            let (y, _) = predict(&self.net, &self.student, &self.teacher, x, self.cfg.adapt.averaging, None)?;
            return Ok((
                y,
                StepOutcome {
                    step: self.step,
                    consistency_loss: None,
                    entropy_loss: None,
                    trigger: false,
                    merge: None,
                    n_anchors: 0,
                    trace,
                },
            ));
        }

        if let Some(q) = self.queue.as_mut() {
            q.push(x)?;
        }
        for r in 0..self.cfg.effective_inner_steps() {
            let Some(xb) = self
                .queue
                .as_ref()
                .and_then(|q| q.sample(self.cfg.adapt.inner_batch, &mut self.queue_rng))
            else {
                break;
            };
            let tf = self.net.forward(&self.teacher, &xb)?;
            self.consistency_step(&xb, &tf, false)?;
            ema_update(&mut self.teacher, &self.student, self.cfg.adapt.ema)?;
            self.record(&mut trace, Phase::Inner(r));
        }

        let averaging = self.cfg.adapt.averaging;
        let (y, tf) = predict(&self.net, &self.student, &self.teacher, x, averaging, None)?;

        let consistency_loss = self.consistency_step(x, &tf, true)?;
        if consistency_loss.is_some() {
            self.record(&mut trace, Phase::Consistency);
        }
        let entropy_loss = if self.cfg.adapt.entropy {
            let l = entropy_step(&self.net, &mut self.student, &tf.logits, x, averaging, &mut self.adam)?;
            check_finite(l, "entropy loss", self.step)?;
            self.record(&mut trace, Phase::Entropy);
            Some(l)
        } else {
            None
        };
        ema_update(&mut self.teacher, &self.student, self.cfg.adapt.ema)?;
        self.record(&mut trace, Phase::Teacher);

        let mut trigger = false;
        let mut merged = None;
        if self.cfg.car.strategy != ReplayStrategy::Off {
            self.pool.maybe_store(&self.student, self.step);
            let signal = consistency_loss.or(entropy_loss).expect("validated: some loss is active");
            let fired = self.detector.observe(signal);
            let kind = match self.cfg.car.strategy {
                ReplayStrategy::Trigger(kind) => {
                    trigger = fired;
                    fired.then_some(kind)
                }
                ReplayStrategy::FixedInterval(n) => (self.step % n == 0).then_some(MergeKind::Weighted),
                ReplayStrategy::Off => None,
            };
            if let Some(kind) = kind {
                merged = self.replay(kind, x)?;
                if merged.is_some() {
                    self.adam.reset();
                    self.record(&mut trace, Phase::Merge);
                }
            }
        }

        Ok((
            y,
            StepOutcome {
                step: self.step,
                consistency_loss,
                entropy_loss,
                trigger,
                merge: merged,
                n_anchors: self.pool.len(),
                trace,
            },
        ))
    }

    fn replay(&mut self, kind: MergeKind, x: &Tensor) -> Result<Option<MergeEvent>> {
        if kind == MergeKind::SourceReset {
            self.student = self.source.clone();
            return Ok(Some(MergeEvent {
                anchors: vec![0],
                weights: vec![1.0],
            }));
        }
        if self.pool.is_empty() {
            return Ok(None);
        }
        let set = select_candidates(&self.net, &self.student, &self.pool, x, self.cfg.car.top_k)?;
        let weights = match kind {
            MergeKind::Weighted => ensemble_weights(&set),
            _ => uniform_weights(set.len()),
        };
        self.student = merge(&set, &weights)?;
        let anchors = set
            .members()
            .map(|(m, _)| match m {
                Member::Student => self.step,
                Member::Anchor { step } => *step,
            })
            .collect();
        Ok(Some(MergeEvent { anchors, weights }))
    }
}
