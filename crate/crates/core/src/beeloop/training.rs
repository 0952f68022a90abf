use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::mcr::{codebook_param_name, init_codebooks, CodebookPair, McrState};
use crate::netcore::{ema_update, AdamConfig, AdamState, Graph, Network, ParamSet, Tensor};
use crate::seed::{rng, sub_seed};
use crate::stream::Dataset;

use super::config::{BeeConfig, SourceConfig};
use super::steps::{entropy_step, predict};

fn one_hot(labels: &[u32], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), classes]);
    for (i, &l) in labels.iter().enumerate() {
        t.row_mut(i)[l as usize] = 1.0;
    }
    t
}

/// Supervised cross-entropy training of every parameter with Adam. Returns
/// the source model.
pub fn train_source(
    net: &Network,
    init: &ParamSet,
    train: &Dataset,
    cfg: &SourceConfig,
    seed: u64,
) -> Result<ParamSet> {
    net.check_params(init)?;
    let mut params = init.clone();
    let mut adam = AdamState::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut r = rng(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0u64;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            let batch = train.subset(chunk);
            let mut g = Graph::new();
            let x = g.constant(batch.features);
            let out = net.forward_graph(&mut g, &params, x, |_| true)?;
            let p = g.softmax_rows(out.logits);
            let loss = g.cross_entropy(one_hot(&batch.labels, train.classes), p)?;
            if !g.value(loss).item().is_finite() {
                return Err(Error::NonFinite {
                    what: "source training loss".into(),
                    step,
                });
            }
            adam.step(&mut params, &g.backward(loss)?.params())?;
        }
    }
    Ok(params)
}

/// Fraction of `data` that `params` classifies correctly.
pub fn accuracy(net: &Network, params: &ParamSet, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(512) {
        let part = data.subset(chunk);
        let pred = net.logits(params, &part.features)?.argmax_rows();
        correct += pred.iter().zip(&part.labels).filter(|(p, l)| **p == **l as usize).count();
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Accuracy of a parameter snapshot on held-out source data.
pub fn eval_source_holdout(net: &Network, snapshot: &ParamSet, holdout: &Dataset) -> Result<f64> {
    accuracy(net, snapshot, holdout)
}

/// Student, teacher and codebooks after warm-up.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmState {
    pub student: ParamSet,
    pub teacher: ParamSet,
    pub codebooks: Vec<CodebookPair>,
}

/// Initialise the teacher and the codebooks on source data.
///
/// The teacher starts as a copy of the source model. Codebooks are seeded
/// from teacher features of the first shuffled source samples. Each batch
/// then takes one codebook-consistency step on the shallow parameters and
/// the student codebooks, one entropy step, and moves the teacher (weights
/// and codebooks) by EMA. Afterwards the codebooks are frozen.
pub fn warmup(net: &Network, source: &ParamSet, train: &Dataset, cfg: &BeeConfig, seed: u64) -> Result<WarmState> {
    net.check_params(source)?;
    let m = cfg.mcr.prototypes;
    if train.len() < m {
        return Err(Error::InvalidArgument(format!(
            "{} warm-up samples cannot seed {m} prototypes",
            train.len()
        )));
    }
    let mut r = rng(sub_seed(seed, "order"));
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut r);

    let seed_rows = train.subset(&order[..m.max(cfg.warmup.batch_size).min(train.len())]);
    let feats = net.forward(source, &seed_rows.features)?.features;
    let books = init_codebooks(&feats, m, cfg.mcr.tau_student, cfg.mcr.tau_teacher, &mut rng(sub_seed(seed, "codebooks")))?;

    let mut student = source.clone();
    let mut teacher = source.clone();
    let mut mcr = McrState::new(cfg.mcr_config(), books)?;
    let mut adam = AdamState::new(cfg.adam());
    let mut book_adam = AdamState::new(cfg.adam());
    let mut step = 0u64;
    for _ in 0..cfg.warmup.epochs {
        for chunk in order.chunks(cfg.warmup.batch_size) {
            step += 1;
            let x = train.subset(chunk).features;
            let tf = net.forward(&teacher, &x)?;
            if !cfg.mcr.blocks.is_empty() {
                let mut g = Graph::new();
                let xv = g.constant(x.clone());
                let sf = net.forward_graph(&mut g, &student, xv, |n| net.is_trainable(n))?;
                let loss = mcr.loss(&mut g, &sf.features, &tf.features, true, true)?;
                check_finite(g.value(loss.total).item(), "warm-up consistency loss", step)?;
                let grads = g.backward(loss.total)?.params();
                let is_book = |n: &str| n.starts_with("codebook.");
                adam.step(&mut student, &grads.filter(|n| !is_book(n)))?;
                let mut books = mcr.student_codebook_params().filter(|n| grads.contains(n));
                book_adam.step(&mut books, &grads.filter(is_book))?;
                mcr.set_student_codebooks(&books)?;
            }
            if cfg.adapt.entropy {
                let (_, tf) = predict(net, &student, &teacher, &x, cfg.adapt.averaging, Some(tf))?;
                let ent = entropy_step(net, &mut student, &tf.logits, &x, cfg.adapt.averaging, &mut adam)?;
                check_finite(ent, "warm-up entropy loss", step)?;
            }
            ema_update(&mut teacher, &student, cfg.adapt.ema)?;
            mcr.ema_teacher_codebooks(cfg.adapt.ema)?;
        }
    }
    Ok(WarmState {
        student,
        teacher,
        codebooks: mcr.books().to_vec(),
    })
}

pub(crate) fn check_finite(v: f64, what: &str, step: u64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: what.into(),
            step,
        })
    }
}

/// Checkpoint layout of a warm state: `student.*`, `teacher.*` and the
/// codebook tensors.
pub fn warm_state_to_params(w: &WarmState) -> ParamSet {
    let mut ps = ParamSet::new();
    for (prefix, set) in [("student.", &w.student), ("teacher.", &w.teacher)] {
        for (n, t) in set.iter() {
            ps.insert(format!("{prefix}{n}"), t.clone()).expect("unique names");
        }
    }
    for pair in &w.codebooks {
        let j = pair.student.block();
        ps.insert(codebook_param_name(j), pair.student.matrix().clone()).expect("unique");
        ps.insert(crate::mcr::teacher_codebook_name(j), pair.teacher.matrix().clone()).expect("unique");
    }
    ps
}

pub fn warm_state_from_params(ps: &ParamSet, net: &Network, cfg: &BeeConfig) -> Result<WarmState> {
    let strip = |prefix: &str| {
        let mut out = ParamSet::new();
        for (n, t) in ps.iter() {
            if let Some(rest) = n.strip_prefix(prefix) {
                out.insert(rest, t.clone())?;
            }
        }
        net.check_params(&out)?;
        Ok::<_, Error>(out)
    };
    let student = strip("student.")?;
    let teacher = strip("teacher.")?;
    let mut codebooks = Vec::new();
    for j in 1..=net.depth() {
        let get = |name: String| {
            ps.get(&name)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("warm-up checkpoint lacks {name}")))
        };
        let s = get(codebook_param_name(j))?;
        let t = get(crate::mcr::teacher_codebook_name(j))?;
        codebooks.push(CodebookPair {
            student: crate::mcr::Codebook::restore(j, s, cfg.mcr.tau_student)?,
            teacher: crate::mcr::Codebook::restore(j, t, cfg.mcr.tau_teacher)?,
        });
    }
    Ok(WarmState {
        student,
        teacher,
        codebooks,
    })
}

