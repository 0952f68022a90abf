use std::collections::BTreeSet;

use crate::error::{invalid, shape_err, Result};
use crate::netcore::{Graph, ParamSet, Tensor, Var, PROB_FLOOR};

use super::codebook::{teacher_similarities, CodebookPair};
use super::queue::FeatureQueue;
use super::sinkhorn::sinkhorn_normalize;

/// `(1/N) Σ_i H(teacher_i, student_i)`, teacher distribution as the target.
pub fn mcr_block_loss(p_student: &Tensor, p_teacher: &Tensor) -> Result<f64> {
    if !p_student.same_shape(p_teacher) {
        return shape_err(
            "mcr_block_loss",
            format!("{:?} vs {:?}", p_student.shape(), p_teacher.shape()),
        );
    }
    let n = p_student.rows() as f64;
    Ok(-p_teacher
        .data()
        .iter()
        .zip(p_student.data())
        .map(|(&t, &s)| t * s.max(PROB_FLOOR).ln())
        .sum::<f64>()
        / n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct McrConfig {
    pub prototypes: usize,
    pub tau_student: f64,
    pub tau_teacher: f64,
    pub sinkhorn_iters: usize,
    /// Rows kept per block in the teacher feature queue.
    pub queue_capacity: usize,
    /// 1-based blocks whose consistency terms are summed.
    pub active_blocks: BTreeSet<usize>,
}

impl Default for McrConfig {
    fn default() -> Self {
        Self {
            prototypes: 64,
            tau_student: 0.1,
            tau_teacher: 0.05,
            sinkhorn_iters: 3,
            queue_capacity: 512,
            active_blocks: BTreeSet::from([2, 3, 4]),
        }
    }
}

/// Value of one multi-level loss evaluation.
#[derive(Debug, Clone)]
pub struct McrLoss {
    pub total: Var,
    pub per_block: Vec<(usize, f64)>,
}

pub fn codebook_param_name(block: usize) -> String {
    format!("codebook.student.{block}")
}

pub fn teacher_codebook_name(block: usize) -> String {
    format!("codebook.teacher.{block}")
}

/// Codebooks and feature queues owned by one adaptation loop.
#[derive(Debug, Clone)]
pub struct McrState {
    config: McrConfig,
    books: Vec<CodebookPair>,
    queues: Vec<FeatureQueue>,
}

impl McrState {
    pub fn new(config: McrConfig, books: Vec<CodebookPair>) -> Result<Self> {
        if let Some(&j) = config.active_blocks.iter().find(|&&j| j == 0 || j > books.len()) {
            return invalid(format!("active block {j} outside 1..={}", books.len()));
        }
        let queues = books
            .iter()
            .map(|b| FeatureQueue::new(b.student.dim(), config.queue_capacity))
            .collect();
        Ok(Self {
            config,
            books,
            queues,
        })
    }

    pub fn config(&self) -> &McrConfig {
        &self.config
    }

    pub fn books(&self) -> &[CodebookPair] {
        &self.books
    }

    pub fn queues(&self) -> &[FeatureQueue] {
        &self.queues
    }

    pub fn clear_queues(&mut self) {
        self.queues.iter_mut().for_each(FeatureQueue::clear);
    }

    /// Sinkhorn-balanced teacher assignments for the current batch of block
    /// `block`, with queued features joining the balancing.
    pub fn balanced_targets(&self, block: usize, teacher_features: &Tensor) -> Result<Tensor> {
        let pair = &self.books[block - 1];
        let batch_scores = teacher_similarities(teacher_features, &pair.teacher)?;
        let n = batch_scores.rows();
        let all = match self.queues[block - 1].snapshot() {
            Some(q) => {
                let queued = q.matmul(pair.teacher.matrix())?.scale(1.0 / pair.teacher.temperature());
                Tensor::vstack(&[&batch_scores, &queued])?
            }
            None => batch_scores,
        };
        Ok(sinkhorn_normalize(&all, self.config.sinkhorn_iters)?.head_rows(n))
    }

    /// Record `Σ_{j ∈ active} H(p̃_t,j, p_s,j)` on `g`. With `enqueue`, the
    /// teacher features of the active blocks are pushed into their queues
    /// afterwards.
    ///
    /// With `train_codebooks`, student codebooks become trainable leaves named
    /// by [`codebook_param_name`].
    pub fn loss(
        &mut self,
        g: &mut Graph,
        student_features: &[Var],
        teacher_features: &[Tensor],
        train_codebooks: bool,
        enqueue: bool,
    ) -> Result<McrLoss> {
        if student_features.len() != self.books.len() || teacher_features.len() != self.books.len() {
            return shape_err(
                "mcr_loss",
                format!(
                    "{} codebooks for {} student / {} teacher feature blocks",
                    self.books.len(),
                    student_features.len(),
                    teacher_features.len()
                ),
            );
        }
        let mut total = g.constant(Tensor::scalar(0.0));
        let mut per_block = Vec::new();
        let active: Vec<usize> = self.config.active_blocks.iter().copied().collect();
        for &j in &active {
            let target = self.balanced_targets(j, &teacher_features[j - 1])?;
            let student_book = &self.books[j - 1].student;
            let q = if train_codebooks {
                g.param(codebook_param_name(j), student_book.matrix().clone())
            } else {
                g.constant(student_book.matrix().clone())
            };
            let cos = g.cosine_scores(student_features[j - 1], q)?;
            let p = g.softmax_with_temperature(cos, student_book.temperature())?;
            let l = g.cross_entropy(target, p)?;
            per_block.push((j, g.value(l).item()));
            total = g.add(total, l)?;
        }
        if enqueue {
            for &j in &active {
                self.queues[j - 1].push(&teacher_features[j - 1])?;
            }
        }
        Ok(McrLoss { total, per_block })
    }

    /// Student codebooks as a parameter set, for optimiser steps.
    pub fn student_codebook_params(&self) -> ParamSet {
        let mut ps = ParamSet::new();
        for pair in &self.books {
            ps.insert(codebook_param_name(pair.student.block()), pair.student.matrix().clone())
                .expect("unique block indices");
        }
        ps
    }

    /// Write back updated student codebooks; columns are renormalised.
    pub fn set_student_codebooks(&mut self, ps: &ParamSet) -> Result<()> {
        for pair in &mut self.books {
            if let Some(t) = ps.get(&codebook_param_name(pair.student.block())) {
                pair.student.set_matrix(t.clone())?;
            }
        }
        Ok(())
    }

    /// Move teacher codebooks toward the student ones by EMA, then
    /// renormalise.
    pub fn ema_teacher_codebooks(&mut self, momentum: f64) -> Result<()> {
        for pair in &mut self.books {
            let blended = pair
                .teacher
                .matrix()
                .zip_map(pair.student.matrix(), |t, s| momentum * t + (1.0 - momentum) * s)?;
            pair.teacher.set_matrix(blended)?;
        }
        Ok(())
    }

    /// Codebooks as named tensors for checkpointing.
    pub fn to_params(&self) -> ParamSet {
        let mut ps = ParamSet::new();
        for pair in &self.books {
            let j = pair.student.block();
            ps.insert(codebook_param_name(j), pair.student.matrix().clone()).unwrap();
            ps.insert(teacher_codebook_name(j), pair.teacher.matrix().clone()).unwrap();
        }
        ps
    }
}
