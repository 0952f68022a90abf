use std::collections::VecDeque;

use crate::error::{invalid, shape_err, Result};
use crate::netcore::{Network, ParamSet, Tensor};

use super::divergence::{predict_probs, sym_kl};

/// Snapshot of the student taken at `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub step: u64,
    pub params: ParamSet,
}

/// Bounded FIFO of student snapshots taken every `period` batches.
#[derive(Debug, Clone)]
pub struct AnchorPool {
    capacity: usize,
    period: u64,
    entries: VecDeque<Anchor>,
}

impl AnchorPool {
    pub fn new(capacity: usize, period: u64) -> Result<Self> {
        if period == 0 {
            return invalid("anchor storage period must be positive");
        }
        Ok(Self {
            capacity,
            period,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Anchor> {
        self.entries.iter()
    }

    /// Append a deep copy, evicting the oldest snapshot at capacity.
    pub fn push(&mut self, params: &ParamSet, step: u64) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(Anchor {
            step,
            params: params.clone(),
        });
    }

    /// Store a snapshot when `step` is a multiple of the period.
    pub fn maybe_store(&mut self, params: &ParamSet, step: u64) -> bool {
        if step % self.period == 0 {
            self.push(params, step);
            true
        } else {
            false
        }
    }
}

/// Who a candidate is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Member {
    Student,
    Anchor { step: u64 },
}

/// The current student plus the anchors selected for merging, with their
/// pairwise divergences on the triggering batch.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    members: Vec<(Member, ParamSet)>,
    divergence: Vec<Vec<f64>>,
}

impl CandidateSet {
    /// Build a set from explicit members; divergences are evaluated on
    /// `batch`. The first member should be the student.
    pub fn evaluate(net: &Network, members: Vec<(Member, ParamSet)>, batch: &Tensor) -> Result<Self> {
        if members.is_empty() {
            return invalid("candidate set cannot be empty");
        }
        let probs = members
            .iter()
            .map(|(_, p)| predict_probs(net, p, batch))
            .collect::<Result<Vec<_>>>()?;
        let k = members.len();
        let mut divergence = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in a + 1..k {
                let d = sym_kl(&probs[a], &probs[b])?;
                divergence[a][b] = d;
                divergence[b][a] = d;
            }
        }
        Ok(Self { members, divergence })
    }

    /// Set with precomputed divergences (used for hand-checked weighting).
    pub fn with_divergences(members: Vec<(Member, ParamSet)>, divergence: Vec<Vec<f64>>) -> Result<Self> {
        let k = members.len();
        if k == 0 || divergence.len() != k || divergence.iter().any(|r| r.len() != k) {
            return shape_err("CandidateSet", format!("{k} members with a non-matching divergence matrix"));
        }
        Ok(Self { members, divergence })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> impl Iterator<Item = &(Member, ParamSet)> {
        self.members.iter()
    }

    pub fn anchor_steps(&self) -> Vec<u64> {
        self.members
            .iter()
            .filter_map(|(m, _)| match m {
                Member::Anchor { step } => Some(*step),
                Member::Student => None,
            })
            .collect()
    }

    pub fn divergences(&self) -> &[Vec<f64>] {
        &self.divergence
    }
}

/// Pick the `k` anchors whose predictions on `batch` diverge most from the
/// student. Ties go to the newer anchor. An empty pool yields `{student}`.
pub fn select_candidates(
    net: &Network,
    student: &ParamSet,
    pool: &AnchorPool,
    batch: &Tensor,
    k: usize,
) -> Result<CandidateSet> {
    if k == 0 {
        return invalid("Top-K selection needs K >= 1");
    }
    let student_probs = predict_probs(net, student, batch)?;
    let mut scored = Vec::with_capacity(pool.len());
    for anchor in pool.iter() {
        let d = sym_kl(&student_probs, &predict_probs(net, &anchor.params, batch)?)?;
        scored.push((d, anchor));
    }
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| b.1.step.cmp(&a.1.step))
    });
    let mut members = vec![(Member::Student, student.clone())];
    members.extend(
        scored
            .into_iter()
            .take(k)
            .map(|(_, a)| (Member::Anchor { step: a.step }, a.params.clone())),
    );
    CandidateSet::evaluate(net, members, batch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(v: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("w", Tensor::new(vec![1], vec![v]).unwrap()).unwrap();
        p
    }

    #[test]
    fn stores_on_period_and_evicts_oldest() {
        let mut pool = AnchorPool::new(2, 30).unwrap();
        for step in 1..=90 {
            pool.maybe_store(&tiny(step as f64), step);
        }
        let steps: Vec<u64> = pool.iter().map(|a| a.step).collect();
        assert_eq!(steps, vec![60, 90]);

        let mut pool = AnchorPool::new(50, 30).unwrap();
        for step in 1..=90 {
            pool.maybe_store(&tiny(0.0), step);
        }
        assert_eq!(pool.len(), 3);
    }

    #[test]
    fn snapshots_are_deep_copies() {
        let mut pool = AnchorPool::new(4, 1).unwrap();
        let mut live = tiny(1.0);
        pool.maybe_store(&live, 1);
        let before = pool.iter().next().unwrap().params.checksum();
        live.get_mut("w").unwrap().data_mut()[0] = 99.0;
        assert_eq!(pool.iter().next().unwrap().params.checksum(), before);
    }

    #[test]
    fn zero_period_rejected() {
        assert!(AnchorPool::new(3, 0).is_err());
    }
}
