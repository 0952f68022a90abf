//! Sinkhorn-Knopp balancing of teacher scores over prototypes.
//!
//! Rows are samples, columns are prototypes. The procedure exponentiates the
//! already temperature-scaled scores, normalises the whole matrix to unit
//! mass, then alternates "each prototype carries 1/M of the mass" and "each
//! sample carries 1/R of the mass" for a fixed number of rounds. The result is
//! finally rescaled so every sample's assignment sums to one.

use crate::error::{invalid, Result};
use crate::netcore::Tensor;

/// Non-negative `R x M` assignment matrix whose rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix(Tensor);

impl AssignmentMatrix {
    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }

    /// First `n` rows, i.e. the current batch when the queue is appended
    /// after it.
    pub fn head_rows(&self, n: usize) -> Tensor {
        let idx: Vec<usize> = (0..n).collect();
        self.0.gather_rows(&idx)
    }

    /// Column mass divided by the row count; uniform balance is `1/M` each.
    pub fn prototype_marginals(&self) -> Vec<f64> {
        let r = self.0.rows() as f64;
        self.0.col_sums().into_iter().map(|c| c / r).collect()
    }
}

pub fn sinkhorn_normalize(scores: &Tensor, iters: usize) -> Result<AssignmentMatrix> {
    Ok(sinkhorn_traced(scores, iters)?.0)
}

/// Like [`sinkhorn_normalize`], also returning the prototype-marginal L1
/// violation `Σ_m |mass_m − 1/M|` after each round (`iters` values). The
/// globally normalised starting point satisfies neither marginal, so it is
/// not comparable and is left out; from the first round on each half-step
/// can only shrink the L1 violation.
pub fn sinkhorn_traced(scores: &Tensor, iters: usize) -> Result<(AssignmentMatrix, Vec<f64>)> {
    if iters == 0 {
        return invalid("Sinkhorn needs at least one iteration");
    }
    if scores.shape().len() != 2 {
        return invalid(format!("scores must be a matrix, got {:?}", scores.shape()));
    }
    if !scores.is_finite() {
        return invalid("Sinkhorn scores must be finite");
    }
    match linear(scores, iters) {
        Some(out) => Ok(out),
        None => Ok(log_domain(scores, iters)),
    }
}

fn violation(col_mass: &[f64]) -> f64 {
    let m = col_mass.len() as f64;
    col_mass.iter().map(|c| (c - 1.0 / m).abs()).sum()
}

/// Direct implementation. Gives up (returns `None`) if some row or column
/// underflows to zero mass, which only happens for score ranges beyond ~700.
fn linear(scores: &Tensor, iters: usize) -> Option<(AssignmentMatrix, Vec<f64>)> {
    let (r, m) = (scores.rows(), scores.cols());

    // A single global shift cancels in the global normalisation below.
    let max = scores.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = scores.map(|s| (s - max).exp());
    let total = p.sum();
    for v in p.data_mut() {
        *v /= total;
    }

    let mut trace = Vec::with_capacity(iters);

    for _ in 0..iters {
        let cols = p.col_sums();
        if cols.iter().any(|&c| !(c > 0.0)) {
            return None;
        }
        for i in 0..r {
            for (v, c) in p.row_mut(i).iter_mut().zip(&cols) {
                *v /= c;
                *v /= m as f64;
            }
        }
        for i in 0..r {
            let row = p.row_mut(i);
            let s: f64 = row.iter().sum();
            if !(s > 0.0) {
                return None;
            }
            for v in row.iter_mut() {
                *v /= s;
                *v /= r as f64;
            }
        }
        trace.push(violation(&p.col_sums()));
    }

    for v in p.data_mut() {
        *v *= r as f64;
    }
    Some((AssignmentMatrix(p), trace))
}

fn logsumexp(vals: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
    max + vals.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Same rounds carried out on log-mass; immune to underflow.
fn log_domain(scores: &Tensor, iters: usize) -> (AssignmentMatrix, Vec<f64>) {
    let (r, m) = (scores.rows(), scores.cols());
    let (ln_r, ln_m) = ((r as f64).ln(), (m as f64).ln());
    let mut lp = scores.clone();
    let z = logsumexp(lp.data().iter().cloned());
    for v in lp.data_mut() {
        *v -= z;
    }
    let col_mass = |lp: &Tensor| -> Vec<f64> {
        (0..m)
            .map(|j| (0..r).map(|i| lp.at(i, j).exp()).sum())
            .collect()
    };
    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let col_lse: Vec<f64> = (0..m)
            .map(|j| logsumexp((0..r).map(|i| lp.at(i, j)).collect::<Vec<_>>().into_iter()))
            .collect();
        for i in 0..r {
            for (v, c) in lp.row_mut(i).iter_mut().zip(&col_lse) {
                *v -= c + ln_m;
            }
        }
        for i in 0..r {
            let row = lp.row_mut(i);
            let lse = logsumexp(row.iter().cloned());
            for v in row.iter_mut() {
                *v -= lse + ln_r;
            }
        }
        trace.push(violation(&col_mass(&lp)));
    }
    let p = lp.map(|v| (v + ln_r).exp());
    (AssignmentMatrix(p), trace)
}
