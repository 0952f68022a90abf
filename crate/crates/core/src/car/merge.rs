use crate::error::{invalid, Result};
use crate::netcore::ParamSet;

use super::anchors::CandidateSet;

/// `softmax(Σ_θ' d(θ, θ'))` over the members of `set`.
pub fn ensemble_weights(set: &CandidateSet) -> Vec<f64> {
    weights_from_divergences(set.divergences())
}

pub fn weights_from_divergences(div: &[Vec<f64>]) -> Vec<f64> {
    let totals: Vec<f64> = div.iter().map(|row| row.iter().sum()).collect();
    let max = totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = totals.iter().map(|t| (t - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Elementwise `Σ w(θ)·θ` over the members of `set`.
///
/// Evaluated as `θ₀ + Σ_{i>0} w_i (θ_i − θ₀)` around the first member and
/// clamped to the members' range, so identical members merge to themselves
/// bit for bit and rounding never leaves the convex hull.
pub fn merge(set: &CandidateSet, weights: &[f64]) -> Result<ParamSet> {
    if weights.len() != set.len() {
        return invalid(format!("{} weights for {} models", weights.len(), set.len()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return invalid("merge weights must be non-negative");
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("merge weights sum to {total}, not 1"));
    }
    let members: Vec<&ParamSet> = set.members().map(|(_, p)| p).collect();
    let base = members[0];
    for m in &members[1..] {
        base.check_same_layout(m, "merge")?;
    }
    let mut out = base.clone();
    for (name, t) in out.iter_mut() {
        let others: Vec<&[f64]> = members[1..]
            .iter()
            .map(|m| m.get(name).expect("layouts checked").data())
            .collect();
        for (k, v) in t.data_mut().iter_mut().enumerate() {
            let x0 = *v;
            let (mut lo, mut hi) = (x0, x0);
            let mut acc = x0;
            for (o, w) in others.iter().zip(&weights[1..]) {
                let x = o[k];
                lo = lo.min(x);
                hi = hi.max(x);
                acc += w * (x - x0);
            }
            *v = acc.clamp(lo, hi);
        }
    }
    Ok(out)
}
