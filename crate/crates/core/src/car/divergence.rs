use crate::error::{invalid, shape_err, Result};
use crate::netcore::{softmax_rows, Network, ParamSet, Tensor, PROB_FLOOR};

const ROW_SUM_TOL: f64 = 1e-8;

fn check_stochastic(p: &Tensor, which: &str) -> Result<()> {
    for i in 0..p.rows() {
        let row = p.row(i);
        if row.iter().any(|v| !(*v >= 0.0)) {
            return invalid(format!("{which} row {i} has a negative or NaN entry"));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return invalid(format!("{which} row {i} sums to {s}, not 1"));
        }
    }
    Ok(())
}

/// Mean over rows of `½[KL(P‖Q) + KL(Q‖P)]`, in nats.
///
/// Computed as `½ Σ (p − q)(ln p − ln q)`, which is symmetric in its
/// arguments to the last bit.
pub fn sym_kl(p: &Tensor, q: &Tensor) -> Result<f64> {
    if !p.same_shape(q) {
        return shape_err("sym_kl", format!("{:?} vs {:?}", p.shape(), q.shape()));
    }
    check_stochastic(p, "P")?;
    check_stochastic(q, "Q")?;
    let mut total = 0.0;
    for (&a, &b) in p.data().iter().zip(q.data()) {
        let (a, b) = (a.max(PROB_FLOOR), b.max(PROB_FLOOR));
        total += (a - b) * (a.ln() - b.ln());
    }
    Ok(0.5 * total / p.rows() as f64)
}

/// Class distributions of `params` on `batch`.
pub fn predict_probs(net: &Network, params: &ParamSet, batch: &Tensor) -> Result<Tensor> {
    Ok(softmax_rows(&net.logits(params, batch)?))
}

/// Symmetric KL between the predictions of two parameter sets on a batch.
pub fn divergence(net: &Network, a: &ParamSet, b: &ParamSet, batch: &Tensor) -> Result<f64> {
    sym_kl(&predict_probs(net, a, batch)?, &predict_probs(net, b, batch)?)
}
