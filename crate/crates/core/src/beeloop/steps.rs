//! Single optimisation steps shared by warm-up and the adaptation loop.

use crate::error::Result;
use crate::mcr::McrState;
use crate::netcore::{softmax_rows, AdamState, Forward, Graph, Network, ParamSet, Tensor, Var};

use super::config::Averaging;

/// Committed prediction of the student/teacher pair, plus the teacher's
/// forward pass (reused by the updates that follow, since the teacher does
/// not move until the EMA at the end of the batch).
pub fn predict(
    net: &Network,
    student: &ParamSet,
    teacher: &ParamSet,
    x: &Tensor,
    averaging: Averaging,
    teacher_forward: Option<Forward>,
) -> Result<(Tensor, Forward)> {
    let tf = match teacher_forward {
        Some(f) => f,
        None => net.forward(teacher, x)?,
    };
    let zs = net.logits(student, x)?;
    let y = match averaging {
        Averaging::Probability => softmax_rows(&zs).zip_map(&softmax_rows(&tf.logits), |a, b| (a + b) * 0.5)?,
        Averaging::Logit => softmax_rows(&zs.zip_map(&tf.logits, |a, b| (a + b) * 0.5)?),
    };
    Ok((y, tf))
}

/// The averaged prediction recorded on `g`, differentiable through the
/// student logits only.
fn averaged(g: &mut Graph, student_logits: Var, teacher_logits: &Tensor, averaging: Averaging) -> Result<Var> {
    Ok(match averaging {
        Averaging::Probability => {
            let ps = g.softmax_rows(student_logits);
            let pt = g.constant(softmax_rows(teacher_logits));
            let sum = g.add(ps, pt)?;
            g.scale(sum, 0.5)
        }
        Averaging::Logit => {
            let zt = g.constant(teacher_logits.clone());
            let sum = g.add(student_logits, zt)?;
            let mid = g.scale(sum, 0.5);
            g.softmax_rows(mid)
        }
    })
}

fn apply(g: &Graph, loss: Var, params: &mut ParamSet, adam: &mut AdamState) -> Result<f64> {
    let value = g.value(loss).item();
    if value.is_finite() {
        adam.step(params, &g.backward(loss)?.params())?;
    }
    Ok(value)
}

/// One step on the mean entropy of the freshly recomputed averaged
/// prediction. Returns the loss before the step. A non-finite loss is
/// returned without updating.
pub fn entropy_step(
    net: &Network,
    student: &mut ParamSet,
    teacher_logits: &Tensor,
    x: &Tensor,
    averaging: Averaging,
    adam: &mut AdamState,
) -> Result<f64> {
    let mut g = Graph::new();
    let xv = g.constant(x.clone());
    let sf = net.forward_graph(&mut g, student, xv, |n| net.is_trainable(n))?;
    let y = averaged(&mut g, sf.logits, teacher_logits, averaging)?;
    let loss = g.entropy(y);
    apply(&g, loss, student, adam)
}

/// One step on the multi-level codebook consistency loss. `x_student` may
/// be an augmented view of the teacher's input. With `enqueue`, the teacher
/// features join the balancing queues afterwards.
pub fn mcr_step(
    net: &Network,
    student: &mut ParamSet,
    teacher_features: &[Tensor],
    x_student: &Tensor,
    mcr: &mut McrState,
    adam: &mut AdamState,
    enqueue: bool,
) -> Result<f64> {
    let mut g = Graph::new();
    let xv = g.constant(x_student.clone());
    let sf = net.forward_graph(&mut g, student, xv, |n| net.is_trainable(n))?;
    let loss = mcr.loss(&mut g, &sf.features, teacher_features, false, enqueue)?;
    apply(&g, loss.total, student, adam)
}

/// One step on `H(softmax(teacher), softmax(student))` over class
/// predictions.
pub fn prediction_step(
    net: &Network,
    student: &mut ParamSet,
    teacher_logits: &Tensor,
    x_student: &Tensor,
    adam: &mut AdamState,
) -> Result<f64> {
    let mut g = Graph::new();
    let xv = g.constant(x_student.clone());
    let sf = net.forward_graph(&mut g, student, xv, |n| net.is_trainable(n))?;
    let p = g.softmax_rows(sf.logits);
    let loss = g.cross_entropy(softmax_rows(teacher_logits), p)?;
    apply(&g, loss, student, adam)
}
