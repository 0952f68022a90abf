use std::collections::HashMap;

use crate::error::Result;

use super::autograd::{Graph, Var};
use super::ParamSet;

/// Trainable leaves registered for one evaluation of a loss under test.
#[derive(Debug, Default)]
pub struct Leaves(HashMap<String, Var>);

impl Leaves {
    pub fn register(g: &mut Graph, point: &ParamSet) -> Self {
        Self(
            point
                .iter()
                .map(|(n, t)| (n.to_string(), g.param(n, t.clone())))
                .collect(),
        )
    }

    pub fn get(&self, name: &str) -> Var {
        *self
            .0
            .get(name)
            .unwrap_or_else(|| panic!("no leaf named {name}"))
    }
}

/// Compare reverse-mode gradients of `loss` against central differences.
///
/// Returns `max |analytic − numeric| / max(|analytic|, |numeric|, 1e-8)` over
/// every element of `point`; any non-finite value yields `f64::INFINITY`.
pub fn grad_check<F>(point: &ParamSet, eps: f64, loss: F) -> Result<f64>
where
    F: Fn(&mut Graph, &Leaves) -> Result<Var>,
{
    let mut g = Graph::new();
    let leaves = Leaves::register(&mut g, point);
    let l = loss(&mut g, &leaves)?;
    let analytic = g.backward(l)?.params();

    let eval = |p: &ParamSet| -> Result<f64> {
        let mut g = Graph::new();
        let leaves = Leaves::register(&mut g, p);
        let l = loss(&mut g, &leaves)?;
        Ok(g.value(l).item())
    };

    let mut worst = 0.0_f64;
    let mut probe = point.clone();
    for (name, t) in point.iter() {
        let grad = analytic.get(name).expect("every leaf has a gradient");
        for k in 0..t.len() {
            let orig = t.data()[k];
            probe.get_mut(name).unwrap().data_mut()[k] = orig + eps;
            let up = eval(&probe)?;
            probe.get_mut(name).unwrap().data_mut()[k] = orig - eps;
            let down = eval(&probe)?;
            probe.get_mut(name).unwrap().data_mut()[k] = orig;

            let numeric = (up - down) / (2.0 * eps);
            let a = grad.data()[k];
            if !numeric.is_finite() || !a.is_finite() {
                return Ok(f64::INFINITY);
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
