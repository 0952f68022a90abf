use crate::error::{invalid, shape_err, Result};

use super::{ParamSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are allocated lazily on the first
/// step to match the gradient set, so one state can serve any trainable
/// subset of a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: ParamSet,
    second: ParamSet,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            first: ParamSet::new(),
            second: ParamSet::new(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &ParamSet {
        &self.first
    }

    pub fn second_moment(&self) -> &ParamSet {
        &self.second
    }

    /// Drop moments and step counter.
    pub fn reset(&mut self) {
        self.first = ParamSet::new();
        self.second = ParamSet::new();
        self.step = 0;
    }

    /// Apply one update to the entries of `params` named in `grads`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        for (name, g) in grads.iter() {
            match params.get(name) {
                Some(p) if p.same_shape(g) => {}
                Some(p) => {
                    return shape_err(
                        "adam_step",
                        format!("{name}: parameter {:?} vs gradient {:?}", p.shape(), g.shape()),
                    )
                }
                None => return invalid(format!("gradient for unknown parameter {name}")),
            }
        }
        if self.first.is_empty() {
            for (name, g) in grads.iter() {
                self.first.insert(name, Tensor::zeros(g.shape()))?;
                self.second.insert(name, Tensor::zeros(g.shape()))?;
            }
        } else {
            self.first.check_same_layout(grads, "adam_step")?;
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (name, g) in grads.iter() {
            let m = self.first.get_mut(name).expect("allocated above");
            for (mi, &gi) in m.data_mut().iter_mut().zip(g.data()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
            }
            let v = self.second.get_mut(name).expect("allocated above");
            for (vi, &gi) in v.data_mut().iter_mut().zip(g.data()) {
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            }
            let m = self.first.get(name).unwrap();
            let v = self.second.get(name).unwrap();
            let p = params.get_mut(name).unwrap();
            for ((pi, &mi), &vi) in p.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
                let mhat = mi / bc1;
                let vhat = vi / bc2;
                *pi -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Mean-teacher update `teacher ← m·teacher + (1−m)·student`.
pub fn ema_update(teacher: &mut ParamSet, student: &ParamSet, momentum: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&momentum) {
        return invalid(format!("EMA momentum must lie in [0, 1], got {momentum}"));
    }
    teacher.check_same_layout(student, "ema_update")?;
    for ((_, t), (_, s)) in teacher.iter_mut().zip(student.iter()) {
        for (tv, &sv) in t.data_mut().iter_mut().zip(s.data()) {
            // Equal entries stay put; the blend could otherwise move them by
            // an ulp and break bitwise freezing of untouched parameters.
            if *tv != sv {
                *tv = momentum * *tv + (1.0 - momentum) * sv;
            }
        }
    }
    Ok(())
}
