//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod gradcheck;
pub mod schema;
pub mod scripted;

use bee::beeloop::{BeeConfig, WarmState};
use bee::netcore::{ema_update, softmax_rows, AdamConfig, AdamState, Graph, Network, ParamSet, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A configuration small enough for debug-speed end-to-end tests.
pub fn tiny_config() -> BeeConfig {
    let mut c = BeeConfig::default();
    c.data.dim = 8;
    c.data.classes = 4;
    c.data.center_scale = 2.5;
    c.data.n_train = 400;
    c.data.n_holdout = 100;
    c.data.domains = 3;
    c.data.batches_per_domain = 4;
    c.data.batch_size = 16;
    c.model.widths = vec![12, 12, 12, 12];
    c.source.epochs = 2;
    c.source.batch_size = 32;
    c.warmup.batch_size = 32;
    c.adapt.queue_capacity = 48;
    c.adapt.inner_batch = 16;
    c.mcr.prototypes = 8;
    c.mcr.feature_queue = 32;
    c.car.period = 2;
    c.car.capacity = 4;
    c.car.detector.min_fill = 3;
    c.car.detector.window = 6;
    c.car.detector.threshold = 0.5;
    c
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(r: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| r.gen_range(-scale..scale)).collect())
}

/// Random rows on the probability simplex with entries bounded away from 0.
pub fn random_simplex(r: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let row: Vec<f64> = (0..cols).map(|_| r.gen_range(0.05..1.0)).collect();
        let s: f64 = row.iter().sum();
        data.extend(row.iter().map(|v| v / s));
    }
    Tensor::matrix(rows, cols, data)
}

/// Natural log by the series `ln x = 2 Σ_k z^(2k+1)/(2k+1)`, `z = (x−1)/(x+1)`,
/// after scaling `x` into `[1/√2, √2]` with powers of two. Independent of
/// `f64::ln`.
pub fn series_ln(x: f64) -> f64 {
    assert!(x > 0.0);
    const LN2: f64 = 0.693_147_180_559_945_3;
    let mut m = x;
    let mut e = 0i32;
    while m > std::f64::consts::SQRT_2 {
        m /= 2.0;
        e += 1;
    }
    while m < std::f64::consts::FRAC_1_SQRT_2 {
        m *= 2.0;
        e -= 1;
    }
    let z = (m - 1.0) / (m + 1.0);
    let z2 = z * z;
    let mut term = z;
    let mut sum = 0.0;
    for k in 0..200 {
        sum += term / (2 * k + 1) as f64;
        term *= z2;
        if term.abs() < 1e-30 {
            break;
        }
    }
    2.0 * sum + e as f64 * LN2
}

/// `½[KL(P‖Q) + KL(Q‖P)]` for a single distribution pair, written as the two
/// KL terms and using [`series_ln`].
pub fn oracle_sym_kl(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * series_ln(x / y)).sum() };
    0.5 * (kl(p, q) + kl(q, p))
}

/// Entropy-minimisation mean teacher written directly against the network
/// primitives: predict with the average of the two softmax outputs, take
/// one Adam step on the mean entropy of that average w.r.t. the student's
/// trainable parameters, then move the teacher by EMA.
pub struct EntropyOracle {
    pub net: Network,
    pub student: ParamSet,
    pub teacher: ParamSet,
    pub adam: AdamState,
    pub momentum: f64,
}

impl EntropyOracle {
    pub fn new(net: Network, warm: &WarmState, adam: AdamConfig, momentum: f64) -> Self {
        Self {
            net,
            student: warm.student.clone(),
            teacher: warm.teacher.clone(),
            adam: AdamState::new(adam),
            momentum,
        }
    }

    pub fn step(&mut self, x: &Tensor) -> Tensor {
        let zt = self.net.logits(&self.teacher, x).unwrap();
        let zs = self.net.logits(&self.student, x).unwrap();
        let (ps, pt) = (softmax_rows(&zs), softmax_rows(&zt));
        let y = Tensor::matrix(
            ps.rows(),
            ps.cols(),
            ps.data().iter().zip(pt.data()).map(|(a, b)| (a + b) * 0.5).collect(),
        );

        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let net = &self.net;
        let f = net.forward_graph(&mut g, &self.student, xv, |n| net.is_trainable(n)).unwrap();
        let p = g.softmax_rows(f.logits);
        let t = g.constant(pt);
        let sum = g.add(p, t).unwrap();
        let avg = g.scale(sum, 0.5);
        let loss = g.entropy(avg);
        let grads = g.backward(loss).unwrap().params();
        self.adam.step(&mut self.student, &grads).unwrap();
        ema_update(&mut self.teacher, &self.student, self.momentum).unwrap();
        y
    }
}
