//! Central-difference checks of the analytic gradients of the adaptation
//! losses.

use std::collections::BTreeSet;

use bee::mcr::{Codebook, CodebookPair, McrConfig, McrState};
use bee::netcore::{softmax_rows, Graph, Network, NetworkSpec, ParamSet, Tensor};
use super::{random_simplex, random_tensor, rng};
use rand::Rng;

pub const EPS: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
/// Absolute floor in the relative-error denominator, so gradients that are
/// numerically zero compare by absolute difference.
pub const FLOOR: f64 = 1e-6;

/// Max relative error between `eval`'s analytic gradient and central
/// differences of its value, over every element of `point`.
pub fn fd_error(point: &ParamSet, eval: impl Fn(&ParamSet) -> (f64, ParamSet)) -> f64 {
    let (_, analytic) = eval(point);
    let mut worst = 0.0_f64;
    let mut probe = point.clone();
    for (name, t) in point.iter() {
        let grad = analytic.get(name).unwrap_or_else(|| panic!("no gradient for {name}"));
        for k in 0..t.len() {
            let orig = t.data()[k];
            probe.get_mut(name).unwrap().data_mut()[k] = orig + EPS;
            let up = eval(&probe).0;
            probe.get_mut(name).unwrap().data_mut()[k] = orig - EPS;
            let down = eval(&probe).0;
            probe.get_mut(name).unwrap().data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * EPS);
            let a = grad.data()[k];
            assert!(numeric.is_finite() && a.is_finite(), "non-finite gradient for {name}[{k}]");
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR));
        }
    }
    worst
}

struct Case {
    net: Network,
    params: ParamSet,
    teacher: ParamSet,
    x: Tensor,
}

fn random_case(seed: u64) -> Case {
    let mut r = rng(seed);
    let depth = r.gen_range(2..=4);
    let dim = r.gen_range(3..=5);
    let widths: Vec<usize> = (0..depth).map(|_| r.gen_range(3..=5)).collect();
    let classes = r.gen_range(3..=4);
    let net = Network::new(NetworkSpec::new(dim, widths, classes)).unwrap();
    let params = net.init_params(&mut r);
    let teacher = net.init_params(&mut r);
    let n = r.gen_range(2..=5);
    let x = random_tensor(&mut r, n, dim, 2.0);
    Case {
        net,
        params,
        teacher,
        x,
    }
}

fn all_trainable(_: &str) -> bool {
    true
}

pub fn entropy_error(seed: u64) -> f64 {
    let c = random_case(seed);
    let teacher_logits = c.net.logits(&c.teacher, &c.x).unwrap();
    let logit_avg = seed % 2 == 1;
    fd_error(&c.params, |p| {
        let mut g = Graph::new();
        let xv = g.constant(c.x.clone());
        let f = c.net.forward_graph(&mut g, p, xv, all_trainable).unwrap();
        let y = if logit_avg {
            let zt = g.constant(teacher_logits.clone());
            let s = g.add(f.logits, zt).unwrap();
            let m = g.scale(s, 0.5);
            g.softmax_rows(m)
        } else {
            let ps = g.softmax_rows(f.logits);
            let pt = g.constant(softmax_rows(&teacher_logits));
            let s = g.add(ps, pt).unwrap();
            g.scale(s, 0.5)
        };
        let loss = g.entropy(y);
        (g.value(loss).item(), g.backward(loss).unwrap().params())
    })
}

pub fn prediction_error(seed: u64) -> f64 {
    let c = random_case(seed);
    let target = softmax_rows(&c.net.logits(&c.teacher, &c.x).unwrap());
    fd_error(&c.params, |p| {
        let mut g = Graph::new();
        let xv = g.constant(c.x.clone());
        let f = c.net.forward_graph(&mut g, p, xv, all_trainable).unwrap();
        let ps = g.softmax_rows(f.logits);
        let loss = g.cross_entropy(target.clone(), ps).unwrap();
        (g.value(loss).item(), g.backward(loss).unwrap().params())
    })
}

/// Codebook consistency loss through the full network, with a random active
/// block set and sometimes a non-empty balancing queue.
pub fn mcr_network_error(seed: u64) -> f64 {
    let c = random_case(seed);
    let mut r = rng(seed ^ 0x5eed);
    let depth = c.net.depth();
    let m = r.gen_range(3..=6);
    let books: Vec<CodebookPair> = (1..=depth)
        .map(|j| {
            let w = c.net.width(j);
            CodebookPair {
                student: Codebook::new(j, random_tensor(&mut r, w, m, 1.0), 0.1).unwrap(),
                teacher: Codebook::new(j, random_tensor(&mut r, w, m, 1.0), 0.05).unwrap(),
            }
        })
        .collect();
    let mut active: BTreeSet<usize> = (1..=depth).filter(|_| r.gen_bool(0.6)).collect();
    if active.is_empty() {
        active.insert(depth);
    }
    let cfg = McrConfig {
        prototypes: m,
        tau_student: 0.1,
        tau_teacher: 0.05,
        sinkhorn_iters: 3,
        queue_capacity: 8,
        active_blocks: active,
    };
    let mut state = McrState::new(cfg, books).unwrap();
    if r.gen_bool(0.5) {
        let other = random_tensor(&mut r, 4, c.net.input_dim(), 2.0);
        let tf = c.net.forward(&c.teacher, &other).unwrap();
        let mut g = Graph::new();
        let xv = g.constant(other);
        let sf = c.net.forward_graph(&mut g, &c.params, xv, all_trainable).unwrap();
        state.loss(&mut g, &sf.features, &tf.features, false, true).unwrap();
    }
    let tf = c.net.forward(&c.teacher, &c.x).unwrap();
    fd_error(&c.params, |p| {
        let mut st = state.clone();
        let mut g = Graph::new();
        let xv = g.constant(c.x.clone());
        let sf = c.net.forward_graph(&mut g, p, xv, all_trainable).unwrap();
        let loss = st.loss(&mut g, &sf.features, &tf.features, false, false).unwrap();
        (g.value(loss.total).item(), g.backward(loss.total).unwrap().params())
    })
}

/// One block's codebook term with both the features and the prototype
/// matrix as leaves.
pub fn mcr_codebook_error(seed: u64) -> f64 {
    let mut r = rng(seed ^ 0xc0de);
    let (n, d, m) = (r.gen_range(2..=5), r.gen_range(3..=6), r.gen_range(3..=6));
    let target = random_simplex(&mut r, n, m);
    let q = Codebook::new(1, random_tensor(&mut r, d, m, 1.0), 0.1).unwrap();
    let mut point = ParamSet::new();
    point.insert("h", random_tensor(&mut r, n, d, 2.0)).unwrap();
    point.insert("q", q.matrix().clone()).unwrap();
    fd_error(&point, |p| {
        let mut g = Graph::new();
        let h = g.param("h", p.get("h").unwrap().clone());
        let q = g.param("q", p.get("q").unwrap().clone());
        let cos = g.cosine_scores(h, q).unwrap();
        let probs = g.softmax_with_temperature(cos, 0.1).unwrap();
        let loss = g.cross_entropy(target.clone(), probs).unwrap();
        (g.value(loss).item(), g.backward(loss).unwrap().params())
    })
}

