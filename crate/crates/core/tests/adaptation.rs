//! Contracts of the online adaptation loop: oracle equivalence, freezing,
//! update order, queue inertness, causality and determinism.

mod common;

use bee::beeloop::{
    prepare, run, run_prepared, BeeConfig, BeeState, Consistency, MergeKind, Phase, Prepared, ReplayStrategy,
};
use bee::netcore::{softmax_rows, Tensor};
use bee::seed::sub_seed;
use common::{tiny_config, EntropyOracle};

fn entropy_only(mut cfg: BeeConfig) -> BeeConfig {
    cfg.mcr.kind = Consistency::None;
    cfg.adapt.use_queue = false;
    cfg.car.strategy = ReplayStrategy::Off;
    cfg
}

fn batches(prep: &Prepared) -> Vec<Tensor> {
    prep.bench.stream.batches().map(|b| b.features).collect()
}

fn state(prep: &Prepared, cfg: &BeeConfig, seed: u64) -> BeeState {
    BeeState::new(prep.net.clone(), cfg.clone(), prep.warm.clone(), sub_seed(seed, "adapt")).unwrap()
}

#[test]
fn entropy_only_matches_independent_baseline_bitwise() {
    for seed in 0..2 {
        let cfg = entropy_only(tiny_config());
        let prep = prepare(&cfg, seed).unwrap();
        let mut bee = state(&prep, &cfg, seed);
        let mut oracle = EntropyOracle::new(prep.net.clone(), &prep.warm, cfg.adam(), cfg.adapt.ema);
        for x in batches(&prep) {
            let (y, _) = bee.process_batch(&x).unwrap();
            let want = oracle.step(&x);
            assert_eq!(y.data(), want.data(), "seed {seed}");
        }
        assert_eq!(bee.student(), &oracle.student);
        assert_eq!(bee.teacher(), &oracle.teacher);
    }
}

#[test]
fn untrainable_parameters_stay_bitwise_frozen() {
    let mut cfg = tiny_config();
    cfg.car.strategy = ReplayStrategy::FixedInterval(3);
    let prep = prepare(&cfg, 3).unwrap();
    let mut s = state(&prep, &cfg, 3);
    let mut merges = 0;
    for x in batches(&prep) {
        merges += s.process_batch(&x).unwrap().1.merge.is_some() as usize;
    }
    assert!(merges > 0, "the run should exercise merging");
    for (name, t) in prep.warm.student.iter() {
        if !prep.net.is_trainable(name) {
            assert_eq!(s.student().get(name).unwrap(), t, "student {name} moved");
            assert_eq!(s.teacher().get(name).unwrap(), prep.warm.teacher.get(name).unwrap(), "teacher {name} moved");
        }
    }
    let moved = prep
        .warm
        .student
        .iter()
        .any(|(n, t)| prep.net.is_trainable(n) && s.student().get(n).unwrap() != t);
    assert!(moved, "shallow parameters should adapt");
}

#[test]
fn updates_run_in_algorithm_order() {
    let mut cfg = tiny_config();
    cfg.car.strategy = ReplayStrategy::FixedInterval(2);
    let prep = prepare(&cfg, 1).unwrap();
    let mut s = state(&prep, &cfg, 1);
    s.set_tracing(true);
    for (i, x) in batches(&prep).iter().enumerate() {
        let out = s.process_batch(x).unwrap().1;
        let phases: Vec<Phase> = out.trace.iter().map(|(p, _)| *p).collect();
        // One tiny batch already fills an inner batch, so both inner steps
        // run from the first batch on.
        let mut want = vec![
            Phase::Inner(0),
            Phase::Inner(1),
            Phase::Consistency,
            Phase::Entropy,
            Phase::Teacher,
        ];
        if out.merge.is_some() {
            want.push(Phase::Merge);
        }
        assert_eq!(phases, want, "batch {i}");
        assert_eq!(out.merge.is_some(), (i + 1) % 2 == 0, "batch {i}");
    }
}

#[test]
fn zero_inner_steps_equal_a_disabled_queue() {
    let base = tiny_config();
    let prep = prepare(&base, 2).unwrap();
    let mut a = base.clone();
    a.adapt.inner_steps = 0;
    let mut b = base.clone();
    b.adapt.use_queue = false;
    let ra = run_prepared(&prep, &a, 2).unwrap();
    let rb = run_prepared(&prep, &b, 2).unwrap();
    assert_eq!(ra.reports, rb.reports);
    assert_eq!(ra.summary, rb.summary);
}

#[test]
fn predictions_never_depend_on_later_batches() {
    let cfg = tiny_config();
    let prep = prepare(&cfg, 4).unwrap();
    let xs = batches(&prep);
    let mut full = state(&prep, &cfg, 4);
    let full_preds: Vec<Tensor> = xs.iter().map(|x| full.process_batch(x).unwrap().0).collect();

    let cut = xs.len() / 2;
    let mut other = state(&prep, &cfg, 4);
    for (i, x) in xs.iter().enumerate() {
        let input = if i < cut { x.clone() } else { x.map(|v| -3.0 * v + 1.0) };
        let (y, _) = other.process_batch(&input).unwrap();
        if i < cut {
            assert_eq!(y.data(), full_preds[i].data(), "batch {i}");
        }
    }
}

#[test]
fn committed_prediction_precedes_the_batch_update() {
    let cfg = tiny_config();
    let prep = prepare(&cfg, 5).unwrap();
    let x = batches(&prep).remove(0);
    let mut s = state(&prep, &cfg, 5);
    // With the queue on, inner steps run before the prediction; disable them
    // to compare against the untouched warm-up pair.
    let mut no_queue = cfg.clone();
    no_queue.adapt.use_queue = false;
    let mut s0 = state(&prep, &no_queue, 5);
    let (y0, _) = s0.process_batch(&x).unwrap();
    let ps = softmax_rows(&prep.net.logits(&prep.warm.student, &x).unwrap());
    let pt = softmax_rows(&prep.net.logits(&prep.warm.teacher, &x).unwrap());
    let want = ps.zip_map(&pt, |a, b| (a + b) * 0.5).unwrap();
    assert_eq!(y0.data(), want.data());
    let (y, _) = s.process_batch(&x).unwrap();
    assert!(y.is_finite());
}

#[test]
fn frozen_state_predicts_with_the_source_model() {
    let mut cfg = tiny_config();
    cfg.adapt.frozen = true;
    let prep = prepare(&cfg, 6).unwrap();
    let mut s = BeeState::frozen(prep.net.clone(), &cfg, prep.source.clone()).unwrap();
    for x in batches(&prep) {
        let (y, out) = s.process_batch(&x).unwrap();
        let want = softmax_rows(&prep.net.logits(&prep.source, &x).unwrap());
        assert_eq!(y.data(), want.data());
        assert!(out.consistency_loss.is_none() && out.entropy_loss.is_none());
    }
    assert_eq!(s.student(), &prep.source);
}

#[test]
fn runs_are_deterministic_per_seed() {
    let cfg = tiny_config();
    let a = run_prepared(&prepare(&cfg, 8).unwrap(), &cfg, 8).unwrap();
    let b = run_prepared(&prepare(&cfg, 8).unwrap(), &cfg, 8).unwrap();
    assert_eq!(a.reports, b.reports);
    assert_eq!(a.boundary_accuracy, b.boundary_accuracy);
}

#[test]
fn source_reset_restores_the_warm_student() {
    let mut cfg = tiny_config();
    cfg.car.strategy = ReplayStrategy::Trigger(MergeKind::SourceReset);
    cfg.car.detector.threshold = 1e-9;
    cfg.car.detector.sigma_floor = 1.0;
    let prep = prepare(&cfg, 9).unwrap();
    let mut s = state(&prep, &cfg, 9);
    let mut saw = false;
    for x in batches(&prep) {
        let out = s.process_batch(&x).unwrap().1;
        if let Some(m) = out.merge {
            assert_eq!(m.anchors, vec![0]);
            assert_eq!(m.weights, vec![1.0]);
            assert_eq!(s.student(), s.source_snapshot());
            saw = true;
        }
    }
    assert!(saw, "a reset should have fired");
}

#[test]
fn summary_mean_is_mean_of_domains() {
    let cfg = tiny_config();
    let prep = prepare(&cfg, 0).unwrap();
    let mut s = state(&prep, &cfg, 0);
    let out = run(&mut s, &prep.bench.stream, Some(&prep.bench.holdout), |_| Ok(())).unwrap();
    let d = &out.summary.domains;
    assert_eq!(d.len(), cfg.data.domains);
    let mean = d.iter().map(|x| x.error_pct).sum::<f64>() / d.len() as f64;
    assert!((mean - out.summary.mean_error_pct).abs() < 1e-12);
    assert_eq!(out.boundary_accuracy.len(), cfg.data.domains);
    assert_eq!(out.reports.len(), cfg.data.domains * cfg.data.batches_per_domain);
}
