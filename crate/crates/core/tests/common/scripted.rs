//! Scripted loss streams for the shift detector.

use bee::car::{DetectorConfig, ShiftDetector};

/// Scripted loss stream: a level per segment plus a periodic ripple whose
/// standard deviation is `sigma` (a sine of amplitude `sigma·√2`, or a ±sigma
/// alternation when `period` is 2).
pub fn scripted_stream(levels: &[(f64, usize)], sigma: f64, period: usize, phase: f64) -> Vec<f64> {
    let ripple = |i: usize| {
        if period == 2 {
            if i % 2 == 0 { sigma } else { -sigma }
        } else {
            sigma * std::f64::consts::SQRT_2 * (std::f64::consts::TAU * i as f64 / period as f64 + phase).sin()
        }
    };
    levels
        .iter()
        .flat_map(|&(level, len)| (0..len).map(move |i| level + ripple(i)))
        .collect()
}

pub fn triggers(stream: &[f64]) -> Vec<usize> {
    let mut d = ShiftDetector::new(DetectorConfig::default());
    stream.iter().enumerate().filter_map(|(i, &v)| d.observe(v).then_some(i)).collect()
}
