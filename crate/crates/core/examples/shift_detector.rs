//! Feed a scripted loss stream with two level changes to the shift detector
//! and print the z-scores around each trigger.
//!
//! cargo run --example shift_detector

use bee::car::{DetectorConfig, ShiftDetector};

fn main() {
    let level = |i: usize| match i {
        0..=119 => 1.0,
        120..=269 => 6.0,
        _ => 11.0,
    };
    let stream: Vec<f64> = (0..400).map(|i| level(i) + if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
    let mut d = ShiftDetector::new(DetectorConfig::default());
    for (i, &v) in stream.iter().enumerate() {
        let fired = d.observe(v);
        if fired || (118..=123).contains(&i) || (268..=273).contains(&i) {
            let z = d.last_z().map_or("-".to_string(), |z| format!("{z:.2}"));
            println!("batch {i:>3}: loss {v:.2}  z {z:>10}  {}", if fired { "TRIGGER" } else { "" });
        }
    }
}
