use std::collections::VecDeque;

/// Settings of the loss-spike detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub window: usize,
    pub threshold: f64,
    /// EMA momentum applied to the raw loss before scoring.
    pub momentum: f64,
    /// No decision is made until the window holds this many values.
    pub min_fill: usize,
    pub sigma_floor: f64,
    /// On a trigger, restart the smoothed value at the raw loss so the
    /// refilled window describes the new regime only.
    pub restart_smoothing: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window: 100,
            threshold: 1.5,
            momentum: 0.9,
            min_fill: 10,
            sigma_floor: 1e-8,
            restart_smoothing: true,
        }
    }
}

/// Sliding-window z-score test on the exponentially smoothed loss.
#[derive(Debug, Clone)]
pub struct ShiftDetector {
    config: DetectorConfig,
    window: VecDeque<f64>,
    smoothed: Option<f64>,
    last_z: Option<f64>,
}

impl ShiftDetector {
    pub fn new(config: DetectorConfig) -> Self {
        Self {
            config,
            window: VecDeque::with_capacity(config.window),
            smoothed: None,
            last_z: None,
        }
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn fill(&self) -> usize {
        self.window.len()
    }

    pub fn smoothed(&self) -> Option<f64> {
        self.smoothed
    }

    /// z-score computed by the most recent [`observe`](Self::observe) call,
    /// if the window was full enough to compute one.
    pub fn last_z(&self) -> Option<f64> {
        self.last_z
    }

    /// Feed one raw loss value. Returns true when a shift is declared; the
    /// window is then cleared before the new smoothed value is pushed.
    pub fn observe(&mut self, loss: f64) -> bool {
        let m = self.config.momentum;
        let mut s = match self.smoothed {
            Some(prev) => m * prev + (1.0 - m) * loss,
            None => loss,
        };

        let mut fired = false;
        self.last_z = None;
        if self.window.len() >= self.config.min_fill && self.window.len() >= 2 {
            let n = self.window.len() as f64;
            let mean = self.window.iter().sum::<f64>() / n;
            let var = self.window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let z = (s - mean) / var.sqrt().max(self.config.sigma_floor);
            self.last_z = Some(z);
            if z > self.config.threshold {
                fired = true;
                self.window.clear();
                if self.config.restart_smoothing {
                    s = loss;
                }
            }
        }
        self.smoothed = Some(s);
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        if self.config.window > 0 {
            self.window.push_back(s);
        }
        fired
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stream_never_fires() {
        let mut d = ShiftDetector::new(DetectorConfig::default());
        assert!((0..500).all(|_| !d.observe(2.5)));
    }

    #[test]
    fn below_min_fill_never_fires() {
        let mut d = ShiftDetector::new(DetectorConfig::default());
        for _ in 0..9 {
            assert!(!d.observe(1.0));
        }
        // Ninth push done; the tenth observation sees only nine values.
        assert!(!d.observe(1e9));
    }

    #[test]
    fn window_is_bounded() {
        let mut d = ShiftDetector::new(DetectorConfig {
            window: 5,
            ..DetectorConfig::default()
        });
        for _ in 0..20 {
            d.observe(1.0);
        }
        assert_eq!(d.fill(), 5);
    }

    #[test]
    fn jump_fires_and_clears() {
        let mut d = ShiftDetector::new(DetectorConfig::default());
        for i in 0..50 {
            d.observe(1.0 + 0.01 * if i % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert!(d.observe(6.0));
        assert_eq!(d.fill(), 1);
        assert_eq!(d.smoothed(), Some(6.0));
    }

    #[test]
    fn smoothing_can_carry_over_a_trigger() {
        let mut d = ShiftDetector::new(DetectorConfig {
            restart_smoothing: false,
            ..DetectorConfig::default()
        });
        for i in 0..50 {
            d.observe(1.0 + 0.01 * if i % 2 == 0 { 1.0 } else { -1.0 });
        }
        assert!(d.observe(6.0));
        assert!(d.smoothed().unwrap() < 2.0);
    }
}
