use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, shape_err, Result};
use crate::netcore::Tensor;
use crate::seed::{rng, sub_seed};

/// Labelled samples, optionally tagged with the domain each came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    pub labels: Vec<u32>,
    pub classes: usize,
    pub domains: Option<Vec<u32>>,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Vec<u32>, classes: usize, domains: Option<Vec<u32>>) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n || domains.as_ref().is_some_and(|d| d.len() != n) {
            return shape_err("Dataset", format!("{n} rows with {} labels", labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return invalid(format!("label {bad} outside 0..{classes}"));
        }
        Ok(Self {
            features,
            labels,
            classes,
            domains,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows `idx` as a new dataset.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.gather_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            domains: self.domains.as_ref().map(|d| idx.iter().map(|&i| d[i]).collect()),
        }
    }
}

/// Gaussian-blob classification task standing in for labelled source data.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceTask {
    pub dim: usize,
    pub classes: usize,
    /// Within-class standard deviation σ₀.
    pub sigma: f64,
    /// Class centres are drawn from N(0, center_scale² I).
    pub center_scale: f64,
    /// Minimum distance between any two centres, in units of σ₀.
    pub min_separation: f64,
    pub n_train: usize,
    pub n_holdout: usize,
    pub seed: u64,
}

impl Default for SourceTask {
    fn default() -> Self {
        Self {
            dim: 32,
            classes: 10,
            sigma: 1.0,
            center_scale: 1.2,
            min_separation: 6.0,
            n_train: 5000,
            n_holdout: 2000,
            seed: 0,
        }
    }
}

impl SourceTask {
    fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.classes < 2 {
            return invalid(format!("need d >= 2 and C >= 2, got d={} C={}", self.dim, self.classes));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return invalid(format!("within-class sigma must be >= 0, got {}", self.sigma));
        }
        if !(self.center_scale > 0.0) {
            return invalid("center scale must be positive");
        }
        Ok(())
    }

    /// Class centres (`C x d`), redrawn until every pair is at least
    /// `min_separation · σ₀` apart.
    pub fn centers(&self) -> Result<Tensor> {
        self.validate()?;
        let mut r = rng(sub_seed(self.seed, "centers"));
        let min_dist = self.min_separation * self.sigma;
        for _ in 0..10_000 {
            let data: Vec<f64> = (0..self.classes * self.dim)
                .map(|_| self.center_scale * r.sample::<f64, _>(StandardNormal))
                .collect();
            let c = Tensor::matrix(self.classes, self.dim, data);
            if min_pairwise_distance(&c) >= min_dist {
                return Ok(c);
            }
        }
        invalid(format!(
            "could not place {} centres {min_dist} apart at scale {}",
            self.classes, self.center_scale
        ))
    }

    /// `n` class-balanced samples (counts differ by at most one), shuffled.
    pub fn sample(&self, centers: &Tensor, n: usize, rng: &mut impl Rng) -> Dataset {
        let mut labels: Vec<u32> = (0..n).map(|i| (i % self.classes) as u32).collect();
        labels.shuffle(rng);
        let mut data = Vec::with_capacity(n * self.dim);
        for &y in &labels {
            for &c in centers.row(y as usize) {
                data.push(c + self.sigma * rng.sample::<f64, _>(StandardNormal));
            }
        }
        Dataset {
            features: Tensor::matrix(n, self.dim, data),
            labels,
            classes: self.classes,
            domains: None,
        }
    }
}

fn min_pairwise_distance(c: &Tensor) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..c.rows() {
        for b in a + 1..c.rows() {
            let d2: f64 = c.row(a).iter().zip(c.row(b)).map(|(x, y)| (x - y).powi(2)).sum();
            best = best.min(d2.sqrt());
        }
    }
    best
}

/// Labelled train and holdout sets drawn from independent sub-streams.
pub fn gen_source(task: &SourceTask) -> Result<(Dataset, Dataset)> {
    let centers = task.centers()?;
    let train = task.sample(&centers, task.n_train, &mut rng(sub_seed(task.seed, "train")));
    let holdout = task.sample(&centers, task.n_holdout, &mut rng(sub_seed(task.seed, "holdout")));
    Ok((train, holdout))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SourceTask {
        SourceTask {
            n_train: 103,
            n_holdout: 20,
            ..SourceTask::default()
        }
    }

    #[test]
    fn regeneration_is_bitwise_identical() {
        let a = gen_source(&small()).unwrap();
        let b = gen_source(&small()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_sigma_puts_samples_on_centres() {
        let task = SourceTask {
            sigma: 0.0,
            ..small()
        };
        let c = task.centers().unwrap();
        let (train, _) = gen_source(&task).unwrap();
        for i in 0..train.len() {
            assert_eq!(train.features.row(i), c.row(train.labels[i] as usize));
        }
    }

    #[test]
    fn classes_are_balanced_and_separated() {
        let task = small();
        let (train, _) = gen_source(&task).unwrap();
        let mut counts = vec![0usize; task.classes];
        for &l in &train.labels {
            counts[l as usize] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1);
        assert!(min_pairwise_distance(&task.centers().unwrap()) >= 6.0);
    }

    #[test]
    fn degenerate_tasks_rejected() {
        assert!(SourceTask { sigma: -1.0, ..small() }.centers().is_err());
        assert!(SourceTask { dim: 1, ..small() }.centers().is_err());
        assert!(SourceTask { classes: 1, ..small() }.centers().is_err());
    }
}
