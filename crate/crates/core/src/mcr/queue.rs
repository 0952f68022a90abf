use std::collections::VecDeque;

use crate::error::{invalid, Result};
use crate::netcore::{normalize_rows, Tensor};

/// Bounded FIFO of unit-norm teacher features for one block. Stored rows
/// widen the Sinkhorn balancing beyond the current batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureQueue {
    dim: usize,
    capacity: usize,
    rows: VecDeque<Vec<f64>>,
}

impl FeatureQueue {
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            capacity,
            rows: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }

    /// Normalise and append every row of `features`, evicting the oldest rows
    /// beyond capacity.
    pub fn push(&mut self, features: &Tensor) -> Result<()> {
        if features.cols() != self.dim {
            return invalid(format!(
                "feature queue holds {}-dimensional rows, got {}",
                self.dim,
                features.cols()
            ));
        }
        if self.capacity == 0 {
            return Ok(());
        }
        let unit = normalize_rows(features)?;
        for i in 0..unit.rows() {
            if self.rows.len() == self.capacity {
                self.rows.pop_front();
            }
            self.rows.push_back(unit.row(i).to_vec());
        }
        Ok(())
    }

    /// Stored rows, oldest first, or `None` when empty.
    pub fn snapshot(&self) -> Option<Tensor> {
        if self.rows.is_empty() {
            return None;
        }
        let data: Vec<f64> = self.rows.iter().flatten().copied().collect();
        Some(Tensor::matrix(self.rows.len(), self.dim, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_oldest_and_stays_unit_norm() {
        let mut q = FeatureQueue::new(2, 3);
        q.push(&Tensor::matrix(2, 2, vec![3., 4., 0., 2.])).unwrap();
        q.push(&Tensor::matrix(2, 2, vec![1., 0., -5., 0.])).unwrap();
        assert_eq!(q.len(), 3);
        let s = q.snapshot().unwrap();
        assert_eq!(s.row(0), &[0.0, 1.0]);
        assert_eq!(s.row(2), &[-1.0, 0.0]);
        for i in 0..s.rows() {
            let n: f64 = s.row(i).iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_capacity_stays_empty() {
        let mut q = FeatureQueue::new(2, 0);
        q.push(&Tensor::matrix(1, 2, vec![1., 1.])).unwrap();
        assert!(q.snapshot().is_none());
    }
}
