use std::collections::VecDeque;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::netcore::Tensor;

/// Ring buffer of recent unlabelled test samples.
#[derive(Debug, Clone)]
pub struct SampleQueue {
    dim: usize,
    capacity: usize,
    rows: VecDeque<Vec<f64>>,
}

impl SampleQueue {
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

    /// Append every row of `batch`, evicting the oldest at capacity.
    pub fn push(&mut self, batch: &Tensor) -> Result<()> {
        if batch.cols() != self.dim {
            return invalid(format!("queue holds {}-d samples, got {}", self.dim, batch.cols()));
        }
        for i in 0..batch.rows() {
            if self.rows.len() == self.capacity {
                self.rows.pop_front();
            }
            if self.capacity > 0 {
                self.rows.push_back(batch.row(i).to_vec());
            }
        }
        Ok(())
    }

    /// `min(b, len)` distinct stored samples, uniformly at random.
    pub fn sample(&self, b: usize, rng: &mut impl Rng) -> Option<Tensor> {
        if self.rows.is_empty() || b == 0 {
            return None;
        }
        let k = b.min(self.rows.len());
        let idx = rand::seq::index::sample(rng, self.rows.len(), k);
        let mut data = Vec::with_capacity(k * self.dim);
        for i in idx.iter() {
            data.extend_from_slice(&self.rows[i]);
        }
        Some(Tensor::matrix(k, self.dim, data))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng;

    #[test]
    fn fifo_and_distinct_sampling() {
        let mut q = SampleQueue::new(1, 4);
        q.push(&Tensor::matrix(6, 1, (0..6).map(f64::from).collect())).unwrap();
        assert_eq!(q.len(), 4);
        let s = q.sample(10, &mut rng(1)).unwrap();
        let mut v = s.data().to_vec();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![2.0, 3.0, 4.0, 5.0]);
        assert!(SampleQueue::new(1, 4).sample(3, &mut rng(1)).is_none());
        assert!(q.push(&Tensor::matrix(1, 2, vec![0.0, 0.0])).is_err());
    }
}
