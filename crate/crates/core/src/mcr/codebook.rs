use rand::seq::index::sample;
use rand::Rng;

use crate::error::{invalid, shape_err, Result};
use crate::netcore::{normalize_rows, softmax_rows, Tensor};

/// `D x M` matrix of unit-norm prototype columns for one block, plus the
/// temperature used when scoring features against it.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    block: usize,
    matrix: Tensor,
    temperature: f64,
}

impl Codebook {
    /// Columns of `matrix` are normalised on construction.
    pub fn new(block: usize, matrix: Tensor, temperature: f64) -> Result<Self> {
        let mut cb = Self::checked(block, matrix, temperature)?;
        cb.renormalize()?;
        Ok(cb)
    }

    /// Rebuild a codebook from a saved matrix without renormalising, so a
    /// checkpoint round trip is bit-exact. Columns must already be unit
    /// norm to within `1e-9`.
    pub fn restore(block: usize, matrix: Tensor, temperature: f64) -> Result<Self> {
        let cb = Self::checked(block, matrix, temperature)?;
        if cb.max_norm_error() > 1e-9 {
            return invalid(format!("codebook {block} columns are not unit norm"));
        }
        Ok(cb)
    }

    fn checked(block: usize, matrix: Tensor, temperature: f64) -> Result<Self> {
        if matrix.shape().len() != 2 {
            return shape_err("Codebook::new", format!("expected a D x M matrix, got {:?}", matrix.shape()));
        }
        if matrix.cols() < 2 {
            return invalid(format!("codebook needs at least 2 prototypes, got {}", matrix.cols()));
        }
        if !(temperature > 0.0) || !temperature.is_finite() {
            return invalid(format!("temperature must be positive, got {temperature}"));
        }
        Ok(Self {
            block,
            matrix,
            temperature,
        })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn prototypes(&self) -> usize {
        self.matrix.cols()
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(self.block, self.matrix.clone(), temperature)
    }

    /// Replace the prototype matrix (e.g. after a gradient step) and restore
    /// unit-norm columns.
    pub fn set_matrix(&mut self, matrix: Tensor) -> Result<()> {
        if !matrix.same_shape(&self.matrix) {
            return shape_err(
                "Codebook::set_matrix",
                format!("{:?} vs {:?}", matrix.shape(), self.matrix.shape()),
            );
        }
        self.matrix = matrix;
        self.renormalize()
    }

    fn renormalize(&mut self) -> Result<()> {
        let t = normalize_rows(&self.matrix.transpose())
            .map_err(|_| crate::Error::InvalidArgument(format!("codebook {} has a zero prototype", self.block)))?;
        self.matrix = t.transpose();
        Ok(())
    }

    /// Largest deviation of any column norm from 1.
    pub fn max_norm_error(&self) -> f64 {
        let t = self.matrix.transpose();
        (0..t.rows())
            .map(|i| (t.row(i).iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn cosine(&self, h: &Tensor) -> Result<Tensor> {
        if h.cols() != self.dim() {
            return shape_err(
                "codebook scoring",
                format!("features of width {} against a {}-dimensional codebook", h.cols(), self.dim()),
            );
        }
        normalize_rows(h)?.matmul(&self.matrix)
    }
}

/// Student assignment: row-wise `softmax(Qᵀĥ / τ)`.
pub fn student_assign(h: &Tensor, cb: &Codebook) -> Result<Tensor> {
    Ok(softmax_rows(&teacher_similarities(h, cb)?))
}

/// Raw scaled scores `Qᵀĥ / τ`, the input to Sinkhorn balancing.
pub fn teacher_similarities(h: &Tensor, cb: &Codebook) -> Result<Tensor> {
    Ok(cb.cosine(h)?.scale(1.0 / cb.temperature))
}

/// Student and teacher codebooks for every block.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookPair {
    pub student: Codebook,
    pub teacher: Codebook,
}

/// Seed one codebook per block from warm-up features: `m` rows drawn
/// without replacement, normalised, used as prototype columns. The teacher
/// codebook starts as an exact copy of the student one.
pub fn init_codebooks(
    features: &[Tensor],
    m: usize,
    tau_student: f64,
    tau_teacher: f64,
    rng: &mut impl Rng,
) -> Result<Vec<CodebookPair>> {
    let mut out = Vec::with_capacity(features.len());
    for (idx, feats) in features.iter().enumerate() {
        let block = idx + 1;
        if feats.rows() < m {
            return invalid(format!(
                "block {block}: {} warm-up features available, {m} prototypes requested",
                feats.rows()
            ));
        }
        let picks = sample(rng, feats.rows(), m).into_vec();
        let chosen = normalize_rows(&feats.gather_rows(&picks))?;
        let dups = count_duplicate_rows(&chosen);
        if dups > 0 {
            log::warn!("block {block}: codebook initialised with {dups} duplicate prototypes");
        }
        let student = Codebook::new(block, chosen.transpose(), tau_student)?;
        let teacher = student.with_temperature(tau_teacher)?;
        out.push(CodebookPair { student, teacher });
    }
    Ok(out)
}

fn count_duplicate_rows(t: &Tensor) -> usize {
    let mut seen = std::collections::HashSet::new();
    (0..t.rows())
        .filter(|&i| {
            let key: Vec<u64> = t.row(i).iter().map(|v| v.to_bits()).collect();
            !seen.insert(key)
        })
        .count()
}
