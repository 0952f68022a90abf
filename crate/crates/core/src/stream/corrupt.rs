use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::netcore::Tensor;
use crate::seed::{indexed_seed, rng, sub_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    AdditiveNoise,
    Rotation,
    Scaling,
    CoordinateMask,
    MeanShift,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 5] = [
        CorruptionKind::AdditiveNoise,
        CorruptionKind::Rotation,
        CorruptionKind::Scaling,
        CorruptionKind::CoordinateMask,
        CorruptionKind::MeanShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorruptionKind::AdditiveNoise => "additive_noise",
            CorruptionKind::Rotation => "rotation",
            CorruptionKind::Scaling => "scaling",
            CorruptionKind::CoordinateMask => "coordinate_mask",
            CorruptionKind::MeanShift => "mean_shift",
        }
    }

    /// Magnitude at which the corruption leaves samples untouched.
    pub fn identity_magnitude(self) -> f64 {
        match self {
            CorruptionKind::Scaling => 1.0,
            _ => 0.0,
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown corruption kind {s:?}")))
    }
}

/// Magnitude of each corruption kind at severities 1 through 5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityTable {
    /// Per-coordinate noise std, in units of σ₀.
    pub additive_noise: [f64; 5],
    /// Rotation angle in degrees, applied in every plane of a random basis.
    pub rotation_deg: [f64; 5],
    /// Multiplicative factor.
    pub scaling: [f64; 5],
    /// Fraction of coordinates zeroed.
    pub coordinate_mask: [f64; 5],
    /// Per-coordinate offset scale, in units of σ₀.
    pub mean_shift: [f64; 5],
}

impl Default for SeverityTable {
    fn default() -> Self {
        Self {
            additive_noise: [0.5, 1.0, 1.5, 2.0, 3.0],
            rotation_deg: [10.0, 20.0, 35.0, 50.0, 70.0],
            scaling: [1.2, 1.5, 2.0, 3.0, 4.0],
            coordinate_mask: [0.1, 0.2, 0.3, 0.4, 0.5],
            mean_shift: [0.5, 1.0, 1.5, 2.0, 3.0],
        }
    }
}

impl SeverityTable {
    pub fn magnitude(&self, kind: CorruptionKind, severity: u8) -> Result<f64> {
        if !(1..=5).contains(&severity) {
            return invalid(format!("severity must be in 1..=5, got {severity}"));
        }
        let row = match kind {
            CorruptionKind::AdditiveNoise => &self.additive_noise,
            CorruptionKind::Rotation => &self.rotation_deg,
            CorruptionKind::Scaling => &self.scaling,
            CorruptionKind::CoordinateMask => &self.coordinate_mask,
            CorruptionKind::MeanShift => &self.mean_shift,
        };
        Ok(row[severity as usize - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum Op {
    Identity,
    Noise(f64),
    /// Row-vector form: `x ↦ x · R`.
    Linear(Tensor),
    Scale(f64),
    Mask(Vec<usize>),
    Shift(Vec<f64>),
}

/// A corruption with its random structure (rotation basis, masked
/// coordinates, shift direction) drawn from the corruption seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    kind: CorruptionKind,
    magnitude: f64,
    seed: u64,
    op: Op,
}

impl Corruption {
    pub fn new(spec: &CorruptionSpec, table: &SeverityTable, dim: usize, sigma: f64) -> Result<Self> {
        let m = table.magnitude(spec.kind, spec.severity)?;
        Self::with_magnitude(spec.kind, m, dim, sigma, spec.seed)
    }

    pub fn with_magnitude(kind: CorruptionKind, magnitude: f64, dim: usize, sigma: f64, seed: u64) -> Result<Self> {
        if !magnitude.is_finite() || magnitude < 0.0 {
            return invalid(format!("{kind} magnitude must be finite and >= 0, got {magnitude}"));
        }
        let mut r = rng(sub_seed(seed, kind.name()));
        let op = if magnitude == kind.identity_magnitude() {
            Op::Identity
        } else {
            match kind {
                CorruptionKind::AdditiveNoise => Op::Noise(magnitude * sigma),
                CorruptionKind::Rotation => Op::Linear(plane_rotation(dim, magnitude.to_radians(), &mut r)),
                CorruptionKind::Scaling => Op::Scale(magnitude),
                CorruptionKind::CoordinateMask => {
                    if magnitude > 1.0 {
                        return invalid(format!("mask fraction {magnitude} exceeds 1"));
                    }
                    let k = (magnitude * dim as f64).round() as usize;
                    let mut idx = rand::seq::index::sample(&mut r, dim, k).into_vec();
                    idx.sort_unstable();
                    Op::Mask(idx)
                }
                CorruptionKind::MeanShift => Op::Shift(
                    (0..dim)
                        .map(|_| magnitude * sigma * r.sample::<f64, _>(StandardNormal))
                        .collect(),
                ),
            }
        };
        Ok(Self {
            kind,
            magnitude,
            seed,
            op,
        })
    }

    pub fn kind(&self) -> CorruptionKind {
        self.kind
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// Corrupt one sample. `sample_index` picks the noise sub-stream, so the
    /// result is a pure function of the sample, the corruption and the index.
    pub fn apply_row(&self, x: &[f64], sample_index: u64) -> Vec<f64> {
        match &self.op {
            Op::Identity => x.to_vec(),
            Op::Noise(s) => {
                let mut r = rng(indexed_seed(self.seed, sample_index));
                x.iter().map(|v| v + s * r.sample::<f64, _>(StandardNormal)).collect()
            }
            Op::Linear(m) => (0..m.cols())
                .map(|j| x.iter().enumerate().map(|(i, v)| v * m.at(i, j)).sum())
                .collect(),
            Op::Scale(s) => x.iter().map(|v| v * s).collect(),
            Op::Mask(idx) => {
                let mut out = x.to_vec();
                for &i in idx {
                    out[i] = 0.0;
                }
                out
            }
            Op::Shift(delta) => x.iter().zip(delta).map(|(v, d)| v + d).collect(),
        }
    }

    /// Corrupt every row; row `i` uses sample index `first_index + i`.
    pub fn apply(&self, x: &Tensor, first_index: u64) -> Tensor {
        let mut data = Vec::with_capacity(x.len());
        for i in 0..x.rows() {
            data.extend(self.apply_row(x.row(i), first_index + i as u64));
        }
        Tensor::matrix(x.rows(), x.cols(), data)
    }
}

/// Corrupt a single sample under `spec`.
pub fn corrupt(
    x: &[f64],
    spec: &CorruptionSpec,
    table: &SeverityTable,
    sigma: f64,
    sample_index: u64,
) -> Result<Vec<f64>> {
    Ok(Corruption::new(spec, table, x.len(), sigma)?.apply_row(x, sample_index))
}

/// `U · blockdiag(R(θ), R(θ), ...) · Uᵀ` for a random orthonormal `U`,
/// returned transposed for row-vector use.
fn plane_rotation(dim: usize, angle: f64, r: &mut impl Rng) -> Tensor {
    let u = random_orthonormal(dim, r);
    let (s, c) = angle.sin_cos();
    let mut b = Tensor::identity(dim);
    for p in 0..dim / 2 {
        let (i, j) = (2 * p, 2 * p + 1);
        b.row_mut(i)[i] = c;
        b.row_mut(i)[j] = -s;
        b.row_mut(j)[i] = s;
        b.row_mut(j)[j] = c;
    }
    let rot = u.matmul(&b).and_then(|ub| ub.matmul_t(&u)).expect("square factors");
    rot.transpose()
}

/// Columns of a Gaussian matrix orthonormalised by modified Gram-Schmidt.
fn random_orthonormal(dim: usize, r: &mut impl Rng) -> Tensor {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        for c in &cols {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    let mut u = Tensor::zeros(&[dim, dim]);
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            u.row_mut(i)[j] = *v;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Vec<f64> {
        (0..8).map(|i| i as f64 * 0.5 - 1.0).collect()
    }

    #[test]
    fn identity_magnitude_leaves_sample_unchanged() {
        for kind in CorruptionKind::ALL {
            let c = Corruption::with_magnitude(kind, kind.identity_magnitude(), 8, 1.0, 3).unwrap();
            assert_eq!(c.apply_row(&x(), 5), x(), "{kind}");
        }
    }

    #[test]
    fn noise_is_deterministic_per_index() {
        let spec = CorruptionSpec {
            kind: CorruptionKind::AdditiveNoise,
            severity: 3,
            seed: 11,
        };
        let t = SeverityTable::default();
        let a = corrupt(&x(), &spec, &t, 1.0, 4).unwrap();
        assert_eq!(a, corrupt(&x(), &spec, &t, 1.0, 4).unwrap());
        assert_ne!(a, corrupt(&x(), &spec, &t, 1.0, 5).unwrap());
    }

    #[test]
    fn rotation_preserves_norm() {
        let c = Corruption::with_magnitude(CorruptionKind::Rotation, 70.0, 8, 1.0, 2).unwrap();
        let y = c.apply_row(&x(), 0);
        let n = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        assert!((n(&y) - n(&x())).abs() < 1e-9);
        assert!(y.iter().zip(x()).any(|(a, b)| (a - b).abs() > 1e-3));
    }

    #[test]
    fn mask_zeroes_requested_fraction() {
        let c = Corruption::with_magnitude(CorruptionKind::CoordinateMask, 0.5, 8, 1.0, 2).unwrap();
        let y = c.apply_row(&[1.0; 8], 0);
        assert_eq!(y.iter().filter(|v| **v == 0.0).count(), 4);
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!("blur".parse::<CorruptionKind>().is_err());
        assert_eq!("mean_shift".parse::<CorruptionKind>().unwrap(), CorruptionKind::MeanShift);
        let t = SeverityTable::default();
        assert!(t.magnitude(CorruptionKind::Scaling, 0).is_err());
        assert!(t.magnitude(CorruptionKind::Scaling, 6).is_err());
    }
}
