use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::netcore::Tensor;
use crate::seed::{indexed_seed, rng, sub_seed};

use super::corrupt::{Corruption, CorruptionKind, CorruptionSpec, SeverityTable};
use super::source::{Dataset, SourceTask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub corruption: CorruptionSpec,
}

/// Ordered target domains. Nothing in here is handed to the adapter; it
/// only ever sees feature batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSchedule {
    pub domains: Vec<DomainSpec>,
    pub batches_per_domain: usize,
    pub batch_size: usize,
}

/// Default domain order. Noise, geometric and masking families alternate so
/// consecutive domains are dissimilar.
pub const DEFAULT_DOMAINS: [(CorruptionKind, u8); 8] = [
    (CorruptionKind::AdditiveNoise, 5),
    (CorruptionKind::Rotation, 5),
    (CorruptionKind::CoordinateMask, 5),
    (CorruptionKind::AdditiveNoise, 3),
    (CorruptionKind::Scaling, 5),
    (CorruptionKind::CoordinateMask, 3),
    (CorruptionKind::AdditiveNoise, 4),
    (CorruptionKind::MeanShift, 5),
];

impl DomainSchedule {
    /// Domains built from `(kind, severity)` pairs; per-domain corruption
    /// seeds derive from `seed`.
    pub fn new(kinds: &[(CorruptionKind, u8)], batches_per_domain: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if kinds.is_empty() || batches_per_domain == 0 || batch_size == 0 {
            return invalid("schedule needs at least one domain, one batch and one sample per batch");
        }
        let mut domains = Vec::with_capacity(kinds.len());
        for (k, &(kind, severity)) in kinds.iter().enumerate() {
            if !(1..=5).contains(&severity) {
                return invalid(format!("domain {k}: severity {severity} outside 1..=5"));
            }
            domains.push(DomainSpec {
                name: format!("{kind}-{severity}"),
                corruption: CorruptionSpec {
                    kind,
                    severity,
                    seed: sub_seed(seed, &format!("corruption/{k}")),
                },
            });
        }
        Ok(Self {
            domains,
            batches_per_domain,
            batch_size,
        })
    }

    /// The first `n` entries of [`DEFAULT_DOMAINS`], cycling if `n > 8`.
    pub fn desk_default(n: usize, batches_per_domain: usize, batch_size: usize, seed: u64) -> Result<Self> {
        let kinds: Vec<_> = DEFAULT_DOMAINS.iter().cycle().take(n).copied().collect();
        Self::new(&kinds, batches_per_domain, batch_size, seed)
    }

    pub fn total_batches(&self) -> usize {
        self.domains.len() * self.batches_per_domain
    }

    /// Draw and corrupt every target batch. Clean samples come from the
    /// source task's class-conditional distribution.
    pub fn generate(&self, task: &SourceTask, table: &SeverityTable, seed: u64) -> Result<TargetStream> {
        let centers = task.centers()?;
        let sample_seed = sub_seed(seed, "target");
        let n = self.total_batches() * self.batch_size;
        let mut features = Vec::with_capacity(n * task.dim);
        let mut labels = Vec::with_capacity(n);
        let mut domains = Vec::with_capacity(n);
        for (k, d) in self.domains.iter().enumerate() {
            let c = Corruption::new(&d.corruption, table, task.dim, task.sigma)?;
            for b in 0..self.batches_per_domain {
                let global = (k * self.batches_per_domain + b) as u64;
                let clean = task.sample(&centers, self.batch_size, &mut rng(indexed_seed(sample_seed, global)));
                let x = c.apply(&clean.features, global * self.batch_size as u64);
                features.extend_from_slice(x.data());
                labels.extend(clean.labels);
                domains.extend(std::iter::repeat(k as u32).take(self.batch_size));
            }
        }
        let data = Dataset::new(Tensor::matrix(n, task.dim, features), labels, task.classes, Some(domains))?;
        TargetStream::new(data, self.batch_size, self.domains.iter().map(|d| d.name.clone()).collect())
    }
}

/// Labels and domain id of one batch. Held by the evaluator only.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLabels {
    pub labels: Vec<u32>,
    pub domain: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub features: Tensor,
    pub hidden: HiddenLabels,
}

impl LabeledBatch {
    /// Separate what the adapter may see from what only the evaluator may.
    pub fn split(self) -> (Tensor, HiddenLabels) {
        (self.features, self.hidden)
    }
}

/// A fully materialised target stream, consumed batch by batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetStream {
    data: Dataset,
    batch_size: usize,
    names: Vec<String>,
}

impl TargetStream {
    /// Wrap a dataset whose rows are grouped into consecutive batches of
    /// `batch_size`, each from a single domain, with non-decreasing ids.
    pub fn new(data: Dataset, batch_size: usize, names: Vec<String>) -> Result<Self> {
        let Some(domains) = data.domains.as_ref() else {
            return invalid("target stream needs per-sample domain ids");
        };
        if batch_size == 0 || data.len() % batch_size != 0 {
            return invalid(format!("{} samples do not split into batches of {batch_size}", data.len()));
        }
        for (b, chunk) in domains.chunks(batch_size).enumerate() {
            if chunk.iter().any(|&d| d != chunk[0]) {
                return invalid(format!("batch {b} mixes domains"));
            }
        }
        if domains.windows(2).any(|w| w[1] < w[0]) {
            return invalid("domain ids must be non-decreasing");
        }
        if let Some(&max) = domains.iter().max() {
            if max as usize >= names.len() {
                return invalid(format!("domain id {max} has no name ({} given)", names.len()));
            }
        }
        Ok(Self {
            data,
            batch_size,
            names,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn domain_names(&self) -> &[String] {
        &self.names
    }

    pub fn num_batches(&self) -> usize {
        self.data.len() / self.batch_size
    }

    /// Batches in stream order; `None` marks the end of the stream.
    pub fn batches(&self) -> impl Iterator<Item = LabeledBatch> + '_ {
        let domains = self.data.domains.as_ref().expect("checked in new");
        (0..self.num_batches()).map(move |b| {
            let idx: Vec<usize> = (b * self.batch_size..(b + 1) * self.batch_size).collect();
            LabeledBatch {
                features: self.data.features.gather_rows(&idx),
                hidden: HiddenLabels {
                    labels: self.data.labels[idx[0]..idx[0] + self.batch_size].to_vec(),
                    domain: domains[idx[0]] as usize,
                },
            }
        })
    }
}
