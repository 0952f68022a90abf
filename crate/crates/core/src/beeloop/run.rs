use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stream::{Dataset, TargetStream};

use super::state::{BeeState, MergeEvent};
use super::training::eval_source_holdout;

/// One metrics record per processed batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub domain_id: usize,
    pub batch_error_pct: f64,
    pub mcr_loss: Option<f64>,
    pub ent_loss: Option<f64>,
    pub trigger: bool,
    pub merge: Option<MergeEvent>,
    pub n_anchors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainError {
    pub name: String,
    pub error_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub domains: Vec<DomainError>,
    /// Unweighted mean of the per-domain errors.
    pub mean_error_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub reports: Vec<StepReport>,
    pub summary: RunSummary,
    /// Source-holdout accuracy of the student after each domain, when a
    /// holdout set was given.
    pub boundary_accuracy: Vec<f64>,
}

/// Feed the whole stream through `state`, scoring each batch's committed
/// predictions against its hidden labels only after they are returned.
/// `sink` receives every report as soon as it exists.
pub fn run(
    state: &mut BeeState,
    stream: &TargetStream,
    holdout: Option<&Dataset>,
    mut sink: impl FnMut(&StepReport) -> Result<()>,
) -> Result<RunOutput> {
    let names = stream.domain_names();
    let mut wrong = vec![0usize; names.len()];
    let mut seen = vec![0usize; names.len()];
    let mut reports = Vec::with_capacity(stream.num_batches());
    let mut boundary_accuracy = Vec::new();
    let mut batches = stream.batches().peekable();
    while let Some(batch) = batches.next() {
        let (x, hidden) = batch.split();
        let (probs, out) = state.process_batch(&x)?;
        let errors = probs
            .argmax_rows()
            .iter()
            .zip(&hidden.labels)
            .filter(|(p, l)| **p != **l as usize)
            .count();
        wrong[hidden.domain] += errors;
        seen[hidden.domain] += hidden.labels.len();
        let report = StepReport {
            step: out.step,
            domain_id: hidden.domain,
            batch_error_pct: 100.0 * errors as f64 / hidden.labels.len() as f64,
            mcr_loss: out.consistency_loss,
            ent_loss: out.entropy_loss,
            trigger: out.trigger,
            merge: out.merge,
            n_anchors: out.n_anchors,
        };
        sink(&report)?;
        reports.push(report);
        let at_boundary = batches.peek().map_or(true, |b| b.hidden.domain != hidden.domain);
        if at_boundary {
            if let Some(h) = holdout {
                boundary_accuracy.push(eval_source_holdout(state.network(), state.student(), h)?);
            }
        }
    }
    let domains: Vec<DomainError> = names
        .iter()
        .zip(wrong.iter().zip(&seen))
        .filter(|(_, (_, &n))| n > 0)
        .map(|(name, (&w, &n))| DomainError {
            name: name.clone(),
            error_pct: 100.0 * w as f64 / n as f64,
        })
        .collect();
    let mean_error_pct = domains.iter().map(|d| d.error_pct).sum::<f64>() / domains.len().max(1) as f64;
    Ok(RunOutput {
        reports,
        summary: RunSummary {
            domains,
            mean_error_pct,
        },
        boundary_accuracy,
    })
}
