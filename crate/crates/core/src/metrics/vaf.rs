use std::collections::BTreeSet;

use serde::Serialize;

use super::bootstrap::{bootstrap_ci, BootstrapConfig};
use super::pass::TaskOutcomeGroup;
use crate::error::MetricError;
use crate::model::Bucket;
use crate::stats::pop_variance;

pub fn default_numerator() -> BTreeSet<Bucket> {
    [Bucket::Long, Bucket::VeryLong].into()
}

pub fn default_denominator() -> BTreeSet<Bucket> {
    [Bucket::Short, Bucket::Medium].into()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VafResult {
    pub model_id: String,
    pub vaf: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub numerator_buckets: Vec<Bucket>,
    pub denominator_buckets: Vec<Bucket>,
    pub n_num_tasks: usize,
    pub n_den_tasks: usize,
    pub resamples_degenerate: usize,
}

/// Ratio of population variances, numerator over denominator.
pub fn variance_ratio(num: &[f64], den: &[f64]) -> Result<f64, MetricError> {
    for side in [num, den] {
        if side.len() < 2 {
            return Err(MetricError::TooFewPoints {
                needed: 2,
                got: side.len(),
            });
        }
    }
    let d = pop_variance(den);
    if d <= 0.0 {
        return Err(MetricError::DegenerateVariance);
    }
    Ok(pop_variance(num) / d)
}

/// Per-task pass@1 (fraction of that task's repeats passing) split into the two bucket sets.
pub fn split_task_pass1(
    groups: &[TaskOutcomeGroup],
    numerator: &BTreeSet<Bucket>,
    denominator: &BTreeSet<Bucket>,
) -> Result<(Vec<f64>, Vec<f64>), MetricError> {
    if numerator.is_empty() || denominator.is_empty() {
        return Err(MetricError::InvalidArgument("VAF bucket sets must be nonempty".into()));
    }
    if !numerator.is_disjoint(denominator) {
        return Err(MetricError::InvalidArgument("VAF bucket sets overlap".into()));
    }
    let pick = |set: &BTreeSet<Bucket>| {
        groups
            .iter()
            .filter(|g| set.contains(&g.bucket) && g.k() > 0)
            .map(TaskOutcomeGroup::pass_fraction)
            .collect::<Vec<_>>()
    };
    Ok((pick(numerator), pick(denominator)))
}

/// Point estimate of the variance amplification factor over task-level pass@1.
pub fn vaf(
    groups: &[TaskOutcomeGroup],
    numerator: &BTreeSet<Bucket>,
    denominator: &BTreeSet<Bucket>,
) -> Result<f64, MetricError> {
    let (num, den) = split_task_pass1(groups, numerator, denominator)?;
    variance_ratio(&num, &den)
}

/// VAF for one model with a percentile bootstrap interval; numerator and
/// denominator tasks are resampled independently.
pub fn vaf_with_ci(
    model_id: &str,
    groups: &[TaskOutcomeGroup],
    numerator: &BTreeSet<Bucket>,
    denominator: &BTreeSet<Bucket>,
    config: &BootstrapConfig,
) -> Result<VafResult, MetricError> {
    let (num, den) = split_task_pass1(groups, numerator, denominator)?;
    let point = variance_ratio(&num, &den)?;
    let boot = bootstrap_ci(&[&num[..], &den[..]], |s| variance_ratio(&s[0], &s[1]).ok(), config)?;
    Ok(VafResult {
        model_id: model_id.to_string(),
        vaf: point,
        ci_low: boot.interval.low,
        ci_high: boot.interval.high,
        numerator_buckets: numerator.iter().copied().collect(),
        denominator_buckets: denominator.iter().copied().collect(),
        n_num_tasks: num.len(),
        n_den_tasks: den.len(),
        resamples_degenerate: boot.degenerate,
    })
}
