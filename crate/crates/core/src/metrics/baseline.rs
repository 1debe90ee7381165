use std::collections::BTreeMap;

use serde::Serialize;

use super::curve::MetricCurve;
use super::pass::TaskOutcomeGroup;
use super::stratify::Cell;
use crate::error::MetricError;
use crate::model::Bucket;

/// Fraction of episodes per bucket whose first subtask was not completed.
pub fn early_failure_rate(groups: &[TaskOutcomeGroup]) -> BTreeMap<Bucket, Cell> {
    let mut counts: BTreeMap<Bucket, (usize, usize)> = BTreeMap::new();
    for g in groups {
        let c = counts.entry(g.bucket).or_default();
        c.0 += g.repeats.iter().filter(|r| r.early_failure).count();
        c.1 += g.k();
    }
    counts
        .into_iter()
        .map(|(b, (early, n))| (b, Cell { value: early as f64 / n as f64, n }))
        .collect()
}

/// Exponent applied to the short-bucket pass rate per bucket.
pub fn default_exponents() -> BTreeMap<Bucket, f64> {
    [
        (Bucket::Short, 1.0),
        (Bucket::Medium, 2.0),
        (Bucket::Long, 4.0),
        (Bucket::VeryLong, 8.0),
    ]
    .into()
}

/// The very_long exponent extrapolates past the worked examples.
pub fn exponent_is_extrapolated(bucket: Bucket) -> bool {
    bucket == Bucket::VeryLong
}

/// Geometric prediction `p_short^exponent` per bucket.
pub fn geometric_baseline(p_short: f64, exponents: &BTreeMap<Bucket, f64>) -> Result<BTreeMap<Bucket, f64>, MetricError> {
    if !(0.0..=1.0).contains(&p_short) {
        return Err(MetricError::InvalidArgument(format!("p_short {p_short} outside [0, 1]")));
    }
    if let Some((b, e)) = exponents.iter().find(|(_, &e)| !(e > 0.0)) {
        return Err(MetricError::InvalidArgument(format!("exponent {e} for {b} is not positive")));
    }
    Ok(exponents.iter().map(|(&b, &e)| (b, p_short.powf(e))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Superlinearity {
    /// predicted / observed; above 1 means decay faster than geometric.
    pub ratio: f64,
    /// Observed was zero.
    pub infinite: bool,
}

pub fn superlinearity_ratio(predicted: f64, observed: f64) -> Superlinearity {
    if observed == 0.0 {
        Superlinearity {
            ratio: f64::INFINITY,
            infinite: true,
        }
    } else {
        Superlinearity {
            ratio: predicted / observed,
            infinite: false,
        }
    }
}

/// Short minus very_long pass@1: what splitting a long task into short ones would recover.
pub fn decomposition_gain(curve: &MetricCurve) -> Result<f64, MetricError> {
    let short = curve.value(Bucket::Short).ok_or(MetricError::MissingBucket("short"))?;
    let very_long = curve.value(Bucket::VeryLong).ok_or(MetricError::MissingBucket("very_long"))?;
    Ok(short - very_long)
}
