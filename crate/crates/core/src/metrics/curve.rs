use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ci::{proportion_interval, CiMethod};
use super::pass::{pass_at_1, pass_pow_k, TaskOutcomeGroup};
use crate::error::MetricError;
use crate::model::{Bucket, Scaffold};
use crate::stats::{mean, ols_slope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Pass1,
    PassK,
    Gds,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Pass1 => "pass1",
            Metric::PassK => "passk",
            Metric::Gds => "gds",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Value of a metric over one bucket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub value: f64,
    pub n_tasks: usize,
    pub n_episodes: usize,
    /// Present for pass@1 only.
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

/// Reliability decay curve: bucket to metric value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCurve {
    pub metric: Metric,
    pub points: BTreeMap<Bucket, CurvePoint>,
    /// Some pass^k point mixed repeat counts.
    pub ragged: bool,
}

impl MetricCurve {
    pub fn value(&self, bucket: Bucket) -> Option<f64> {
        self.points.get(&bucket).map(|p| p.value)
    }

    /// Builds a curve from plain values, without counts or intervals.
    pub fn from_values(metric: Metric, values: impl IntoIterator<Item = (Bucket, f64)>) -> MetricCurve {
        MetricCurve {
            metric,
            points: values
                .into_iter()
                .map(|(b, value)| {
                    (
                        b,
                        CurvePoint {
                            value,
                            n_tasks: 0,
                            n_episodes: 0,
                            ci_low: None,
                            ci_high: None,
                        },
                    )
                })
                .collect(),
            ragged: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveOptions {
    pub ci: CiMethod,
    pub level: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            ci: CiMethod::Wald,
            level: 0.95,
        }
    }
}

/// Curve for one (model, scaffold) population. Interval sample size is the
/// number of tasks in the bucket.
pub fn curve(groups: &[TaskOutcomeGroup], metric: Metric, options: &CurveOptions) -> Result<MetricCurve, MetricError> {
    if groups.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut by_bucket: BTreeMap<Bucket, Vec<TaskOutcomeGroup>> = BTreeMap::new();
    for g in groups {
        by_bucket.entry(g.bucket).or_default().push(g.clone());
    }
    let mut points = BTreeMap::new();
    let mut ragged = false;
    for (bucket, gs) in by_bucket {
        let n_tasks = gs.len();
        let n_episodes = gs.iter().map(TaskOutcomeGroup::k).sum();
        let (value, ci) = match metric {
            Metric::Pass1 => {
                let p = pass_at_1(&gs)?;
                (p, Some(proportion_interval(options.ci, p, n_tasks, options.level)?))
            }
            Metric::PassK => {
                let r = pass_pow_k(&gs)?;
                ragged |= r.ragged();
                (r.value, None)
            }
            Metric::Gds => {
                let all: Vec<f64> = gs.iter().flat_map(|g| g.repeats.iter().map(|r| r.gds)).collect();
                (mean(&all), None)
            }
        };
        points.insert(
            bucket,
            CurvePoint {
                value,
                n_tasks,
                n_episodes,
                ci_low: ci.map(|c| c.low),
                ci_high: ci.map(|c| c.high),
            },
        );
    }
    Ok(MetricCurve { metric, points, ragged })
}

/// One curve per (model, scaffold).
pub fn rdc(
    groups: &[TaskOutcomeGroup],
    metric: Metric,
    options: &CurveOptions,
) -> Result<BTreeMap<(String, Scaffold), MetricCurve>, MetricError> {
    let mut split: BTreeMap<(String, Scaffold), Vec<TaskOutcomeGroup>> = BTreeMap::new();
    for g in groups {
        split.entry((g.model_id.clone(), g.scaffold)).or_default().push(g.clone());
    }
    split
        .into_iter()
        .map(|(key, gs)| Ok((key, curve(&gs, metric, options)?)))
        .collect()
}

/// Duration regressor for the decay slope.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    /// short = 1 through very_long = 4.
    #[default]
    #[serde(rename = "bucket_index_1to4")]
    BucketIndex1To4,
    /// short = 0 through very_long = 3.
    #[serde(rename = "bucket_index_0to3")]
    BucketIndex0To3,
    /// Bucket midpoints in minutes: 2.5, 17.5, 75, 150.
    HumanMinutesMidpoint,
}

impl Regressor {
    pub const ALL: [Regressor; 3] = [
        Regressor::BucketIndex1To4,
        Regressor::BucketIndex0To3,
        Regressor::HumanMinutesMidpoint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regressor::BucketIndex1To4 => "bucket_index_1to4",
            Regressor::BucketIndex0To3 => "bucket_index_0to3",
            Regressor::HumanMinutesMidpoint => "human_minutes_midpoint",
        }
    }

    pub fn x(self, bucket: Bucket) -> f64 {
        match self {
            Regressor::BucketIndex1To4 => bucket.index() as f64 + 1.0,
            Regressor::BucketIndex0To3 => bucket.index() as f64,
            Regressor::HumanMinutesMidpoint => bucket.midpoint_minutes(),
        }
    }
}

impl fmt::Display for Regressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regressor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Regressor::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown regressor {s:?}"))
    }
}

/// Reliability decay slope: least-squares slope of the curve values on the regressor.
pub fn rds(curve: &MetricCurve, regressor: Regressor) -> Result<f64, MetricError> {
    if curve.points.len() < 2 {
        return Err(MetricError::TooFewPoints {
            needed: 2,
            got: curve.points.len(),
        });
    }
    let x: Vec<f64> = curve.points.keys().map(|&b| regressor.x(b)).collect();
    let y: Vec<f64> = curve.points.values().map(|p| p.value).collect();
    ols_slope(&x, &y).ok_or(MetricError::ZeroRegressorVariance)
}
