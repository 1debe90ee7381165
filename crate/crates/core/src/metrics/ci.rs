use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::stats::z_for_level;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        (self.high - self.low) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Interval method for a binomial proportion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Wald,
    Wilson,
}

impl fmt::Display for CiMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CiMethod::Wald => "wald",
            CiMethod::Wilson => "wilson",
        })
    }
}

impl FromStr for CiMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wald" => Ok(CiMethod::Wald),
            "wilson" => Ok(CiMethod::Wilson),
            other => Err(format!("unknown interval method {other:?}")),
        }
    }
}

fn check(p_hat: f64, n: usize, level: f64) -> Result<(), MetricError> {
    if n == 0 {
        return Err(MetricError::InvalidArgument("n must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(MetricError::InvalidArgument(format!("proportion {p_hat} outside [0, 1]")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricError::InvalidArgument(format!("confidence level {level} outside (0, 1)")));
    }
    Ok(())
}

/// Normal-approximation interval `p̂ ± z·sqrt(p̂(1−p̂)/n)`, clamped to [0, 1].
pub fn wald_interval(p_hat: f64, n: usize, level: f64) -> Result<Interval, MetricError> {
    check(p_hat, n, level)?;
    let half = z_for_level(level) * (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    Ok(Interval {
        low: (p_hat - half).max(0.0),
        high: (p_hat + half).min(1.0),
    })
}

pub fn wald_ci(successes: usize, n: usize, level: f64) -> Result<Interval, MetricError> {
    if successes > n {
        return Err(MetricError::InvalidArgument(format!("{successes} successes out of {n}")));
    }
    wald_interval(successes as f64 / n.max(1) as f64, n, level)
}

/// Wilson score interval.
pub fn wilson_interval(p_hat: f64, n: usize, level: f64) -> Result<Interval, MetricError> {
    check(p_hat, n, level)?;
    let z = z_for_level(level);
    let n = n as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(Interval {
        low: (centre - half).max(0.0),
        high: (centre + half).min(1.0),
    })
}

pub fn proportion_interval(method: CiMethod, p_hat: f64, n: usize, level: f64) -> Result<Interval, MetricError> {
    match method {
        CiMethod::Wald => wald_interval(p_hat, n, level),
        CiMethod::Wilson => wilson_interval(p_hat, n, level),
    }
}
