use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ci::Interval;
use crate::error::MetricError;
use crate::stats::{quantile_sorted, substream};

/// Resamples are rejected as a whole when the statistic is undefined on more
/// than this fraction of them.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.20;

pub const MIN_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            resamples: 10_000,
            level: 0.95,
            seed: 0,
        }
    }
}

/// A percentile interval and how many resamples it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapInterval {
    pub interval: Interval,
    pub valid: usize,
    pub degenerate: usize,
}

/// Generator for resample `index`, reproducible on its own regardless of scheduling.
pub fn resample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    substream(seed, index)
}

/// Percentile bootstrap over independently resampled strata.
///
/// Each stratum is resampled with replacement to its own size. The statistic
/// returns `None` where it is undefined (for example a zero denominator).
pub fn bootstrap_ci<T, F>(strata: &[&[T]], statistic: F, config: &BootstrapConfig) -> Result<BootstrapInterval, MetricError>
where
    T: Clone + Send + Sync,
    F: Fn(&[Vec<T>]) -> Option<f64> + Sync,
{
    if config.resamples < MIN_RESAMPLES {
        return Err(MetricError::InvalidArgument(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {}",
            config.resamples
        )));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(MetricError::InvalidArgument(format!("confidence level {} outside (0, 1)", config.level)));
    }
    if strata.iter().any(|s| s.is_empty()) {
        return Err(MetricError::Empty);
    }
    let draws: Vec<Option<f64>> = (0..config.resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = resample_rng(config.seed, b);
            let sample: Vec<Vec<T>> = strata
                .iter()
                .map(|s| (0..s.len()).map(|_| s[rng.random_range(0..s.len())].clone()).collect())
                .collect();
            statistic(&sample).filter(|v| v.is_finite())
        })
        .collect();
    let mut values: Vec<f64> = draws.into_iter().flatten().collect();
    let degenerate = config.resamples - values.len();
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * config.resamples as f64 {
        return Err(MetricError::DegenerateResamples {
            failed: degenerate,
            total: config.resamples,
        });
    }
    values.sort_by(f64::total_cmp);
    let alpha = 1.0 - config.level;
    Ok(BootstrapInterval {
        interval: Interval {
            low: quantile_sorted(&values, alpha / 2.0),
            high: quantile_sorted(&values, 1.0 - alpha / 2.0),
        },
        valid: values.len(),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_statistic_gives_zero_width() {
        let xs = [1.0, 2.0, 3.0];
        let r = bootstrap_ci(&[&xs[..]], |_| Some(0.7), &BootstrapConfig::default()).unwrap();
        assert_eq!(r.interval, Interval { low: 0.7, high: 0.7 });
    }

    #[test]
    fn too_few_resamples() {
        let cfg = BootstrapConfig {
            resamples: 999,
            ..Default::default()
        };
        assert!(bootstrap_ci(&[&[1.0][..]], |_| Some(0.0), &cfg).is_err());
    }

    #[test]
    fn mostly_degenerate_is_an_error() {
        let xs = [0.0, 1.0];
        let err = bootstrap_ci(
            &[&xs[..]],
            |s| {
                let m = s[0].iter().sum::<f64>() / 2.0;
                (m == 0.5).then_some(m)
            },
            &BootstrapConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, MetricError::DegenerateResamples { .. }));
        assert!(err.to_string().contains('%'));
    }
}
