use std::ops::RangeInclusive;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::stats::substream;

/// Per-step failure process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// Independent Bernoulli(ε) failures.
    Iid,
    /// A per-episode failure rate q ~ Beta with mean ε and variance ρε²,
    /// then independent Bernoulli(q) steps; any two steps have covariance ρε².
    Exchangeable,
    /// Independent failures with rate ε(1 + γt) at step t = 1..T.
    Hazard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ErrorModel,
    pub epsilon: f64,
    pub rho: f64,
    pub hazard_gamma: f64,
    pub horizon: usize,
    pub episodes: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn iid(epsilon: f64, horizon: usize, episodes: usize, seed: u64) -> SimConfig {
        SimConfig {
            model: ErrorModel::Iid,
            epsilon,
            rho: 0.0,
            hazard_gamma: 0.0,
            horizon,
            episodes,
            seed,
        }
    }

    pub fn exchangeable(epsilon: f64, rho: f64, horizon: usize, episodes: usize, seed: u64) -> SimConfig {
        SimConfig {
            model: ErrorModel::Exchangeable,
            rho,
            ..SimConfig::iid(epsilon, horizon, episodes, seed)
        }
    }

    pub fn hazard(epsilon: f64, gamma: f64, horizon: usize, episodes: usize, seed: u64) -> SimConfig {
        SimConfig {
            model: ErrorModel::Hazard,
            hazard_gamma: gamma,
            ..SimConfig::iid(epsilon, horizon, episodes, seed)
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let eps = self.epsilon;
        if !(0.0..=1.0).contains(&eps) {
            return Err(SimError::Infeasible(format!("epsilon {eps} outside [0, 1]")));
        }
        if self.horizon == 0 || self.episodes == 0 {
            return Err(SimError::Infeasible("horizon and episodes must be positive".into()));
        }
        match self.model {
            ErrorModel::Iid => {}
            ErrorModel::Exchangeable => {
                if !(0.0..=1.0).contains(&self.rho) {
                    return Err(SimError::Infeasible(format!("rho {} outside [0, 1]", self.rho)));
                }
                if self.rho * eps * eps > eps * (1.0 - eps) + 1e-15 {
                    return Err(SimError::Infeasible(format!(
                        "latent variance rho*eps^2 = {} exceeds eps(1-eps) = {}",
                        self.rho * eps * eps,
                        eps * (1.0 - eps)
                    )));
                }
            }
            ErrorModel::Hazard => {
                if !(self.hazard_gamma >= 0.0) {
                    return Err(SimError::Infeasible(format!("gamma {} is negative", self.hazard_gamma)));
                }
                let last = eps * (1.0 + self.hazard_gamma * self.horizon as f64);
                if last > 1.0 {
                    return Err(SimError::Infeasible(format!("step {} failure rate {last} exceeds 1", self.horizon)));
                }
            }
        }
        Ok(())
    }
}

/// Generator for episode `index` of a run seeded with `seed`.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    substream(seed, index)
}

enum Latent {
    Fixed(f64),
    Beta(Beta<f64>),
}

fn latent(config: &SimConfig) -> Result<Latent, SimError> {
    let eps = config.epsilon;
    if config.model != ErrorModel::Exchangeable || config.rho == 0.0 || eps == 0.0 || eps == 1.0 {
        return Ok(Latent::Fixed(eps));
    }
    // Beta(a, b) with a + b = s has variance eps(1-eps)/(s+1).
    let s = (1.0 - eps) / (config.rho * eps) - 1.0;
    if s <= 1e-12 {
        // Boundary: all variance is between episodes, q is 0 or 1.
        return Ok(Latent::Fixed(f64::NAN));
    }
    Beta::new(eps * s, (1.0 - eps) * s)
        .map(Latent::Beta)
        .map_err(|e| SimError::Infeasible(e.to_string()))
}

/// Step failure indicators (`true` = failed) for every episode.
pub fn simulate_steps(config: &SimConfig) -> Result<Vec<Vec<bool>>, SimError> {
    config.validate()?;
    let latent = latent(config)?;
    let eps = config.epsilon;
    Ok((0..config.episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = episode_rng(config.seed, i);
            let q = match &latent {
                Latent::Fixed(q) if q.is_nan() => {
                    if rng.random_bool(eps) {
                        1.0
                    } else {
                        0.0
                    }
                }
                Latent::Fixed(q) => *q,
                Latent::Beta(beta) => beta.sample(&mut rng),
            };
            (1..=config.horizon)
                .map(|t| {
                    let p = match config.model {
                        ErrorModel::Hazard => eps * (1.0 + config.hazard_gamma * t as f64),
                        _ => q,
                    };
                    rng.random_bool(p.clamp(0.0, 1.0))
                })
                .collect()
        })
        .collect())
}

/// Failed-step count per episode.
pub fn failure_counts(steps: &[Vec<bool>]) -> Vec<usize> {
    steps.iter().map(|e| e.iter().filter(|&&f| f).count()).collect()
}

/// `Tε(1−ε) + T(T−1)ρε²`.
pub fn predicted_failcount_variance(epsilon: f64, rho: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    t * epsilon * (1.0 - epsilon) + t * (t - 1.0) * rho * epsilon * epsilon
}

/// `exp(−εT − ρε²T(T−1)/2)`, reported for comparison, not as a guarantee.
pub fn predicted_success_bound(epsilon: f64, rho: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    (-epsilon * t - rho * epsilon * epsilon * t * (t - 1.0) / 2.0).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovCurve {
    pub points: Vec<(usize, f64)>,
    pub argmax: usize,
}

/// `εT(1−ε)^(T−1)` over a range of horizons, with its discrete argmax.
///
/// When 1/ε is an integer the curve takes equal values at 1/ε − 1 and 1/ε;
/// values within a relative 1e-12 count as tied and the larger horizon wins.
pub fn markov_variance_curve(epsilon: f64, horizons: RangeInclusive<usize>) -> Result<MarkovCurve, SimError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SimError::Infeasible(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if horizons.is_empty() || *horizons.start() == 0 {
        return Err(SimError::Infeasible("horizon range must be nonempty and start at 1 or more".into()));
    }
    let points: Vec<(usize, f64)> = horizons
        .map(|t| (t, epsilon * t as f64 * (1.0 - epsilon).powi(t as i32 - 1)))
        .collect();
    let argmax = points
        .iter()
        .fold(points[0], |best, &p| if p.1 >= best.1 * (1.0 - 1e-12) { p } else { best })
        .0;
    Ok(MarkovCurve { points, argmax })
}
