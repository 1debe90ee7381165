use serde::{Deserialize, Serialize};

use super::entropy::entropy_series;
use crate::error::MopError;
use crate::model::Episode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MopConfig {
    /// Calls per window.
    pub window: usize,
    /// Level threshold in bits.
    pub theta: f64,
    /// Required rise over one window span, in bits.
    pub delta: f64,
}

impl Default for MopConfig {
    fn default() -> Self {
        MopConfig {
            window: 5,
            theta: 1.711,
            delta: 0.0,
        }
    }
}

impl MopConfig {
    pub fn validate(&self) -> Result<(), MopError> {
        if self.window < 2 {
            return Err(MopError::Config(format!("window must be at least 2, got {}", self.window)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(MopError::Config(format!("theta must be a nonnegative number, got {}", self.theta)));
        }
        if !self.delta.is_finite() {
            return Err(MopError::Config(format!("delta must be finite, got {}", self.delta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MopResult {
    pub episode_id: String,
    /// First step meeting both triggers.
    pub onset_step: Option<u32>,
    /// Fewer than two windows of calls, so no step was eligible.
    pub too_short: bool,
    pub max_entropy: f64,
    pub entropy_series: Vec<(u32, f64)>,
}

/// Earliest step `t ≥ 2w` with `H(t) > θ` and `H(t) − H(t−w) > δ`.
///
/// `series` is indexed by step as produced by [`entropy_series`], so entry
/// `t − w` holds `H(t)`.
pub fn find_onset(series: &[(u32, f64)], config: &MopConfig) -> Option<u32> {
    let w = config.window;
    (w..series.len())
        .find(|&i| {
            let h = series[i].1;
            h > config.theta && h - series[i - w].1 > config.delta
        })
        .map(|i| series[i].0)
}

/// Runs detection over a sequence of tool names.
pub fn detect_mop(tools: &[&str], config: &MopConfig) -> Result<(Option<u32>, bool, Vec<(u32, f64)>), MopError> {
    config.validate()?;
    let series = entropy_series(tools, config.window);
    let too_short = tools.len() < 2 * config.window;
    let onset = if too_short { None } else { find_onset(&series, config) };
    Ok((onset, too_short, series))
}

pub fn detect_episode(episode: &Episode, config: &MopConfig) -> Result<MopResult, MopError> {
    let (onset_step, too_short, series) = detect_mop(&episode.tools(), config)?;
    Ok(MopResult {
        episode_id: episode.episode_id.clone(),
        onset_step,
        too_short,
        max_entropy: series.iter().map(|p| p.1).fold(0.0, f64::max),
        entropy_series: series,
    })
}
