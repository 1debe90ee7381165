use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::{canonicalize_args, Episode, ToolStep, MAX_NUDGES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardConfig {
    /// Cumulative input-token budget per episode.
    pub budget_tokens: u64,
    /// Repeats of one (tool, args) pair that count as a loop.
    pub loop_count: usize,
    /// Trailing steps searched for repeats.
    pub loop_window: usize,
    pub max_nudges: u32,
}

impl Default for GuardConfig {
    fn default() -> Self {
        GuardConfig {
            budget_tokens: 120_000,
            loop_count: 3,
            loop_window: 6,
            max_nudges: MAX_NUDGES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GuardReplay {
    pub episode_id: String,
    pub loop_trigger_step: Option<u32>,
    pub budget_trigger_step: Option<u32>,
    pub nudge_exhausted: bool,
}

/// Earliest step whose (tool, args) pair occurs at least `loop_count` times in
/// the trailing `loop_window` steps, including itself.
pub fn loop_trigger(steps: &[ToolStep], loop_count: usize, loop_window: usize) -> Option<u32> {
    let mut window: VecDeque<(&str, String)> = VecDeque::with_capacity(loop_window + 1);
    for step in steps {
        let key = (step.tool.as_str(), canonicalize_args(&step.args_canonical));
        window.push_back(key);
        if window.len() > loop_window {
            window.pop_front();
        }
        let current = window.back().expect("just pushed");
        if window.iter().filter(|k| *k == current).count() >= loop_count {
            return Some(step.index);
        }
    }
    None
}

/// Earliest step at which cumulative `tokens_in` exceeds the budget.
pub fn budget_trigger(steps: &[ToolStep], budget_tokens: u64) -> Option<u32> {
    let mut total = 0u64;
    steps.iter().find_map(|s| {
        total = total.saturating_add(s.tokens_in);
        (total > budget_tokens).then_some(s.index)
    })
}

/// Re-evaluates the harness circuit breakers against a recorded trajectory.
pub fn replay_guards(episode: &Episode, config: &GuardConfig) -> GuardReplay {
    GuardReplay {
        episode_id: episode.episode_id.clone(),
        loop_trigger_step: loop_trigger(&episode.steps, config.loop_count, config.loop_window),
        budget_trigger_step: budget_trigger(&episode.steps, config.budget_tokens),
        nudge_exhausted: episode.nudges_used >= config.max_nudges,
    }
}
