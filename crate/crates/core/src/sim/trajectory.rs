use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::steps::episode_rng;
use crate::error::SimError;
use crate::model::ToolStep;

/// Shortest trajectory the generators produce: two default MOP windows.
pub const MIN_TRAJECTORY_LEN: usize = 10;

/// Shortest phase in a coherent sequence. With windows of 5 calls this caps
/// window entropy at that of counts {1, 3, 1}, about 1.371 bits.
pub const MIN_PHASE_LEN: usize = 3;

pub fn default_tool_pool() -> Vec<String> {
    [
        "read_file",
        "write_file",
        "list_directory",
        "run_command",
        "web_search",
        "fetch_url",
        "finish",
    ]
    .map(String::from)
    .to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// One tool with fixed arguments throughout.
    Rote,
    /// Runs of a single tool, each at least [`MIN_PHASE_LEN`] long.
    Coherent,
    /// Coherent up to `spiral_start`, uniform draws over the pool afterwards.
    Spiral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryProfile {
    pub kind: ProfileKind,
    pub tool_pool: Vec<String>,
    /// Phase lengths cycled in order; empty draws each from 3..=6.
    pub phase_lengths: Vec<usize>,
    /// Last coherent step of a spiral.
    pub spiral_start: usize,
}

impl TrajectoryProfile {
    pub fn rote() -> TrajectoryProfile {
        TrajectoryProfile {
            kind: ProfileKind::Rote,
            tool_pool: default_tool_pool(),
            phase_lengths: Vec::new(),
            spiral_start: 0,
        }
    }

    pub fn coherent() -> TrajectoryProfile {
        TrajectoryProfile {
            kind: ProfileKind::Coherent,
            ..TrajectoryProfile::rote()
        }
    }

    pub fn spiral(spiral_start: usize) -> TrajectoryProfile {
        TrajectoryProfile {
            kind: ProfileKind::Spiral,
            spiral_start,
            ..TrajectoryProfile::rote()
        }
    }

    fn validate(&self, length: usize) -> Result<(), SimError> {
        if length < MIN_TRAJECTORY_LEN {
            return Err(SimError::Profile(format!(
                "length {length} below the minimum of {MIN_TRAJECTORY_LEN}"
            )));
        }
        let needed = if self.kind == ProfileKind::Rote { 1 } else { 2 };
        if self.tool_pool.len() < needed {
            return Err(SimError::Profile(format!("tool pool needs at least {needed} tools")));
        }
        if let Some(&p) = self.phase_lengths.iter().find(|&&p| p < MIN_PHASE_LEN) {
            return Err(SimError::Profile(format!("phase length {p} below {MIN_PHASE_LEN}")));
        }
        if self.kind == ProfileKind::Spiral && !(1..length).contains(&self.spiral_start) {
            return Err(SimError::Profile(format!(
                "spiral_start {} must be in 1..{length}",
                self.spiral_start
            )));
        }
        Ok(())
    }
}

/// Tool names of a coherent sequence: phases of one tool, consecutive phases differ.
pub(crate) fn coherent_tools<'a>(pool: &'a [String], phase_lengths: &[usize], length: usize, rng: &mut ChaCha8Rng) -> Vec<&'a str> {
    let mut tools = Vec::with_capacity(length);
    let mut previous: Option<usize> = None;
    let mut phase = 0;
    while tools.len() < length {
        let len = if phase_lengths.is_empty() {
            rng.random_range(MIN_PHASE_LEN..=6)
        } else {
            phase_lengths[phase % phase_lengths.len()]
        };
        let mut pick = rng.random_range(0..pool.len() - usize::from(previous.is_some()));
        if let Some(p) = previous {
            if pick >= p {
                pick += 1;
            }
        }
        tools.extend(std::iter::repeat_n(pool[pick].as_str(), len));
        previous = Some(pick);
        phase += 1;
    }
    tools.truncate(length);
    tools
}

/// Turns tool names into steps, with distinct arguments per step unless `fixed_args`.
pub(crate) fn to_steps(tools: &[&str], fixed_args: bool) -> Vec<ToolStep> {
    tools
        .iter()
        .enumerate()
        .map(|(i, tool)| {
            let args = if fixed_args {
                json!({ "target": "main" })
            } else {
                json!({ "target": format!("item_{}", i + 1) })
            };
            ToolStep::new(i as u32 + 1, *tool, &args)
        })
        .collect()
}

/// Generates a synthetic tool-call trajectory.
pub fn generate_trajectory(profile: &TrajectoryProfile, length: usize, seed: u64) -> Result<Vec<ToolStep>, SimError> {
    trajectory_from(profile, length, &mut episode_rng(seed, 0))
}

pub(crate) fn trajectory_from(profile: &TrajectoryProfile, length: usize, rng: &mut ChaCha8Rng) -> Result<Vec<ToolStep>, SimError> {
    profile.validate(length)?;
    let pool = &profile.tool_pool;
    Ok(match profile.kind {
        ProfileKind::Rote => to_steps(&vec![pool[0].as_str(); length], true),
        ProfileKind::Coherent => to_steps(&coherent_tools(pool, &profile.phase_lengths, length, rng), false),
        ProfileKind::Spiral => {
            let mut tools = coherent_tools(pool, &profile.phase_lengths, profile.spiral_start, rng);
            while tools.len() < length {
                tools.push(pool.choose(rng).expect("nonempty pool").as_str());
            }
            to_steps(&tools, false)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rote_is_constant() {
        let t = generate_trajectory(&TrajectoryProfile::rote(), 30, 1).unwrap();
        assert_eq!(t.len(), 30);
        assert!(t.iter().all(|s| s.tool == t[0].tool && s.args_canonical == t[0].args_canonical));
    }

    #[test]
    fn coherent_phases_have_minimum_length() {
        for seed in 0..50 {
            let t = generate_trajectory(&TrajectoryProfile::coherent(), 40, seed).unwrap();
            let tools: Vec<&str> = t.iter().map(|s| s.tool.as_str()).collect();
            let runs: Vec<usize> = tools.chunk_by(|a, b| a == b).map(<[_]>::len).collect();
            assert!(runs[..runs.len() - 1].iter().all(|&r| r >= MIN_PHASE_LEN), "{runs:?}");
        }
    }

    #[test]
    fn profile_validation() {
        assert!(generate_trajectory(&TrajectoryProfile::rote(), 9, 0).is_err());
        assert!(generate_trajectory(&TrajectoryProfile::spiral(30), 30, 0).is_err());
        let mut p = TrajectoryProfile::coherent();
        p.phase_lengths = vec![2];
        assert!(generate_trajectory(&p, 20, 0).is_err());
    }
}
