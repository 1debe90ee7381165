//! Synthetic studies that realize exact per-cell aggregates.
//!
//! GDS amounts are in twentieths (units of 0.05), the granularity of
//! [`SYNTHETIC_WEIGHTS`]: subtask weights are 2, 3, 4, 5 and 6 units.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::steps::episode_rng;
use super::study::{coherent_steps, make_episode, synthetic_task, trajectory_len, with_tokens, EpisodeParts, SyntheticStudy};
use super::trajectory::to_steps;
use crate::error::SimError;
use crate::model::{Bucket, Domain, Scaffold, ToolStep};

const UNITS: [u32; 5] = [2, 3, 4, 5, 6];

/// Earliest step a meltdown can be placed at with windows of 5 calls.
pub const MIN_ONSET: u32 = 10;

/// Episode counts and GDS totals for one (model, scaffold, bucket, domain) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellTarget {
    pub model_id: String,
    pub scaffold: Scaffold,
    pub bucket: Bucket,
    pub domain: Domain,
    pub passes: u32,
    /// Failing episodes that missed the first subtask (GDS 0).
    pub early_failures: u32,
    /// Total GDS shortfall below 1 over passing episodes, in twentieths.
    pub pass_deficit: u32,
    /// Total GDS over the remaining failing episodes, in twentieths.
    pub partial_units: u32,
}

/// Meltdown events to plant in one (model, scaffold, bucket).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeltdownTarget {
    pub model_id: String,
    pub scaffold: Scaffold,
    pub bucket: Bucket,
    pub events: u32,
    /// Lower-median onset step of the planted events.
    pub median_onset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlueprintOptions {
    pub tasks_per_cell: usize,
    pub repeats: u32,
    pub seed: u64,
}

impl Default for BlueprintOptions {
    fn default() -> Self {
        BlueprintOptions {
            tasks_per_cell: 33,
            repeats: 3,
            seed: 0,
        }
    }
}

fn field<T: FromStr>(cols: &[&str], i: usize, line: usize) -> Result<T, SimError>
where
    T::Err: std::fmt::Display,
{
    let raw = cols
        .get(i)
        .ok_or_else(|| SimError::Profile(format!("line {line}: missing column {}", i + 1)))?;
    raw.trim()
        .parse()
        .map_err(|e| SimError::Profile(format!("line {line}: column {}: {e}", i + 1)))
}

/// Parses `model,scaffold,bucket,domain,passes,early_failures,pass_deficit,partial_units`
/// rows; the first line is a header.
pub fn parse_cell_targets(text: &str) -> Result<Vec<CellTarget>, SimError> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let c: Vec<&str> = l.split(',').collect();
            Ok(CellTarget {
                model_id: c[0].trim().to_string(),
                scaffold: field(&c, 1, i + 1)?,
                bucket: field(&c, 2, i + 1)?,
                domain: field(&c, 3, i + 1)?,
                passes: field(&c, 4, i + 1)?,
                early_failures: field(&c, 5, i + 1)?,
                pass_deficit: field(&c, 6, i + 1)?,
                partial_units: field(&c, 7, i + 1)?,
            })
        })
        .collect()
}

/// Parses `model,scaffold,bucket,events,median_onset` rows after a header line.
pub fn parse_meltdown_targets(text: &str) -> Result<Vec<MeltdownTarget>, SimError> {
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let c: Vec<&str> = l.split(',').collect();
            Ok(MeltdownTarget {
                model_id: c[0].trim().to_string(),
                scaffold: field(&c, 1, i + 1)?,
                bucket: field(&c, 2, i + 1)?,
                events: field(&c, 3, i + 1)?,
                median_onset: field(&c, 4, i + 1)?,
            })
        })
        .collect()
}

/// Splits `total` into `parts` near-equal integers, larger ones first.
fn spread(total: u32, parts: u32) -> Vec<u32> {
    (0..parts)
        .map(|i| total / parts + u32::from(i < total % parts))
        .collect()
}

/// Subtask outcomes (first subtask always done) whose weights sum to `units`,
/// leaving at least one later subtask undone.
fn outcomes_with_units(units: u32) -> Option<Vec<bool>> {
    (0u32..16).find_map(|mask| {
        let rest: u32 = (0..4).filter(|b| mask & (1 << b) != 0).map(|b| UNITS[b + 1]).sum();
        (mask != 15 && UNITS[0] + rest == units)
            .then(|| std::iter::once(true).chain((0..4).map(|b| mask & (1 << b) != 0)).collect())
    })
}

/// Passing outcomes missing `deficit` units from later subtasks only.
fn outcomes_with_deficit(deficit: u32) -> Option<Vec<bool>> {
    if deficit == 0 {
        return Some(vec![true; 5]);
    }
    outcomes_with_units(20 - deficit).filter(|o| o.iter().filter(|&&d| !d).count() <= 2)
}

enum Slot {
    Pass(u32),
    Early,
    Partial(u32),
}

fn cell_slots(c: &CellTarget, size: u32) -> Result<Vec<Slot>, SimError> {
    let bad = |why: &str| {
        SimError::Infeasible(format!(
            "{}/{}/{}/{}: {why}",
            c.model_id, c.scaffold, c.bucket, c.domain
        ))
    };
    if c.passes + c.early_failures > size {
        return Err(bad("more passes and early failures than episodes"));
    }
    let partial = size - c.passes - c.early_failures;
    let chunks = c.pass_deficit.div_ceil(8);
    if chunks > c.passes || (1..3).contains(&c.pass_deficit) {
        return Err(bad("pass deficit not realizable"));
    }
    if c.partial_units < 5 * partial || c.partial_units > 17 * partial {
        return Err(bad("partial credit outside 0.25..=0.85 per failing episode"));
    }
    let mut deficits = spread(c.pass_deficit, chunks);
    deficits.resize(c.passes as usize, 0);
    let mut slots: Vec<Slot> = deficits.into_iter().map(Slot::Pass).collect();
    slots.extend((0..c.early_failures).map(|_| Slot::Early));
    if partial > 0 {
        slots.extend(spread(c.partial_units, partial).into_iter().map(Slot::Partial));
    }
    Ok(slots)
}

/// A trajectory whose first onset under (w = 5, θ = 1.711, δ = 0) is exactly
/// `onset`: one tool through `onset − 4`, then four calls that raise window
/// entropy to about 1.92 bits only at `onset`.
pub fn meltdown_steps(onset: u32, len: usize) -> Vec<ToolStep> {
    let onset = onset as usize;
    let mut tools = vec!["read_file"; onset - 4];
    tools.extend(["run_command", "web_search", "run_command", "fetch_url"]);
    let tail = ["list_directory", "write_file", "finish", "web_search", "read_file"];
    let mut i = 0;
    while tools.len() < len.max(onset + 3) {
        tools.push(tail[i % tail.len()]);
        i += 1;
    }
    with_tokens(to_steps(&tools, false))
}

/// Onsets whose lower median is `median`, spread symmetrically when possible.
fn planted_onsets(events: u32, median: u32) -> Vec<u32> {
    let mut onsets = Vec::with_capacity(events as usize);
    let centre = if events.is_multiple_of(2) { 2 } else { 1 };
    for i in 0..events {
        if i < centre {
            onsets.push(median);
            continue;
        }
        let j = 1 + ((i - centre) / 2) % 3;
        if median < MIN_ONSET + j {
            onsets.push(median);
        } else if (i - centre) % 2 == 0 {
            onsets.push(median - j);
        } else {
            onsets.push(median + j);
        }
    }
    onsets
}

/// Builds a registry and episode log realizing every cell target exactly.
///
/// Each cell gets `tasks_per_cell` tasks with `repeats` repeats; which episodes
/// pass is a seeded shuffle within the cell. Meltdown targets are planted
/// across the three domains of their bucket; every other episode gets a
/// coherent trajectory that cannot trigger detection at θ = 1.711.
pub fn build_study(cells: &[CellTarget], meltdowns: &[MeltdownTarget], options: &BlueprintOptions) -> Result<SyntheticStudy, SimError> {
    let size = options.tasks_per_cell as u32 * options.repeats;
    let mut tasks = BTreeMap::new();
    for c in cells {
        for n in 1..=options.tasks_per_cell {
            let t = synthetic_task(c.domain, c.bucket, n);
            tasks.entry((c.bucket, c.domain, n)).or_insert(t);
        }
    }
    let mut plans = Vec::with_capacity(cells.len());
    for (ci, c) in cells.iter().enumerate() {
        let mut slots = cell_slots(c, size)?;
        slots.shuffle(&mut episode_rng(options.seed, ci as u64));
        plans.push(slots);
    }

    // Meltdown onsets by (model, scaffold, bucket), consumed across domains in cell order.
    let mut onsets: BTreeMap<(&str, Scaffold, Bucket), Vec<u32>> = BTreeMap::new();
    for m in meltdowns {
        if m.events > 0 && m.median_onset < MIN_ONSET {
            return Err(SimError::Infeasible(format!("median onset {} below {MIN_ONSET}", m.median_onset)));
        }
        onsets
            .entry((m.model_id.as_str(), m.scaffold, m.bucket))
            .or_default()
            .extend(planted_onsets(m.events, m.median_onset));
    }
    let mut assigned: Vec<Vec<Option<u32>>> = plans.iter().map(|p| vec![None; p.len()]).collect();
    let mut cells_left: BTreeMap<(&str, Scaffold, Bucket), usize> = BTreeMap::new();
    for c in cells {
        *cells_left.entry((c.model_id.as_str(), c.scaffold, c.bucket)).or_default() += 1;
    }
    for (ci, c) in cells.iter().enumerate() {
        let k = (c.model_id.as_str(), c.scaffold, c.bucket);
        let left = cells_left.get_mut(&k).expect("counted above");
        if let Some(queue) = onsets.get_mut(&k) {
            // Events split evenly over the bucket's domain cells, earlier cells take the remainder.
            let share = queue.len().div_ceil(*left);
            for (k, t) in queue.drain(..share).enumerate() {
                assigned[ci][k * 7 % size as usize] = Some(t);
            }
        }
        *left -= 1;
    }
    if let Some((k, q)) = onsets.iter().find(|(_, q)| !q.is_empty()) {
        return Err(SimError::Infeasible(format!(
            "{} meltdown events for {}/{}/{} have no cell",
            q.len(),
            k.0,
            k.1,
            k.2
        )));
    }

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|ci| (0..size as usize).map(move |s| (ci, s)))
        .collect();
    let episodes = jobs
        .par_iter()
        .map(|&(ci, s)| {
            let c = &cells[ci];
            let task_n = s / options.repeats as usize + 1;
            let repeat = (s % options.repeats as usize) as u32 + 1;
            let task = &tasks[&(c.bucket, c.domain, task_n)];
            let (outcomes, passed) = match plans[ci][s] {
                Slot::Pass(d) => (outcomes_with_deficit(d).expect("checked deficit"), true),
                Slot::Early => (vec![false; 5], false),
                Slot::Partial(u) => (outcomes_with_units(u).expect("checked units"), false),
            };
            let len = trajectory_len(c.bucket);
            let steps = match assigned[ci][s] {
                Some(onset) => meltdown_steps(onset, len),
                None => coherent_steps(len, &mut episode_rng(options.seed ^ 0x5eed, (ci * size as usize + s) as u64)),
            };
            make_episode(EpisodeParts {
                task,
                model_id: &c.model_id,
                scaffold: c.scaffold,
                repeat,
                outcomes,
                passed,
                steps,
            })
        })
        .collect();
    Ok(SyntheticStudy {
        tasks: tasks.into_values().collect(),
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mop::{detect_mop, MopConfig};

    #[test]
    fn every_partial_amount_is_realizable() {
        for u in 5..=17 {
            let o = outcomes_with_units(u).unwrap();
            assert!(o[0] && o.iter().any(|&d| !d));
            let got: u32 = o.iter().zip(UNITS).filter(|(&d, _)| d).map(|(_, w)| w).sum();
            assert_eq!(got, u);
        }
        for d in 3..=8 {
            let o = outcomes_with_deficit(d).unwrap();
            assert!(o[0]);
        }
        assert!(outcomes_with_deficit(2).is_none());
    }

    #[test]
    fn planted_meltdowns_fire_exactly_at_onset() {
        for onset in 10..40 {
            let steps = meltdown_steps(onset, 22);
            let tools: Vec<&str> = steps.iter().map(|s| s.tool.as_str()).collect();
            assert_eq!(detect_mop(&tools, &MopConfig::default()).unwrap().0, Some(onset));
        }
    }

    #[test]
    fn planted_onsets_keep_lower_median() {
        for events in 1..60 {
            for median in [10, 11, 17, 34] {
                let mut o = planted_onsets(events, median);
                o.sort_unstable();
                assert_eq!(o[(o.len() - 1) / 2], median, "{events} {median}");
                assert!(o.iter().all(|&t| t >= MIN_ONSET));
            }
        }
    }

    #[test]
    fn spread_is_balanced() {
        assert_eq!(spread(10, 3), vec![4, 3, 3]);
        assert_eq!(spread(0, 2), vec![0, 0]);
    }
}
