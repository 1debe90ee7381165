use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::MetricError;
use crate::model::{Bucket, Domain, EpisodeRecord, Scaffold};

/// Outcome of one repeat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Repeat {
    pub passed: bool,
    pub gds: f64,
    /// The first subtask was not completed.
    pub early_failure: bool,
}

/// All repeats of one task for one model under one scaffold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskOutcomeGroup {
    pub task_id: String,
    pub model_id: String,
    pub scaffold: Scaffold,
    pub bucket: Bucket,
    pub domain: Domain,
    pub repeats: Vec<Repeat>,
}

impl TaskOutcomeGroup {
    pub fn k(&self) -> usize {
        self.repeats.len()
    }

    pub fn passes(&self) -> usize {
        self.repeats.iter().filter(|r| r.passed).count()
    }

    /// Fraction of this task's repeats that passed.
    pub fn pass_fraction(&self) -> f64 {
        self.passes() as f64 / self.k() as f64
    }

    pub fn all_passed(&self) -> bool {
        self.repeats.iter().all(|r| r.passed)
    }
}

/// Groups records by (model, scaffold, task), ordered by that key, with
/// repeats ordered by repeat index.
pub fn group_by_task(records: &[EpisodeRecord<'_>]) -> Vec<TaskOutcomeGroup> {
    let mut map: BTreeMap<(&str, Scaffold, &str), Vec<&EpisodeRecord<'_>>> = BTreeMap::new();
    for r in records {
        map.entry((r.model(), r.scaffold(), r.task.task_id.as_str()))
            .or_default()
            .push(r);
    }
    map.into_iter()
        .map(|((model, scaffold, task), mut rs)| {
            rs.sort_by_key(|r| r.episode.repeat_index);
            TaskOutcomeGroup {
                task_id: task.to_string(),
                model_id: model.to_string(),
                scaffold,
                bucket: rs[0].bucket(),
                domain: rs[0].domain(),
                repeats: rs
                    .iter()
                    .map(|r| Repeat {
                        passed: r.passed(),
                        gds: r.gds,
                        early_failure: r.early_failure(),
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Mean of the pass indicator over every episode in the groups.
pub fn pass_at_1(groups: &[TaskOutcomeGroup]) -> Result<f64, MetricError> {
    let episodes: usize = groups.iter().map(TaskOutcomeGroup::k).sum();
    if episodes == 0 {
        return Err(MetricError::Empty);
    }
    let passes: usize = groups.iter().map(TaskOutcomeGroup::passes).sum();
    Ok(passes as f64 / episodes as f64)
}

/// pass^k with each group's own repeat count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassPowK {
    pub value: f64,
    pub n_tasks: usize,
    pub min_k: usize,
    pub max_k: usize,
}

impl PassPowK {
    /// Groups disagree on k, or some group has fewer than two repeats.
    pub fn ragged(&self) -> bool {
        self.min_k != self.max_k || self.min_k < 2
    }
}

/// Fraction of tasks on which every repeat passed.
pub fn pass_pow_k(groups: &[TaskOutcomeGroup]) -> Result<PassPowK, MetricError> {
    let groups: Vec<&TaskOutcomeGroup> = groups.iter().filter(|g| g.k() > 0).collect();
    if groups.is_empty() {
        return Err(MetricError::Empty);
    }
    let all = groups.iter().filter(|g| g.all_passed()).count();
    Ok(PassPowK {
        value: all as f64 / groups.len() as f64,
        n_tasks: groups.len(),
        min_k: groups.iter().map(|g| g.k()).min().unwrap_or(0),
        max_k: groups.iter().map(|g| g.k()).max().unwrap_or(0),
    })
}
