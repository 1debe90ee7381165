use serde::Serialize;

use super::episode::{Episode, Scaffold};
use super::log::{EpisodeLog, Issue, ValidationReport};
use super::task::{Bucket, Domain, Registry, TaskSpec};
use crate::error::MetricError;

/// Criticality-weighted fraction of subtasks completed.
pub fn episode_gds(episode: &Episode, task: &TaskSpec) -> Result<f64, MetricError> {
    if episode.subtask_outcomes.len() != task.subtasks.len() {
        return Err(MetricError::OutcomeLength {
            episode_id: episode.episode_id.clone(),
            outcomes: episode.subtask_outcomes.len(),
            subtasks: task.subtasks.len(),
        });
    }
    Ok(task
        .subtasks
        .iter()
        .zip(&episode.subtask_outcomes)
        .filter(|(_, &done)| done)
        .map(|(s, _)| s.weight)
        .sum())
}

/// An analyzable episode joined with its task.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeRecord<'a> {
    pub episode: &'a Episode,
    pub task: &'a TaskSpec,
    pub gds: f64,
}

impl<'a> EpisodeRecord<'a> {
    pub fn model(&self) -> &'a str {
        &self.episode.model_id
    }

    pub fn scaffold(&self) -> Scaffold {
        self.episode.scaffold
    }

    pub fn bucket(&self) -> Bucket {
        self.task.bucket
    }

    pub fn domain(&self) -> Domain {
        self.task.domain
    }

    pub fn passed(&self) -> bool {
        self.episode.passed
    }

    /// The first (simplest) subtask was not completed.
    pub fn early_failure(&self) -> bool {
        !self.episode.subtask_outcomes.first().copied().unwrap_or(false)
    }
}

/// Where every input line ended up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IntakeCounts {
    pub lines: usize,
    pub duplicates_dropped: usize,
    pub validation_errors: usize,
    pub infra_excluded: usize,
    pub analyzed: usize,
}

impl IntakeCounts {
    /// Lines that are neither analyzed, excluded, rejected nor dropped duplicates.
    pub fn unaccounted(&self) -> isize {
        self.lines as isize
            - (self.analyzed + self.infra_excluded + self.validation_errors + self.duplicates_dropped) as isize
    }
}

/// A registry and the episodes that validated against it.
#[derive(Debug, Clone)]
pub struct Study {
    pub registry: Registry,
    /// Valid episodes, including infra-error ones kept for accounting.
    pub episodes: Vec<Episode>,
    gds: Vec<f64>,
    pub reports: Vec<ValidationReport>,
    pub counts: IntakeCounts,
}

impl Study {
    /// Joins a parsed log to the registry. Episodes whose task is unknown or
    /// whose outcome list does not match the task are moved to error reports.
    pub fn assemble(registry: Registry, log: EpisodeLog) -> Study {
        let mut counts = IntakeCounts {
            lines: log.lines,
            duplicates_dropped: log.duplicates_dropped,
            validation_errors: log.rejected,
            ..Default::default()
        };
        let mut reports = log.reports;
        let mut episodes = Vec::with_capacity(log.episodes.len());
        let mut gds = Vec::with_capacity(log.episodes.len());
        for ep in log.episodes {
            let joined = match registry.get(&ep.task_id) {
                None => Err(Issue::new(
                    "unknown_task",
                    format!("missing registry entry for task_id {:?}", ep.task_id),
                )),
                Some(task) => episode_gds(&ep, task).map_err(|e| Issue::new("outcome_length", e.to_string())),
            };
            match joined {
                Ok(g) => {
                    if ep.is_infra_error() {
                        counts.infra_excluded += 1;
                    } else {
                        counts.analyzed += 1;
                    }
                    episodes.push(ep);
                    gds.push(g);
                }
                Err(issue) => {
                    counts.validation_errors += 1;
                    match reports.iter_mut().find(|r| r.episode_id == ep.episode_id && !r.is_error()) {
                        Some(r) => r.errors.push(issue),
                        None => {
                            let mut r = ValidationReport::new(ep.episode_id.clone(), None);
                            r.errors.push(issue);
                            reports.push(r);
                        }
                    }
                }
            }
        }
        Study {
            registry,
            episodes,
            gds,
            reports,
            counts,
        }
    }

    /// Analyzable records; infra-error episodes are left out.
    pub fn records(&self) -> Vec<EpisodeRecord<'_>> {
        self.episodes
            .iter()
            .zip(&self.gds)
            .filter(|(ep, _)| !ep.is_infra_error())
            .map(|(ep, &gds)| EpisodeRecord {
                episode: ep,
                task: self.registry.get(&ep.task_id).expect("joined at assembly"),
                gds,
            })
            .collect()
    }

    pub fn infra_excluded(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().filter(|e| e.is_infra_error())
    }
}
