use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Map;

use super::steps::episode_rng;
use super::trajectory::{coherent_tools, default_tool_pool, to_steps, trajectory_from, ProfileKind, TrajectoryProfile};
use crate::error::SimError;
use crate::model::{Bucket, Domain, Episode, EpisodeLog, Registry, Scaffold, Study, Subtask, TaskSpec, Termination, ToolStep};

/// Subtask weights of synthetic tasks, simplest first.
pub const SYNTHETIC_WEIGHTS: [f64; 5] = [0.10, 0.15, 0.20, 0.25, 0.30];

fn bucket_code(bucket: Bucket) -> &'static str {
    match bucket {
        Bucket::Short => "S",
        Bucket::Medium => "M",
        Bucket::Long => "L",
        Bucket::VeryLong => "VL",
    }
}

/// Typical (human minutes, agent steps, trajectory length) per bucket.
fn bucket_profile(bucket: Bucket) -> (f64, u32, usize) {
    match bucket {
        Bucket::Short => (3.0, 8, 10),
        Bucket::Medium => (15.0, 15, 14),
        Bucket::Long => (60.0, 30, 18),
        Bucket::VeryLong => (180.0, 50, 22),
    }
}

pub(crate) fn trajectory_len(bucket: Bucket) -> usize {
    bucket_profile(bucket).2
}

/// Task `n` (1-based) of a domain and bucket, e.g. `SE-VL-07`.
pub fn synthetic_task(domain: Domain, bucket: Bucket, n: usize) -> TaskSpec {
    let (minutes, steps, _) = bucket_profile(bucket);
    TaskSpec {
        task_id: format!("{domain}-{}-{n:02}", bucket_code(bucket)),
        domain,
        bucket,
        human_minutes_estimate: minutes,
        agent_steps_estimate: steps,
        subtasks: SYNTHETIC_WEIGHTS
            .iter()
            .enumerate()
            .map(|(i, &weight)| Subtask {
                subtask_id: format!("s{}", i + 1),
                weight,
                description: String::new(),
            })
            .collect(),
    }
}

/// Adds token accounting to generated steps.
pub(crate) fn with_tokens(mut steps: Vec<ToolStep>) -> Vec<ToolStep> {
    for s in &mut steps {
        s.tokens_in = 1_000 + 150 * u64::from(s.index);
        s.tokens_out = 120;
        s.result_chars = 400;
    }
    steps
}

pub(crate) fn coherent_steps(len: usize, rng: &mut ChaCha8Rng) -> Vec<ToolStep> {
    let pool = default_tool_pool();
    with_tokens(to_steps(&coherent_tools(&pool, &[], len, rng), false))
}

pub(crate) struct EpisodeParts<'a> {
    pub task: &'a TaskSpec,
    pub model_id: &'a str,
    pub scaffold: Scaffold,
    pub repeat: u32,
    pub outcomes: Vec<bool>,
    pub passed: bool,
    pub steps: Vec<ToolStep>,
}

pub(crate) fn make_episode(parts: EpisodeParts<'_>) -> Episode {
    let score = if parts.passed {
        1.0
    } else {
        parts
            .task
            .subtasks
            .iter()
            .zip(&parts.outcomes)
            .filter(|(_, &d)| d)
            .map(|(s, _)| s.weight)
            .sum::<f64>()
            .min(0.99)
    };
    Episode {
        episode_id: format!(
            "{}-{}-{}-r{}",
            parts.model_id, parts.scaffold, parts.task.task_id, parts.repeat
        ),
        task_id: parts.task.task_id.clone(),
        model_id: parts.model_id.to_string(),
        scaffold: parts.scaffold,
        repeat_index: parts.repeat,
        steps: parts.steps,
        nudges_used: 0,
        termination: Termination::Finished,
        subtask_outcomes: parts.outcomes,
        evaluator_score: score,
        passed: parts.passed,
        extra: Map::new(),
    }
}

/// Tasks and episodes produced by a generator, in log order.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticStudy {
    pub tasks: Vec<TaskSpec>,
    pub episodes: Vec<Episode>,
}

impl SyntheticStudy {
    pub fn registry(&self) -> Registry {
        Registry::from_tasks(self.tasks.clone()).expect("generated tasks are valid")
    }

    /// Joins the episodes with their tasks as if read from a clean log.
    pub fn study(&self) -> Study {
        let log = EpisodeLog {
            lines: self.episodes.len(),
            episodes: self.episodes.clone(),
            ..Default::default()
        };
        Study::assemble(self.registry(), log)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStudySpec {
    pub model_id: String,
    pub scaffold: Scaffold,
    pub per_bucket_p: BTreeMap<Bucket, f64>,
    pub tasks_per_bucket: usize,
    pub repeats: u32,
    pub seed: u64,
    /// Attach coherent tool-call trajectories; otherwise steps are empty.
    pub trajectories: bool,
}

impl AgentStudySpec {
    pub fn new(per_bucket_p: impl IntoIterator<Item = (Bucket, f64)>, tasks_per_bucket: usize, repeats: u32, seed: u64) -> AgentStudySpec {
        AgentStudySpec {
            model_id: "sim-agent".into(),
            scaffold: Scaffold::React,
            per_bucket_p: per_bucket_p.into_iter().collect(),
            tasks_per_bucket,
            repeats,
            seed,
            trajectories: false,
        }
    }
}

/// Episodes whose pass outcomes are i.i.d. Bernoulli(p_bucket) per (task, repeat).
///
/// Passing episodes complete every subtask; failing ones complete a uniformly
/// drawn proper prefix, since subtasks are ordered simplest first. Domains are
/// assigned round-robin within each bucket.
pub fn simulate_agent_study(spec: &AgentStudySpec) -> Result<SyntheticStudy, SimError> {
    if let Some((b, p)) = spec.per_bucket_p.iter().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
        return Err(SimError::Infeasible(format!("pass probability {p} for {b} outside [0, 1]")));
    }
    if spec.repeats == 0 || spec.tasks_per_bucket == 0 {
        return Err(SimError::Infeasible("tasks_per_bucket and repeats must be positive".into()));
    }
    let mut tasks = Vec::new();
    let mut jobs = Vec::new();
    for (&bucket, &p) in &spec.per_bucket_p {
        let mut per_domain = [0usize; 3];
        for j in 0..spec.tasks_per_bucket {
            let d = j % 3;
            per_domain[d] += 1;
            tasks.push(synthetic_task(Domain::ALL[d], bucket, per_domain[d]));
            for r in 1..=spec.repeats {
                jobs.push((tasks.len() - 1, r, p));
            }
        }
    }
    let n = SYNTHETIC_WEIGHTS.len();
    let episodes = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(t, repeat, p))| {
            let task = &tasks[t];
            let mut rng = episode_rng(spec.seed, i as u64);
            let passed = rng.random_bool(p);
            let done = if passed { n } else { rng.random_range(0..n) };
            let steps = if spec.trajectories {
                coherent_steps(trajectory_len(task.bucket), &mut rng)
            } else {
                Vec::new()
            };
            make_episode(EpisodeParts {
                task,
                model_id: &spec.model_id,
                scaffold: spec.scaffold,
                repeat,
                outcomes: (0..n).map(|k| k < done).collect(),
                passed,
                steps,
            })
        })
        .collect();
    Ok(SyntheticStudy { tasks, episodes })
}


/// Sizes of a labeled trajectory corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub rote: usize,
    pub coherent: usize,
    pub spiral: usize,
    pub length: usize,
    pub spiral_start: usize,
    pub seed: u64,
}

/// Episodes on a single short task whose trajectories follow the rote,
/// coherent and spiral profiles, with meltdown labels (true for spirals).
/// Spiral episodes fail with no subtasks done; the others pass.
pub fn trajectory_corpus(spec: &CorpusSpec) -> Result<(SyntheticStudy, BTreeMap<String, bool>), SimError> {
    let task = synthetic_task(Domain::SE, Bucket::Short, 1);
    let kinds = [
        (ProfileKind::Rote, spec.rote),
        (ProfileKind::Coherent, spec.coherent),
        (ProfileKind::Spiral, spec.spiral),
    ];
    let mut episodes = Vec::new();
    let mut labels = BTreeMap::new();
    for (kind, count) in kinds {
        let profile = match kind {
            ProfileKind::Rote => TrajectoryProfile::rote(),
            ProfileKind::Coherent => TrajectoryProfile::coherent(),
            ProfileKind::Spiral => TrajectoryProfile::spiral(spec.spiral_start),
        };
        let name = serde_json::to_value(kind).expect("kind serializes");
        for _ in 0..count {
            let i = episodes.len();
            let steps = with_tokens(trajectory_from(&profile, spec.length, &mut episode_rng(spec.seed, i as u64))?);
            let melt = kind == ProfileKind::Spiral;
            let mut ep = make_episode(EpisodeParts {
                task: &task,
                model_id: "sim-agent",
                scaffold: Scaffold::React,
                repeat: i as u32 + 1,
                outcomes: vec![!melt; SYNTHETIC_WEIGHTS.len()],
                passed: !melt,
                steps,
            });
            ep.extra.insert("profile".into(), name.clone());
            labels.insert(ep.episode_id.clone(), melt);
            episodes.push(ep);
        }
    }
    Ok((
        SyntheticStudy {
            tasks: vec![task],
            episodes,
        },
        labels,
    ))
}
