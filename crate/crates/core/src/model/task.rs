use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::LoadError;

/// Tolerance on the subtask weight sum.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Subtask counts outside this range are legal but flagged.
pub const SUBTASK_COUNT_RANGE: (usize, usize) = (3, 6);

/// Task domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    /// Software engineering.
    SE,
    /// Web research.
    WR,
    /// Document processing.
    DP,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::SE, Domain::WR, Domain::DP];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::SE => "SE",
            Domain::WR => "WR",
            Domain::DP => "DP",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown domain {s:?}"))
    }
}

/// Duration bucket, assigned by estimated human completion time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Short,
    Medium,
    Long,
    VeryLong,
}

impl Bucket {
    pub const ALL: [Bucket; 4] = [Bucket::Short, Bucket::Medium, Bucket::Long, Bucket::VeryLong];

    /// Zero-based position, short = 0 through very_long = 3.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Short => "short",
            Bucket::Medium => "medium",
            Bucket::Long => "long",
            Bucket::VeryLong => "very_long",
        }
    }

    /// Bucket whose band contains `minutes`: short ≤ 5, medium (5, 30],
    /// long (30, 120], very_long > 120.
    pub fn from_minutes(minutes: f64) -> Bucket {
        if minutes <= 5.0 {
            Bucket::Short
        } else if minutes <= 30.0 {
            Bucket::Medium
        } else if minutes <= 120.0 {
            Bucket::Long
        } else {
            Bucket::VeryLong
        }
    }

    /// Representative human-minutes value used as a regression coordinate.
    pub fn midpoint_minutes(self) -> f64 {
        match self {
            Bucket::Short => 2.5,
            Bucket::Medium => 17.5,
            Bucket::Long => 75.0,
            Bucket::VeryLong => 150.0,
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Bucket {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "short" | "s" => Ok(Bucket::Short),
            "medium" | "m" => Ok(Bucket::Medium),
            "long" | "l" => Ok(Bucket::Long),
            "very_long" | "very-long" | "vl" => Ok(Bucket::VeryLong),
            other => Err(format!("unknown bucket {other:?}")),
        }
    }
}

/// One weighted subtask. Weights of a task's subtasks sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub subtask_id: String,
    #[serde(deserialize_with = "decimal")]
    pub weight: f64,
    #[serde(default)]
    pub description: String,
}

/// Weights may be written as JSON numbers or decimal strings.
fn decimal<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    match Raw::deserialize(de)? {
        Raw::Number(x) => Ok(x),
        Raw::Text(s) => s.trim().parse().map_err(serde::de::Error::custom),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub domain: Domain,
    pub bucket: Bucket,
    pub human_minutes_estimate: f64,
    /// Expected tool calls in a correct solution; independent of `bucket`.
    pub agent_steps_estimate: u32,
    pub subtasks: Vec<Subtask>,
}

impl TaskSpec {
    pub fn weight_sum(&self) -> f64 {
        self.subtasks.iter().map(|s| s.weight).sum()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.subtasks.iter().map(|s| s.weight)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistryWarning {
    pub line: usize,
    pub task_id: String,
    pub code: &'static str,
    pub message: String,
}

/// Loaded task registry, in file order.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    tasks: Vec<TaskSpec>,
    index: HashMap<String, usize>,
    pub warnings: Vec<RegistryWarning>,
}

#[derive(Deserialize)]
struct RegistryLine {
    #[serde(default)]
    schema_version: Option<String>,
    #[serde(flatten)]
    task: TaskSpec,
}

impl Registry {
    pub fn from_tasks(tasks: impl IntoIterator<Item = TaskSpec>) -> Result<Registry, LoadError> {
        let mut registry = Registry::default();
        for (i, task) in tasks.into_iter().enumerate() {
            registry.push(i + 1, task)?;
        }
        Ok(registry)
    }

    fn push(&mut self, line: usize, task: TaskSpec) -> Result<(), LoadError> {
        if task.task_id.is_empty() {
            return Err(LoadError::Malformed {
                line,
                message: "empty task_id".into(),
            });
        }
        if self.index.contains_key(&task.task_id) {
            return Err(LoadError::DuplicateTask {
                line,
                task_id: task.task_id,
            });
        }
        if task.subtasks.is_empty() {
            return Err(LoadError::Malformed {
                line,
                message: format!("task {:?} has no subtasks", task.task_id),
            });
        }
        if let Some(bad) = task.subtasks.iter().find(|s| !(0.0..=1.0).contains(&s.weight)) {
            return Err(LoadError::Malformed {
                line,
                message: format!("subtask {:?} weight {} outside [0, 1]", bad.subtask_id, bad.weight),
            });
        }
        let sum = task.weight_sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(LoadError::WeightSum {
                line,
                task_id: task.task_id,
                sum,
            });
        }
        if !(task.human_minutes_estimate > 0.0) {
            return Err(LoadError::Malformed {
                line,
                message: "human_minutes_estimate must be positive".into(),
            });
        }
        if task.agent_steps_estimate == 0 {
            return Err(LoadError::Malformed {
                line,
                message: "agent_steps_estimate must be positive".into(),
            });
        }

        let (lo, hi) = SUBTASK_COUNT_RANGE;
        let n = task.subtasks.len();
        if n < lo || n > hi {
            self.warnings.push(RegistryWarning {
                line,
                task_id: task.task_id.clone(),
                code: "subtask_count",
                message: format!("subtask count outside {lo}–{hi} ({n})"),
            });
        }
        let banded = Bucket::from_minutes(task.human_minutes_estimate);
        if banded != task.bucket {
            self.warnings.push(RegistryWarning {
                line,
                task_id: task.task_id.clone(),
                code: "bucket_band",
                message: format!(
                    "bucket {} disagrees with {} human minutes (band {})",
                    task.bucket, task.human_minutes_estimate, banded
                ),
            });
        }

        self.index.insert(task.task_id.clone(), self.tasks.len());
        self.tasks.push(task);
        Ok(())
    }

    pub fn get(&self, task_id: &str) -> Option<&TaskSpec> {
        self.index.get(task_id).map(|&i| &self.tasks[i])
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

/// Reads a newline-delimited task registry. Blank lines are skipped.
pub fn load_task_registry<R: BufRead>(reader: R) -> Result<Registry, LoadError> {
    let mut registry = Registry::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RegistryLine = serde_json::from_str(&line).map_err(|e| LoadError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(v) = raw.schema_version.as_deref() {
            if v != "1" {
                return Err(LoadError::SchemaVersion {
                    line: line_no,
                    version: v.to_string(),
                });
            }
        }
        registry.push(line_no, raw.task)?;
    }
    Ok(registry)
}

/// Renders one registry record.
pub fn registry_line(task: &TaskSpec) -> String {
    let mut value = serde_json::to_value(task).expect("task serializes");
    if let serde_json::Value::Object(map) = &mut value {
        map.shift_insert(0, "schema_version".into(), "1".into());
    }
    value.to_string()
}
