use std::io;

use thiserror::Error;

/// Errors raised while loading task registries, pricing tables and label files.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate task_id {task_id:?}")]
    DuplicateTask { line: usize, task_id: String },
    #[error("line {line}: subtask weights for {task_id:?} sum to {sum}, expected 1")]
    WeightSum {
        line: usize,
        task_id: String,
        sum: f64,
    },
    #[error("line {line}: unsupported schema_version {version:?}")]
    SchemaVersion { line: usize, version: String },
}

/// Errors raised by the population-level metric computations.
#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no observations")]
    Empty,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("regressor has zero variance")]
    ZeroRegressorVariance,
    #[error("denominator variance is zero (saturated or floored model)")]
    DegenerateVariance,
    #[error("statistic degenerate on {failed} of {total} resamples ({rate:.1}%)", rate = 100.0 * *failed as f64 / *total as f64)]
    DegenerateResamples { failed: usize, total: usize },
    #[error("curve has no {0} point")]
    MissingBucket(&'static str),
    #[error("episode {episode_id}: {outcomes} subtask outcomes but task has {subtasks} subtasks")]
    OutcomeLength {
        episode_id: String,
        outcomes: usize,
        subtasks: usize,
    },
}

/// Errors raised by meltdown detection, calibration and precursor extraction.
#[derive(Debug, Error, PartialEq)]
pub enum MopError {
    #[error("step {t} is before the first full window (w = {w})")]
    WindowNotFull { t: usize, w: usize },
    #[error("step {t} is past the end of the trajectory ({len} steps)")]
    StepOutOfRange { t: usize, len: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no positive labels")]
    NoPositiveLabels,
    #[error("no negative labels")]
    NoNegativeLabels,
    #[error("empty calibration grid")]
    EmptyGrid,
    #[error("empty baseline")]
    EmptyBaseline,
    #[error("every baseline episode is shorter than {min_len} steps")]
    BaselineTooShort { min_len: usize },
    #[error("insufficient lookback: need steps from {from}, series starts at {first}")]
    InsufficientLookback { from: usize, first: usize },
}

/// Errors raised by the simulation oracle.
#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("invalid profile: {0}")]
    Profile(String),
}

/// Errors raised while assembling or writing a report.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Load {
        path: String,
        #[source]
        source: LoadError,
    },
    #[error("no valid episodes")]
    NoValidEpisodes,
    #[error("missing pricing for models: {}", .0.join(", "))]
    MissingPricing(Vec<String>),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl ReportError {
    /// The inputs themselves are at fault, as opposed to the computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            ReportError::Load { .. } | ReportError::NoValidEpisodes | ReportError::MissingPricing(_)
        )
    }

    pub(crate) fn stage(stage: &'static str, err: impl std::fmt::Display) -> ReportError {
        ReportError::Stage {
            stage,
            message: err.to_string(),
        }
    }
}
