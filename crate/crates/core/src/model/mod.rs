//! Tasks, episodes and the log formats they travel in.
//!
//! Both formats are newline-delimited JSON with a top-level
//! `"schema_version": "1"` (absent means version 1). Parsing is streaming and
//! single-pass; nothing is mutated after load.

mod episode;
mod log;
mod study;
mod task;

pub use episode::{
    canonical_json, canonicalize_args, episode_line, Episode, Scaffold, Termination, ToolStep, MAX_NUDGES,
    MAX_STEPS,
};
pub use log::{parse_episode_log, validate_episode, EpisodeLog, Issue, ValidationReport, SCORE_TOLERANCE};
pub use study::{episode_gds, EpisodeRecord, IntakeCounts, Study};
pub use task::{
    load_task_registry, registry_line, Bucket, Domain, Registry, RegistryWarning, Subtask, TaskSpec,
    SUBTASK_COUNT_RANGE, WEIGHT_SUM_TOLERANCE,
};
