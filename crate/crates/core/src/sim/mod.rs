//! Synthetic ground truth: step-failure processes, agent studies with known
//! pass rates, and tool-call trajectories with known entropy behavior.
//!
//! Every generator draws each episode from its own stream, derived from the
//! seed and the episode's index, so output does not depend on thread count.

mod cells;
mod steps;
mod study;
mod trajectory;

pub use cells::{
    build_study, meltdown_steps, parse_cell_targets, parse_meltdown_targets, BlueprintOptions, CellTarget,
    MeltdownTarget, MIN_ONSET,
};
pub use steps::{
    episode_rng, failure_counts, markov_variance_curve, predicted_failcount_variance, predicted_success_bound,
    simulate_steps, ErrorModel, MarkovCurve, SimConfig,
};
pub use study::{
    simulate_agent_study, synthetic_task, trajectory_corpus, AgentStudySpec, CorpusSpec, SyntheticStudy, SYNTHETIC_WEIGHTS,
};
pub use trajectory::{
    default_tool_pool, generate_trajectory, ProfileKind, TrajectoryProfile, MIN_PHASE_LEN, MIN_TRAJECTORY_LEN,
};
