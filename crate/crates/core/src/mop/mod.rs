//! Meltdown onset detection from tool-call entropy, and guard replay.
//!
//! Windows are the trailing `w` calls ending at step `t` (steps `t-w+1..=t`),
//! so the first window ends at step `w` and the first step that can trigger is
//! `2w`, where both `H(t)` and `H(t-w)` exist. Entropy is in bits.

mod calibrate;
mod detect;
mod entropy;
mod guards;
mod table;

pub use calibrate::{
    calibrate_mop_baseline, calibrate_mop_f1, load_labels, BaselineCalibration, F1Calibration, DEFAULT_DELTA_GRID,
    DEFAULT_THETA_GRID,
};
pub use detect::{detect_episode, detect_mop, find_onset, MopConfig, MopResult};
pub use entropy::{entropy_from_counts, entropy_series, entropy_series_recount, window_distribution, window_entropy};
pub use guards::{budget_trigger, loop_trigger, replay_guards, GuardConfig, GuardReplay};
pub use table::{entropy_precursor, meltdown_table, MeltdownCell, MopObservation, MIN_EVENTS_FOR_MEDIAN};
