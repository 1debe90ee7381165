//! Population statistics over task outcome groups.
//!
//! Everything here is a pure function of its inputs. Records are first
//! collected into [`TaskOutcomeGroup`]s (one per model, scaffold and task);
//! the curve, variance and breakdown functions all consume those.

mod baseline;
mod bootstrap;
mod ci;
mod curve;
mod pass;
mod scaffold;
mod stratify;
mod vaf;

pub use baseline::{
    decomposition_gain, default_exponents, early_failure_rate, exponent_is_extrapolated, geometric_baseline,
    superlinearity_ratio, Superlinearity,
};
pub use bootstrap::{
    bootstrap_ci, resample_rng, BootstrapConfig, BootstrapInterval, MAX_DEGENERATE_FRACTION, MIN_RESAMPLES,
};
pub use ci::{proportion_interval, wald_ci, wald_interval, wilson_interval, CiMethod, Interval};
pub use curve::{curve, rdc, rds, CurveOptions, CurvePoint, Metric, MetricCurve, Regressor};
pub use pass::{group_by_task, pass_at_1, pass_pow_k, PassPowK, Repeat, TaskOutcomeGroup};
pub use scaffold::{delta_label, scaffold_delta, DeltaLabel, ScaffoldDelta, NEUTRAL_BAND};
pub use stratify::{domain_stratify, Cell, DomainRow};
pub use vaf::{default_denominator, default_numerator, split_task_pass1, vaf, vaf_with_ci, variance_ratio, VafResult};
