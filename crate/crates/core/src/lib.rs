//! Reliability analytics for long-horizon agent episode logs.
//!
//! The crate is organized the way an analysis flows:
//!
//! - [`model`] parses task registries and episode logs and scores each
//!   episode's graceful degradation (GDS).
//! - [`metrics`] turns episodes into population statistics: pass@1, pass^k,
//!   reliability decay curves and slopes, variance amplification with
//!   bootstrap intervals, domain and scaffold breakdowns.
//! - [`mop`] detects meltdown onset from sliding-window tool-call entropy and
//!   replays the harness circuit breakers.
//! - [`sim`] generates synthetic studies from known error models so every
//!   estimator can be checked against ground truth.
//! - [`report`] runs the whole pipeline and writes tables as CSV, JSON and
//!   Markdown.

pub mod error;
pub mod metrics;
pub mod model;
pub mod mop;
pub mod report;
pub mod sim;
mod stats;

pub use error::{LoadError, MetricError, MopError, ReportError, SimError};
