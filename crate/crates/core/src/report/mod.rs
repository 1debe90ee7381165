//! End-to-end analysis: load logs and registry, compute every metric table,
//! and write the tables as CSV, JSON or Markdown with run metadata.
//!
//! Output is a pure function of the inputs and options. Tables carry their own
//! denominators, and `metadata.json` records input hashes, the resolved
//! options and a hash of them.

mod emit;
mod pipeline;
mod pricing;
mod table;

pub use emit::{emit_report, render_report, Format};
pub use pipeline::{
    analyze, analyze_mop, run_cost, run_mop, run_pipeline, run_validate, InputFile, MopCalibration, PipelineInputs,
    PipelineOptions, ReportBundle, RunMetadata,
};
pub use pricing::{compute_cost, load_pricing, CostReport, EpisodeCost, ModelCost, PricingEntry};
pub use table::{col, Column, Datum, Kind, Table};
