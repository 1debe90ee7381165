use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::pricing::{compute_cost, load_pricing, PricingEntry};
use super::table::{col, Datum, Kind, Table};
use crate::error::{LoadError, ReportError};
use crate::metrics::{
    self, curve, default_denominator, default_exponents, default_numerator, domain_stratify, early_failure_rate,
    exponent_is_extrapolated, geometric_baseline, group_by_task, rds, scaffold_delta, superlinearity_ratio,
    vaf_with_ci, BootstrapConfig, CiMethod, CurveOptions, Metric, MetricCurve, Regressor, TaskOutcomeGroup,
};
use crate::model::{
    load_task_registry, parse_episode_log, Bucket, EpisodeLog, EpisodeRecord, IntakeCounts, Scaffold, Study,
    Termination, ValidationReport,
};
use crate::mop::{
    calibrate_mop_baseline, calibrate_mop_f1, detect_episode, entropy_precursor, meltdown_table, replay_guards,
    GuardConfig, MopConfig, MopObservation, MopResult, DEFAULT_DELTA_GRID, DEFAULT_THETA_GRID,
};

/// Every tunable of a run, with resolved defaults. Embedded in the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineOptions {
    pub seed: u64,
    pub bootstrap_resamples: usize,
    pub confidence_level: f64,
    pub ci_method: CiMethod,
    pub regressor: Regressor,
    pub vaf_numerator: BTreeSet<Bucket>,
    pub vaf_denominator: BTreeSet<Bucket>,
    pub scaffold_buckets: BTreeSet<Bucket>,
    pub geometric_exponents: BTreeMap<Bucket, f64>,
    pub mop: MopConfig,
    pub precursor_lookback: u32,
    pub guards: GuardConfig,
    /// Write per-episode entropy series alongside the tables.
    pub entropy_series: bool,
    /// Include a per-episode cost table.
    pub episode_costs: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            seed: 0,
            bootstrap_resamples: 10_000,
            confidence_level: 0.95,
            ci_method: CiMethod::Wald,
            regressor: Regressor::BucketIndex1To4,
            vaf_numerator: default_numerator(),
            vaf_denominator: default_denominator(),
            scaffold_buckets: [Bucket::Long, Bucket::VeryLong].into(),
            geometric_exponents: default_exponents(),
            mop: MopConfig::default(),
            precursor_lookback: 5,
            guards: GuardConfig::default(),
            entropy_series: false,
            episode_costs: false,
        }
    }
}

impl PipelineOptions {
    /// SHA-256 of the options' JSON rendering.
    pub fn config_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("options serialize").as_bytes())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineInputs {
    pub logs: Vec<PathBuf>,
    /// Required by every command except cost.
    pub registry: Option<PathBuf>,
    pub pricing: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputFile {
    pub role: &'static str,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub inputs: Vec<InputFile>,
    pub config_hash: String,
    pub seed: u64,
    pub options: PipelineOptions,
    pub counts: IntakeCounts,
    pub registry_tasks: usize,
    pub registry_warnings: usize,
    pub notes: Vec<String>,
}

/// Everything a run produces, ready to emit.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub metadata: RunMetadata,
    pub tables: Vec<Table>,
    /// Per-episode detection results, kept when entropy series were requested.
    pub series: Vec<MopResult>,
}

impl ReportBundle {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

struct Loaded {
    study: Study,
    pricing: Option<Vec<PricingEntry>>,
    inputs: Vec<InputFile>,
}

fn read(role: &'static str, path: &PathBuf, inputs: &mut Vec<InputFile>) -> Result<Vec<u8>, ReportError> {
    let bytes = fs::read(path).map_err(|e| ReportError::Load {
        path: path.display().to_string(),
        source: LoadError::Io(e),
    })?;
    inputs.push(InputFile {
        role,
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    });
    Ok(bytes)
}

fn load_err(path: &Path) -> impl FnOnce(LoadError) -> ReportError {
    let path = path.display().to_string();
    move |source| ReportError::Load { path, source }
}

fn load_logs(inputs: &PipelineInputs, files: &mut Vec<InputFile>) -> Result<EpisodeLog, ReportError> {
    let mut log = EpisodeLog::default();
    for path in &inputs.logs {
        let bytes = read("episodes", path, files)?;
        let part = parse_episode_log(&bytes[..]).map_err(|e| load_err(path)(LoadError::Io(e)))?;
        log.merge(part);
    }
    Ok(log)
}

fn load_pricing_file(inputs: &PipelineInputs, files: &mut Vec<InputFile>) -> Result<Option<Vec<PricingEntry>>, ReportError> {
    match &inputs.pricing {
        Some(path) => {
            let bytes = read("pricing", path, files)?;
            Ok(Some(load_pricing(&bytes[..]).map_err(load_err(path))?))
        }
        None => Ok(None),
    }
}

fn load(inputs: &PipelineInputs) -> Result<Loaded, ReportError> {
    let mut files = Vec::new();
    let path = inputs.registry.as_ref().ok_or_else(|| ReportError::Stage {
        stage: "input",
        message: "a task registry is required".into(),
    })?;
    let bytes = read("registry", path, &mut files)?;
    let registry = load_task_registry(&bytes[..]).map_err(load_err(path))?;
    let log = load_logs(inputs, &mut files)?;
    let pricing = load_pricing_file(inputs, &mut files)?;
    Ok(Loaded {
        study: Study::assemble(registry, log),
        pricing,
        inputs: files,
    })
}

/// Loads inputs and runs the full analysis.
pub fn run_pipeline(inputs: &PipelineInputs, options: &PipelineOptions) -> Result<ReportBundle, ReportError> {
    let loaded = load(inputs)?;
    let mut bundle = analyze(&loaded.study, loaded.pricing.as_deref(), options)?;
    bundle.metadata.inputs = loaded.inputs;
    Ok(bundle)
}

/// Loads inputs and runs only the meltdown analysis.
pub fn run_mop(
    inputs: &PipelineInputs,
    options: &PipelineOptions,
    calibration: &MopCalibration,
) -> Result<ReportBundle, ReportError> {
    let loaded = load(inputs)?;
    let mut bundle = analyze_mop(&loaded.study, options, calibration)?;
    bundle.metadata.inputs = loaded.inputs;
    Ok(bundle)
}

/// Loads inputs and reports validation results only.
pub fn run_validate(inputs: &PipelineInputs) -> Result<(ReportBundle, bool), ReportError> {
    let loaded = load(inputs)?;
    let options = PipelineOptions::default();
    let mut bundle = ReportBundle {
        metadata: metadata(&loaded.study, &options, Vec::new()),
        tables: vec![intake_table(&loaded.study), validation_table(&loaded.study)],
        series: Vec::new(),
    };
    bundle.metadata.inputs = loaded.inputs;
    let clean = loaded.study.counts.validation_errors == 0;
    Ok((bundle, clean))
}

/// Loads logs and pricing and reports costs only. No registry is needed:
/// every valid episode is priced, infra errors included.
pub fn run_cost(inputs: &PipelineInputs, per_episode: bool) -> Result<ReportBundle, ReportError> {
    let mut files = Vec::new();
    let log = load_logs(inputs, &mut files)?;
    let pricing = load_pricing_file(inputs, &mut files)?.ok_or_else(|| ReportError::Stage {
        stage: "input",
        message: "a pricing file is required".into(),
    })?;
    if log.episodes.is_empty() {
        return Err(ReportError::NoValidEpisodes);
    }
    let options = PipelineOptions {
        episode_costs: per_episode,
        ..Default::default()
    };
    let counts = IntakeCounts {
        lines: log.lines,
        duplicates_dropped: log.duplicates_dropped,
        validation_errors: log.rejected,
        infra_excluded: 0,
        analyzed: log.episodes.len(),
    };
    let tables = cost_tables(&log.episodes, &pricing, per_episode)?;
    Ok(ReportBundle {
        metadata: RunMetadata {
            tool: "agentrel",
            version: env!("CARGO_PKG_VERSION"),
            inputs: files,
            config_hash: options.config_hash(),
            seed: options.seed,
            options,
            counts,
            registry_tasks: 0,
            registry_warnings: 0,
            notes: vec!["Cost covers every valid episode, infra errors included.".into()],
        },
        tables,
        series: Vec::new(),
    })
}

fn metadata(study: &Study, options: &PipelineOptions, notes: Vec<String>) -> RunMetadata {
    RunMetadata {
        tool: "agentrel",
        version: env!("CARGO_PKG_VERSION"),
        inputs: Vec::new(),
        config_hash: options.config_hash(),
        seed: options.seed,
        options: options.clone(),
        counts: study.counts,
        registry_tasks: study.registry.len(),
        registry_warnings: study.registry.warnings.len(),
        notes,
    }
}

type Population = (String, Scaffold);

fn populations(groups: &[TaskOutcomeGroup]) -> BTreeMap<Population, Vec<TaskOutcomeGroup>> {
    let mut out: BTreeMap<Population, Vec<TaskOutcomeGroup>> = BTreeMap::new();
    for g in groups {
        out.entry((g.model_id.clone(), g.scaffold)).or_default().push(g.clone());
    }
    out
}

fn key(p: &Population) -> [Datum; 2] {
    [Datum::text(&p.0), Datum::text(p.1)]
}

fn stage<T>(name: &'static str, r: Result<T, impl std::fmt::Display>) -> Result<T, ReportError> {
    r.map_err(|e| ReportError::stage(name, e))
}

/// Runs every analysis over an assembled study.
pub fn analyze(study: &Study, pricing: Option<&[PricingEntry]>, options: &PipelineOptions) -> Result<ReportBundle, ReportError> {
    stage("options", options.mop.validate())?;
    let records = study.records();
    if records.is_empty() {
        return Err(ReportError::NoValidEpisodes);
    }
    let groups = group_by_task(&records);
    let pops = populations(&groups);
    let curve_options = CurveOptions {
        ci: options.ci_method,
        level: options.confidence_level,
    };
    let mut curves: BTreeMap<Population, [MetricCurve; 3]> = BTreeMap::new();
    for (p, gs) in &pops {
        let c = |m| stage("metrics", curve(gs, m, &curve_options));
        curves.insert(p.clone(), [c(Metric::Pass1)?, c(Metric::PassK)?, c(Metric::Gds)?]);
    }

    let mut notes = vec![
        format!(
            "Pass@1 intervals: {} at level {} with n = tasks in the bucket.",
            options.ci_method, options.confidence_level
        ),
        "VAF uses per-task pass@1 as the fraction of that task's repeats that passed.".to_string(),
        format!(
            "Decay slopes use {} unless a column names another regressor.",
            options.regressor
        ),
        "Geometric exponent for very_long is an extrapolation beyond the worked examples.".to_string(),
        format!(
            "MOP windows are the trailing {} calls ending at step t; onset is eligible from t = {}.",
            options.mop.window,
            2 * options.mop.window
        ),
        "Scaffold deltas within 0.03 GDS either way (inclusive) are labeled neutral.".to_string(),
    ];
    for (p, [_, passk, _]) in &curves {
        if passk.ragged {
            notes.push(format!("pass^k for {}/{} mixes repeat counts; each task uses its own k.", p.0, p.1));
        }
    }

    let mut tables = vec![
        rdc_table(&curves),
        slope_table(&curves, options.regressor),
        gds_pass_table(&pops, &curves),
        stage("metrics", vaf_table(&pops, options))?,
        stage("metrics", domain_table(&groups))?,
    ];
    let (delta, warnings) = scaffold_delta(&groups, &options.scaffold_buckets);
    notes.extend(warnings);
    tables.push(scaffold_table(&delta));
    tables.push(stage("metrics", geometric_table(&curves, &options.geometric_exponents))?);
    tables.push(decomposition_table(&curves));

    let results = stage("meltdown", detect_all(&records, &options.mop))?;
    tables.extend(mop_tables(&records, &results, options));
    if let Some(pricing) = pricing {
        tables.extend(cost_tables(&study.episodes, pricing, options.episode_costs)?);
    }
    tables.push(intake_table(study));
    tables.push(validation_table(study));

    Ok(ReportBundle {
        metadata: metadata(study, options, notes),
        tables,
        series: if options.entropy_series { results } else { Vec::new() },
    })
}

/// Calibration requested alongside meltdown analysis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MopCalibration {
    /// Episode labels for the F1 grid search.
    pub labels: Option<BTreeMap<String, bool>>,
    /// Percentile for baseline calibration; the result replaces θ and δ.
    pub baseline_percentile: Option<f64>,
    /// Buckets whose episodes form the baseline.
    pub baseline_buckets: BTreeSet<Bucket>,
}

/// Meltdown detection, tables and optional calibration only.
pub fn analyze_mop(study: &Study, options: &PipelineOptions, calibration: &MopCalibration) -> Result<ReportBundle, ReportError> {
    let records = study.records();
    if records.is_empty() {
        return Err(ReportError::NoValidEpisodes);
    }
    let mut options = options.clone();
    let mut tables = Vec::new();
    let mut cal = Table::new(
        "calibration",
        "MOP threshold calibration",
        vec![
            col("method", Kind::Text),
            col("theta", Kind::Decimal3),
            col("delta", Kind::Decimal3),
            col("f1", Kind::Decimal3),
            col("precision", Kind::Decimal3),
            col("recall", Kind::Decimal3),
            col("n_episodes", Kind::Integer),
        ],
    );
    if let Some(pct) = calibration.baseline_percentile {
        let baseline: Vec<_> = records
            .iter()
            .filter(|r| calibration.baseline_buckets.contains(&r.bucket()))
            .map(|r| r.episode)
            .collect();
        let b = stage("calibration", calibrate_mop_baseline(&baseline, pct, options.mop.window))?;
        options.mop.theta = b.theta;
        options.mop.delta = b.delta;
        cal.push(vec![
            Datum::text(format!("baseline p{}", 100.0 * pct)),
            Datum::Num(b.theta),
            Datum::Num(b.delta),
            Datum::Missing,
            Datum::Missing,
            Datum::Missing,
            Datum::int(b.episodes_used),
        ]);
    }
    if let Some(labels) = &calibration.labels {
        let labeled: Vec<_> = records
            .iter()
            .filter_map(|r| labels.get(&r.episode.episode_id).map(|&m| (r.episode, m)))
            .collect();
        let f = stage(
            "calibration",
            calibrate_mop_f1(&labeled, &DEFAULT_THETA_GRID, &DEFAULT_DELTA_GRID, options.mop.window),
        )?;
        cal.push(vec![
            Datum::text("f1 grid"),
            Datum::Num(f.theta),
            Datum::Num(f.delta),
            Datum::Num(f.f1),
            Datum::Num(f.precision),
            Datum::Num(f.recall),
            Datum::int(labeled.len()),
        ]);
    }
    stage("options", options.mop.validate())?;
    let results = stage("meltdown", detect_all(&records, &options.mop))?;
    if !cal.rows.is_empty() {
        tables.push(cal);
    }
    tables.extend(mop_tables(&records, &results, &options));
    tables.push(intake_table(study));
    let notes = vec![format!(
        "Detection used w = {}, theta = {}, delta = {}.",
        options.mop.window, options.mop.theta, options.mop.delta
    )];
    Ok(ReportBundle {
        metadata: metadata(study, &options, notes),
        tables,
        series: if options.entropy_series { results } else { Vec::new() },
    })
}

fn detect_all(records: &[EpisodeRecord<'_>], config: &MopConfig) -> Result<Vec<MopResult>, crate::error::MopError> {
    records.par_iter().map(|r| detect_episode(r.episode, config)).collect()
}

fn bucket_row(p: &Population, b: Bucket) -> Vec<Datum> {
    let mut row = key(p).to_vec();
    row.push(Datum::text(b));
    row
}

fn rdc_table(curves: &BTreeMap<Population, [MetricCurve; 3]>) -> Table {
    let mut t = Table::new(
        "rdc",
        "Reliability decay curves: pass@1 with interval, pass^k and GDS by bucket",
        vec![
            col("model", Kind::Text),
            col("scaffold", Kind::Text),
            col("bucket", Kind::Text),
            col("n_tasks", Kind::Integer),
            col("n_episodes", Kind::Integer),
            col("pass1", Kind::Percent),
            col("ci_low", Kind::Percent),
            col("ci_high", Kind::Percent),
            col("ci_half_width", Kind::Percent),
            col("passk", Kind::Percent),
            col("gds", Kind::Decimal2),
        ],
    );
    for (p, [pass1, passk, gds]) in curves {
        for (&b, pt) in &pass1.points {
            let mut row = bucket_row(p, b);
            row.extend([
                Datum::int(pt.n_tasks),
                Datum::int(pt.n_episodes),
                Datum::Num(pt.value),
                Datum::num(pt.ci_low),
                Datum::num(pt.ci_high),
                Datum::num(pt.ci_low.zip(pt.ci_high).map(|(l, h)| (h - l) / 2.0)),
                Datum::num(passk.value(b)),
                Datum::num(gds.value(b)),
            ]);
            t.push(row);
        }
    }
    t.notes.push("ci_half_width is half the clamped interval.".into());
    t
}

fn slope_table(curves: &BTreeMap<Population, [MetricCurve; 3]>, primary: Regressor) -> Table {
    let mut t = Table::new(
        "slope",
        "Reliability decay slopes",
        vec![
            col("model", Kind::Text),
            col("scaffold", Kind::Text),
            col("metric", Kind::Text),
            col("n_points", Kind::Integer),
            col("slope", Kind::Decimal3),
            col("slope_bucket_index_1to4", Kind::Decimal3),
            col("slope_bucket_index_0to3", Kind::Decimal3),
            col("slope_human_minutes_midpoint", Kind::Decimal3),
        ],
    );
    for (p, [pass1, passk, gds]) in curves {
        for c in [pass1, passk, gds] {
            let mut row = key(p).to_vec();
            row.push(Datum::text(c.metric));
            row.push(Datum::int(c.points.len()));
            row.push(Datum::num(rds(c, primary).ok()));
            row.extend(Regressor::ALL.map(|r| Datum::num(rds(c, r).ok())));
            t.push(row);
        }
    }
    t.notes.push(format!("slope uses {primary}."));
    t
}

fn gds_pass_table(pops: &BTreeMap<Population, Vec<TaskOutcomeGroup>>, curves: &BTreeMap<Population, [MetricCurve; 3]>) -> Table {
    let mut t = Table::new(
        "gds_pass",
        "GDS against pass@1, with early-failure rate",
        vec![
            col("model", Kind::Text),
            col("scaffold", Kind::Text),
            col("bucket", Kind::Text),
            col("n_episodes", Kind::Integer),
            col("pass1", Kind::Percent),
            col("gds", Kind::Decimal2),
            col("gap", Kind::Decimal2),
            col("early_failure", Kind::Percent),
        ],
    );
    for (p, gs) in pops {
        let [pass1, _, gds] = &curves[p];
        let early = early_failure_rate(gs);
        for (&b, pt) in &pass1.points {
            let g = gds.value(b).unwrap_or(f64::NAN);
            let mut row = bucket_row(p, b);
            row.extend([
                Datum::int(pt.n_episodes),
                Datum::Num(pt.value),
                Datum::Num(g),
                Datum::Num(g - pt.value),
                Datum::num(early.get(&b).map(|c| c.value)),
            ]);
            t.push(row);
        }
    }
    t.notes.push("gap is GDS minus pass@1.".into());
    t
}

fn vaf_table(pops: &BTreeMap<Population, Vec<TaskOutcomeGroup>>, options: &PipelineOptions) -> Result<Table, metrics_error::E> {
    let mut t = Table::new(
        "vaf",
        "Variance amplification factor with bootstrap interval",
        vec![
            col("model", Kind::Text),
            col("scaffold", Kind::Text),
            col("vaf", Kind::Decimal2),
            col("ci_low", Kind::Decimal2),
            col("ci_high", Kind::Decimal2),
            col("numerator_buckets", Kind::List),
            col("denominator_buckets", Kind::List),
            col("n_num_tasks", Kind::Integer),
            col("n_den_tasks", Kind::Integer),
            col("status", Kind::Text),
        ],
    );
    let config = BootstrapConfig {
        resamples: options.bootstrap_resamples,
        level: options.confidence_level,
        seed: options.seed,
    };
    let names = |s: &BTreeSet<Bucket>| Datum::List(s.iter().map(|b| b.to_string()).collect());
    for (p, gs) in pops {
        let mut row = key(p).to_vec();
        match vaf_with_ci(&p.0, gs, &options.vaf_numerator, &options.vaf_denominator, &config) {
            Ok(v) => row.extend([
                Datum::Num(v.vaf),
                Datum::Num(v.ci_low),
                Datum::Num(v.ci_high),
                names(&options.vaf_numerator),
                names(&options.vaf_denominator),
                Datum::int(v.n_num_tasks),
                Datum::int(v.n_den_tasks),
                Datum::text("ok"),
            ]),
            Err(e @ metrics_error::E::InvalidArgument(_)) => return Err(e),
            Err(e) => {
                let (num, den) = metrics::split_task_pass1(gs, &options.vaf_numerator, &options.vaf_denominator)?;
                row.extend([
                    Datum::Missing,
                    Datum::Missing,
                    Datum::Missing,
                    names(&options.vaf_numerator),
                    names(&options.vaf_denominator),
                    Datum::int(num.len()),
                    Datum::int(den.len()),
                    Datum::text(e),
                ]);
            }
        }
        t.push(row);
    }
    t.notes.push(format!(
        "Percentile bootstrap, {} resamples, seed {}; numerator and denominator tasks resampled independently.",
        options.bootstrap_resamples, options.seed
    ));
    Ok(t)
}

mod metrics_error {
    pub use crate::error::MetricError as E;
}

fn domain_table(groups: &[TaskOutcomeGroup]) -> Result<Table, metrics_error::E> {
    let mut t = Table::new(
        "domain",
        "GDS by domain and bucket",
        vec![
            col("scaffold", Kind::Text),
            col("domain", Kind::Text),
            col("short", Kind::Decimal2),
            col("medium", Kind::Decimal2),
            col("long", Kind::Decimal2),
            col("very_long", Kind::Decimal2),
            col("drop", Kind::Decimal2),
            col("n_episodes", Kind::Integer),
        ],
    );
    for scaffold in Scaffold::ALL {
        let gs: Vec<TaskOutcomeGroup> = groups.iter().filter(|g| g.scaffold == scaffold).cloned().collect();
        if gs.is_empty() {
            continue;
        }
        for row in domain_stratify(&gs, Metric::Gds)? {
            let mut out = vec![Datum::text(scaffold), Datum::text(row.domain)];
            out.extend(Bucket::ALL.map(|b| Datum::num(row.cells.get(&b).map(|c| c.value))));
            out.push(Datum::num(row.drop));
            out.push(Datum::int(row.cells.values().map(|c| c.n).sum()));
            t.push(out);
        }
    }
    t.notes.push("drop is very_long minus short.".into());
    Ok(t)
}

fn scaffold_table(rows: &[metrics::ScaffoldDelta]) -> Table {
    let mut t = Table::new(
        "scaffold_delta",
        "Memory against plain scaffold on mean GDS",
        vec![
            col("model", Kind::Text),
            col("react", Kind::Decimal2),
            col("memory", Kind::Decimal2),
            col("delta", Kind::Decimal2),
            col("effect", Kind::Text),
            col("n_react", Kind::Integer),
            col("n_memory", Kind::Integer),
        ],
    );
    for r in rows {
        t.push(vec![
            Datum::text(&r.model_id),
            Datum::Num(r.react),
            Datum::Num(r.memory),
            Datum::Num(r.delta),
            Datum::text(r.label),
            Datum::int(r.n_react),
            Datum::int(r.n_memory),
        ]);
    }
    t
}

fn geometric_table(curves: &BTreeMap<Population, [MetricCurve; 3]>, exponents: &BTreeMap<Bucket, f64>) -> Result<Table, metrics_error::E> {
    let mut t = Table::new(
        "geometric",
        "Observed pass@1 against the geometric baseline",
        vec![
            col("model", Kind::Text),
            col("scaffold", Kind::Text),
            col("bucket", Kind::Text),
            col("exponent", Kind::Decimal2),
            col("extrapolated", Kind::Flag),
            col("predicted", Kind::Percent),
            col("observed", Kind::Percent),
            col("ratio", Kind::Decimal2),
        ],
    );
    for (p, [pass1, _, _]) in curves {
        let Some(p_short) = pass1.value(Bucket::Short) else {
            continue;
        };
        let predicted = geometric_baseline(p_short, exponents)?;
        for (&b, &pred) in &predicted {
            let Some(obs) = pass1.value(b) else {
                continue;
            };
            let s = superlinearity_ratio(pred, obs);
            let mut row = bucket_row(p, b);
            row.extend([
                Datum::Num(exponents[&b]),
                Datum::Flag(exponent_is_extrapolated(b)),
                Datum::Num(pred),
                Datum::Num(obs),
                Datum::Num(s.ratio),
            ]);
            t.push(row);
        }
    }
    t.notes.push("ratio is predicted over observed; above 1 means faster than geometric decay.".into());
    Ok(t)
}

fn decomposition_table(curves: &BTreeMap<Population, [MetricCurve; 3]>) -> Table {
    let mut t = Table::new(
        "decomposition",
        "Pass@1 recovered by decomposing very long tasks into short ones",
        vec![
            col("model", Kind::Text),
            col("scaffold", Kind::Text),
            col("short", Kind::Percent),
            col("very_long", Kind::Percent),
            col("gain", Kind::Percent),
        ],
    );
    for (p, [pass1, _, _]) in curves {
        let mut row = key(p).to_vec();
        row.extend([
            Datum::num(pass1.value(Bucket::Short)),
            Datum::num(pass1.value(Bucket::VeryLong)),
            Datum::num(metrics::decomposition_gain(pass1).ok()),
        ]);
        t.push(row);
    }
    t
}

fn mop_tables(records: &[EpisodeRecord<'_>], results: &[MopResult], options: &PipelineOptions) -> Vec<Table> {
    let observations: Vec<MopObservation> = records
        .iter()
        .zip(results)
        .map(|(r, m)| MopObservation {
            model_id: r.model().to_string(),
            scaffold: r.scaffold(),
            bucket: r.bucket(),
            onset_step: m.onset_step,
            too_short: m.too_short,
        })
        .collect();
    let mut melt = Table::new(
        "meltdown",
        "Meltdown rate and median onset step",
        vec![
            col("model", Kind::Text),
            col("scaffold", Kind::Text),
            col("bucket", Kind::Text),
            col("n_episodes", Kind::Integer),
            col("n_events", Kind::Integer),
            col("rate", Kind::Percent),
            col("median_onset", Kind::Integer),
            col("n_too_short", Kind::Integer),
        ],
    );
    for c in meltdown_table(&observations) {
        melt.push(vec![
            Datum::text(&c.model_id),
            Datum::text(c.scaffold),
            Datum::text(c.bucket),
            Datum::int(c.n_episodes),
            Datum::int(c.n_events),
            Datum::Num(c.rate),
            c.median_onset.map_or(Datum::Missing, |s| Datum::Int(s.into())),
            Datum::int(c.n_too_short),
        ]);
    }
    melt.notes.push(format!(
        "Median onset is the lower median, shown only for cells with at least {} events.",
        crate::mop::MIN_EVENTS_FOR_MEDIAN
    ));

    let mut pre: BTreeMap<(String, Scaffold, Bucket), (usize, Vec<f64>)> = BTreeMap::new();
    for (r, m) in records.iter().zip(results) {
        if let Some(onset) = m.onset_step {
            let e = pre.entry((r.model().to_string(), r.scaffold(), r.bucket())).or_default();
            e.0 += 1;
            if let Ok(s) = entropy_precursor(&m.entropy_series, onset, options.precursor_lookback) {
                e.1.push(s);
            }
        }
    }
    let mut precursor = Table::new(
        "precursor",
        "Entropy slope before meltdown onset",
        vec![
            col("model", Kind::Text),
            col("scaffold", Kind::Text),
            col("bucket", Kind::Text),
            col("n_events", Kind::Integer),
            col("n_measured", Kind::Integer),
            col("mean_slope", Kind::Decimal3),
        ],
    );
    for ((model, scaffold, bucket), (n, slopes)) in pre {
        let mean = (!slopes.is_empty()).then(|| slopes.iter().sum::<f64>() / slopes.len() as f64);
        precursor.push(vec![
            Datum::text(model),
            Datum::text(scaffold),
            Datum::text(bucket),
            Datum::int(n),
            Datum::int(slopes.len()),
            Datum::num(mean),
        ]);
    }
    precursor.notes.push(format!(
        "Least-squares slope of window entropy over the {} steps before onset, in bits per step.",
        options.precursor_lookback
    ));

    let mut guards: BTreeMap<Population, [usize; 6]> = BTreeMap::new();
    for r in records {
        let g = replay_guards(r.episode, &options.guards);
        let c = guards.entry((r.model().to_string(), r.scaffold())).or_default();
        c[0] += 1;
        c[1] += usize::from(g.loop_trigger_step.is_some());
        c[2] += usize::from(r.episode.termination == Termination::LoopDetected);
        c[3] += usize::from(g.budget_trigger_step.is_some());
        c[4] += usize::from(r.episode.termination == Termination::BudgetExceeded);
        c[5] += usize::from(g.nudge_exhausted);
    }
    let mut guard = Table::new(
        "guards",
        "Replayed circuit breakers against recorded terminations",
        vec![
            col("model", Kind::Text),
            col("scaffold", Kind::Text),
            col("n_episodes", Kind::Integer),
            col("loop_replayed", Kind::Integer),
            col("loop_recorded", Kind::Integer),
            col("budget_replayed", Kind::Integer),
            col("budget_recorded", Kind::Integer),
            col("nudges_exhausted", Kind::Integer),
        ],
    );
    for (p, c) in guards {
        let mut row = key(&p).to_vec();
        row.extend(c.map(Datum::int));
        guard.push(row);
    }
    guard.notes.push(format!(
        "Loop: {} repeats of one (tool, args) within {} steps. Budget: {} input tokens.",
        options.guards.loop_count, options.guards.loop_window, options.guards.budget_tokens
    ));
    vec![melt, precursor, guard]
}

fn cost_tables(episodes: &[crate::model::Episode], pricing: &[PricingEntry], per_episode: bool) -> Result<Vec<Table>, ReportError> {
    let report = compute_cost(episodes, pricing)?;
    let mut t = Table::new(
        "cost",
        "Token cost by model",
        vec![
            col("model", Kind::Text),
            col("episodes", Kind::Integer),
            col("tokens_in", Kind::Integer),
            col("tokens_out", Kind::Integer),
            col("cost", Kind::Decimal2),
        ],
    );
    for (m, c) in &report.per_model {
        t.push(vec![
            Datum::text(m),
            Datum::int(c.episodes),
            Datum::Int(c.tokens_in as i64),
            Datum::Int(c.tokens_out as i64),
            Datum::Num(c.cost),
        ]);
    }
    t.push(vec![
        Datum::text("TOTAL"),
        Datum::int(report.per_episode.len()),
        Datum::Int(report.per_model.values().map(|c| c.tokens_in).sum::<u64>() as i64),
        Datum::Int(report.per_model.values().map(|c| c.tokens_out).sum::<u64>() as i64),
        Datum::Num(report.total),
    ]);
    t.notes.push("Includes infra-error episodes, which consumed tokens. TOTAL is the sum of per-episode costs.".into());
    let mut tables = vec![t];
    if per_episode {
        let mut e = Table::new(
            "cost_episodes",
            "Token cost by episode",
            vec![
                col("episode_id", Kind::Text),
                col("model", Kind::Text),
                col("tokens_in", Kind::Integer),
                col("tokens_out", Kind::Integer),
                col("cost", Kind::Decimal3),
            ],
        );
        for c in report.per_episode {
            e.push(vec![
                Datum::Text(c.episode_id),
                Datum::Text(c.model_id),
                Datum::Int(c.tokens_in as i64),
                Datum::Int(c.tokens_out as i64),
                Datum::Num(c.cost),
            ]);
        }
        tables.push(e);
    }
    Ok(tables)
}

fn intake_table(study: &Study) -> Table {
    let c = study.counts;
    let mut t = Table::new(
        "intake",
        "Where every input record went",
        vec![col("outcome", Kind::Text), col("records", Kind::Integer)],
    );
    for (name, n) in [
        ("lines", c.lines),
        ("analyzed", c.analyzed),
        ("infra_excluded", c.infra_excluded),
        ("validation_errors", c.validation_errors),
        ("duplicates_dropped", c.duplicates_dropped),
    ] {
        t.push(vec![Datum::text(name), Datum::int(n)]);
    }
    t
}

fn validation_table(study: &Study) -> Table {
    let mut t = Table::new(
        "validation",
        "Validation issues",
        vec![
            col("source", Kind::Text),
            col("id", Kind::Text),
            col("line", Kind::Integer),
            col("severity", Kind::Text),
            col("code", Kind::Text),
            col("message", Kind::Text),
        ],
    );
    for w in &study.registry.warnings {
        t.push(vec![
            Datum::text("registry"),
            Datum::text(&w.task_id),
            Datum::int(w.line),
            Datum::text("warning"),
            Datum::text(w.code),
            Datum::text(&w.message),
        ]);
    }
    let line = |r: &ValidationReport| r.line.map_or(Datum::Missing, Datum::int);
    for r in &study.reports {
        for (severity, issues) in [("error", &r.errors), ("warning", &r.warnings)] {
            for i in issues {
                t.push(vec![
                    Datum::text("episodes"),
                    Datum::text(&r.episode_id),
                    line(r),
                    Datum::text(severity),
                    Datum::text(&i.code),
                    Datum::text(&i.message),
                ]);
            }
        }
    }
    t
}
