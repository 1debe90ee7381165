use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agent_reliability::metrics::{CiMethod, Regressor};
use agent_reliability::model::{episode_line, registry_line, Bucket, Scaffold};
use agent_reliability::mop::{load_labels, MopConfig};
use agent_reliability::report::{
    emit_report, run_cost, run_mop, run_pipeline, run_validate, Format, MopCalibration, PipelineInputs,
    PipelineOptions, ReportBundle,
};
use agent_reliability::sim::{
    build_study, failure_counts, parse_cell_targets, parse_meltdown_targets, predicted_failcount_variance,
    predicted_success_bound, simulate_agent_study, simulate_steps, trajectory_corpus, AgentStudySpec,
    BlueprintOptions, CorpusSpec, ErrorModel, SimConfig, SyntheticStudy,
};
use agent_reliability::ReportError;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_PIPELINE: u8 = 3;

/// Reliability analysis for long-horizon agent runs.
#[derive(Parser)]
#[command(name = "agentrel", version)]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full metric pipeline and write every table.
    Analyze(AnalyzeArgs),
    /// Meltdown detection and threshold calibration only.
    Mop(MopArgs),
    /// Generate synthetic registries and logs.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Check logs against the registry; exits 2 on any error.
    Validate(ValidateArgs),
    /// Token cost per model and overall.
    Cost(CostArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Episode log files (JSONL); later files lose duplicate ids to earlier ones.
    #[arg(long, required = true, num_args = 1..)]
    logs: Vec<PathBuf>,
    /// Task registry (JSONL).
    #[arg(long)]
    registry: PathBuf,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: PathBuf,
    /// Output formats, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "csv,json,markdown")]
    format: Vec<Format>,
}

#[derive(Args)]
struct MopFlags {
    #[arg(long, default_value_t = MopConfig::default().theta)]
    mop_theta: f64,
    #[arg(long, default_value_t = MopConfig::default().delta)]
    mop_delta: f64,
    #[arg(long, default_value_t = MopConfig::default().window)]
    mop_window: usize,
    /// Also write per-episode entropy series (entropy_series.jsonl).
    #[arg(long)]
    entropy_series: bool,
}

impl MopFlags {
    fn config(&self) -> MopConfig {
        MopConfig {
            window: self.mop_window,
            theta: self.mop_theta,
            delta: self.mop_delta,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Pricing file (JSONL); adds the cost tables.
    #[arg(long)]
    pricing: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bootstrap resamples for the VAF interval (at least 1000).
    #[arg(long, default_value_t = 10_000)]
    bootstrap_b: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = CiMethod::Wald)]
    ci: CiMethod,
    #[command(flatten)]
    mop: MopFlags,
    /// VAF numerator buckets, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "long,very_long")]
    vaf_num: Vec<Bucket>,
    /// VAF denominator buckets, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "short,medium")]
    vaf_den: Vec<Bucket>,
    /// Duration regressor for the decay slope.
    #[arg(long, default_value_t = Regressor::BucketIndex1To4)]
    regressor: Regressor,
    /// Include a per-episode cost table.
    #[arg(long)]
    episode_costs: bool,
}

#[derive(Args)]
struct MopArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
    #[command(flatten)]
    mop: MopFlags,
    /// Labels file ({"episode_id", "meltdown"} per line) for the F1 grid search.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Set θ to this percentile (0..1) of baseline per-episode maximum entropy, δ to 0.
    #[arg(long)]
    calibrate_baseline: Option<f64>,
    /// Buckets whose episodes form the calibration baseline.
    #[arg(long, value_delimiter = ',', default_value = "short")]
    baseline_buckets: Vec<Bucket>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Also write the validation tables here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "csv,json,markdown")]
    format: Vec<Format>,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long, required = true, num_args = 1..)]
    logs: Vec<PathBuf>,
    #[arg(long)]
    pricing: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
    /// Include a per-episode cost table.
    #[arg(long)]
    episode_costs: bool,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Agent study with a known pass probability per bucket.
    Study {
        /// Pass probability per bucket, e.g. short=0.9 (repeatable).
        #[arg(long = "p", required = true, value_parser = parse_bucket_p)]
        p: Vec<(Bucket, f64)>,
        #[arg(long, default_value_t = 33)]
        tasks_per_bucket: usize,
        #[arg(long, default_value_t = 3)]
        repeats: u32,
        #[arg(long, default_value = "sim-agent")]
        model: String,
        #[arg(long, default_value_t = Scaffold::React)]
        scaffold: Scaffold,
        /// Attach coherent tool-call trajectories.
        #[arg(long)]
        trajectories: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Study matching per-cell pass counts and meltdown targets.
    Blueprint {
        /// Cell targets CSV.
        #[arg(long)]
        cells: PathBuf,
        /// Meltdown targets CSV.
        #[arg(long)]
        meltdowns: Option<PathBuf>,
        #[arg(long, default_value_t = 33)]
        tasks_per_cell: usize,
        #[arg(long, default_value_t = 3)]
        repeats: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Labeled rote, coherent and spiral trajectories for meltdown calibration.
    Trajectories {
        #[arg(long, default_value_t = 0)]
        rote: usize,
        #[arg(long, default_value_t = 25)]
        coherent: usize,
        #[arg(long, default_value_t = 25)]
        spiral: usize,
        #[arg(long, default_value_t = 40)]
        length: usize,
        #[arg(long, default_value_t = 20)]
        spiral_start: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Step-failure process summary: failure-count moments and all-success rate.
    Steps {
        #[arg(long, value_enum, default_value_t = ModelArg::Iid)]
        model: ModelArg,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 100_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the summary here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Iid,
    Exchangeable,
    Hazard,
}

fn parse_bucket_p(s: &str) -> Result<(Bucket, f64), String> {
    let (b, p) = s.split_once('=').ok_or("expected bucket=p")?;
    let p: f64 = p.parse().map_err(|e| format!("{p:?}: {e}"))?;
    Ok((b.parse()?, p))
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Failure {
        Failure {
            code: if e.is_input_error() { EXIT_INPUT } else { EXIT_PIPELINE },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn internal(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_PIPELINE,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = match cli.jobs {
        Some(0) => Err(usage("--jobs must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(internal(e.to_string())),
        },
        None => run(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("agentrel: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Analyze(a) => analyze(a),
        Command::Mop(a) => mop(a),
        Command::Simulate(s) => simulate(s),
        Command::Validate(a) => validate(a),
        Command::Cost(a) => cost(a),
    }
}

fn inputs(i: &InputArgs, pricing: Option<PathBuf>) -> PipelineInputs {
    PipelineInputs {
        logs: i.logs.clone(),
        registry: Some(i.registry.clone()),
        pricing,
    }
}

fn emit(bundle: &ReportBundle, out: &OutputArgs) -> Result<(), Failure> {
    let files = emit_report(bundle, &out.format, &out.out)?;
    let c = bundle.metadata.counts;
    eprintln!(
        "{} episodes analyzed, {} infra excluded, {} rejected, {} duplicates; {} files in {}",
        c.analyzed,
        c.infra_excluded,
        c.validation_errors,
        c.duplicates_dropped,
        files.len(),
        out.out.display()
    );
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    if a.bootstrap_b < agent_reliability::metrics::MIN_RESAMPLES {
        return Err(usage(format!(
            "--bootstrap-b must be at least {}",
            agent_reliability::metrics::MIN_RESAMPLES
        )));
    }
    let options = PipelineOptions {
        seed: a.seed,
        bootstrap_resamples: a.bootstrap_b,
        confidence_level: a.level,
        ci_method: a.ci,
        regressor: a.regressor,
        vaf_numerator: a.vaf_num.into_iter().collect(),
        vaf_denominator: a.vaf_den.into_iter().collect(),
        mop: a.mop.config(),
        precursor_lookback: a.mop.mop_window as u32,
        entropy_series: a.mop.entropy_series,
        episode_costs: a.episode_costs,
        ..Default::default()
    };
    let bundle = run_pipeline(&inputs(&a.input, a.pricing), &options)?;
    emit(&bundle, &a.output)
}

fn mop(a: MopArgs) -> Result<(), Failure> {
    let labels = match &a.labels {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
            Some(load_labels(BufReader::new(file)).map_err(|e| input(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    let options = PipelineOptions {
        mop: a.mop.config(),
        precursor_lookback: a.mop.mop_window as u32,
        entropy_series: a.mop.entropy_series,
        ..Default::default()
    };
    let calibration = MopCalibration {
        labels,
        baseline_percentile: a.calibrate_baseline,
        baseline_buckets: a.baseline_buckets.into_iter().collect(),
    };
    let bundle = run_mop(&inputs(&a.input, None), &options, &calibration)?;
    emit(&bundle, &a.output)
}

fn validate(a: ValidateArgs) -> Result<(), Failure> {
    let (bundle, clean) = run_validate(&inputs(&a.input, None))?;
    let c = bundle.metadata.counts;
    println!(
        "lines {}  valid {}  infra {}  errors {}  duplicates {}",
        c.lines,
        c.analyzed + c.infra_excluded,
        c.infra_excluded,
        c.validation_errors,
        c.duplicates_dropped
    );
    if let Some(table) = bundle.table("validation") {
        for row in table.rows.iter().take(20) {
            let cells: Vec<String> = row.iter().map(|d| d.to_string()).collect();
            println!("  {}", cells.join("  "));
        }
        if table.rows.len() > 20 {
            println!("  ... {} more", table.rows.len() - 20);
        }
    }
    if let Some(out) = a.out {
        emit_report(&bundle, &a.format, &out)?;
    }
    if clean {
        Ok(())
    } else {
        Err(input(format!("{} records failed validation", c.validation_errors)))
    }
}

fn cost(a: CostArgs) -> Result<(), Failure> {
    let inputs = PipelineInputs {
        logs: a.logs,
        registry: None,
        pricing: Some(a.pricing),
    };
    let bundle = run_cost(&inputs, a.episode_costs)?;
    emit(&bundle, &a.output)
}

fn write_study(study: &SyntheticStudy, out: &Path) -> Result<(), Failure> {
    let fail = |p: &Path, e: std::io::Error| internal(format!("cannot write {}: {e}", p.display()));
    fs::create_dir_all(out).map_err(|e| fail(out, e))?;
    let mut registry = String::new();
    for t in &study.tasks {
        registry.push_str(&registry_line(t));
        registry.push('\n');
    }
    let path = out.join("registry.jsonl");
    fs::write(&path, registry).map_err(|e| fail(&path, e))?;
    let path = out.join("episodes.jsonl");
    let file = fs::File::create(&path).map_err(|e| fail(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for ep in &study.episodes {
        writeln!(w, "{}", episode_line(ep)).map_err(|e| fail(&path, e))?;
    }
    w.flush().map_err(|e| fail(&path, e))?;
    eprintln!(
        "{} tasks, {} episodes in {}",
        study.tasks.len(),
        study.episodes.len(),
        out.display()
    );
    Ok(())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn simulate(cmd: SimulateCommand) -> Result<(), Failure> {
    match cmd {
        SimulateCommand::Study {
            p,
            tasks_per_bucket,
            repeats,
            model,
            scaffold,
            trajectories,
            seed,
            out,
        } => {
            let mut spec = AgentStudySpec::new(p, tasks_per_bucket, repeats, seed);
            spec.model_id = model;
            spec.scaffold = scaffold;
            spec.trajectories = trajectories;
            let study = simulate_agent_study(&spec).map_err(|e| usage(e.to_string()))?;
            write_study(&study, &out)
        }
        SimulateCommand::Blueprint {
            cells,
            meltdowns,
            tasks_per_cell,
            repeats,
            seed,
            out,
        } => {
            let cells = parse_cell_targets(&read_text(&cells)?).map_err(|e| input(e.to_string()))?;
            let meltdowns = match meltdowns {
                Some(path) => parse_meltdown_targets(&read_text(&path)?).map_err(|e| input(e.to_string()))?,
                None => Vec::new(),
            };
            let options = BlueprintOptions {
                tasks_per_cell,
                repeats,
                seed,
            };
            let study = build_study(&cells, &meltdowns, &options).map_err(|e| input(e.to_string()))?;
            write_study(&study, &out)
        }
        SimulateCommand::Trajectories {
            rote,
            coherent,
            spiral,
            length,
            spiral_start,
            seed,
            out,
        } => {
            let spec = CorpusSpec {
                rote,
                coherent,
                spiral,
                length,
                spiral_start,
                seed,
            };
            let (study, labels) = trajectory_corpus(&spec).map_err(|e| usage(e.to_string()))?;
            write_study(&study, &out)?;
            let mut text = String::new();
            for (id, melt) in &labels {
                text.push_str(&serde_json::json!({ "episode_id": id, "meltdown": melt }).to_string());
                text.push('\n');
            }
            let path = out.join("labels.jsonl");
            fs::write(&path, text).map_err(|e| internal(format!("cannot write {}: {e}", path.display())))
        }
        SimulateCommand::Steps {
            model,
            epsilon,
            rho,
            gamma,
            horizon,
            episodes,
            seed,
            out,
        } => {
            let config = match model {
                ModelArg::Iid => SimConfig::iid(epsilon, horizon, episodes, seed),
                ModelArg::Exchangeable => SimConfig::exchangeable(epsilon, rho, horizon, episodes, seed),
                ModelArg::Hazard => SimConfig::hazard(epsilon, gamma, horizon, episodes, seed),
            };
            let steps = simulate_steps(&config).map_err(|e| usage(e.to_string()))?;
            let counts = failure_counts(&steps);
            let n = counts.len() as f64;
            let mean = counts.iter().sum::<usize>() as f64 / n;
            let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let all_success = counts.iter().filter(|&&c| c == 0).count() as f64 / n;
            let mut summary = serde_json::json!({
                "config": config,
                "mean_failures": mean,
                "failure_variance": var,
                "all_success_rate": all_success,
                "geometric_success": (1.0 - epsilon).powi(horizon as i32),
            });
            if config.model != ErrorModel::Hazard {
                let r = if config.model == ErrorModel::Iid { 0.0 } else { rho };
                summary["predicted_variance"] = predicted_failcount_variance(epsilon, r, horizon).into();
                summary["success_lower_bound"] = predicted_success_bound(epsilon, r, horizon).into();
            }
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
            match out {
                Some(path) => {
                    fs::write(&path, text).map_err(|e| internal(format!("cannot write {}: {e}", path.display())))
                }
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}
