//! `occtrack`: run Monte Carlo batches of the multi-robot tracking simulation and analyze their
//! traces.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use occtrack_core::harness::{
    canonical_scenario, export_coverage, export_events, export_sankey, load_scenario, run_batch, BatchSummary, RunConfig,
    ScenarioConfig, TrialTrace, CANONICAL,
};
use occtrack_core::planning::{Algorithm, OcclusionMode};

const SUMMARY_FILE: &str = "run.json";

#[derive(Parser, Debug)]
#[command(name = "occtrack", version, about = "Multi-robot active target tracking under unknown occlusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a batch of seeded trials and write one trace per trial.
    Run(RunArgs),
    /// Summarize the traces of a previous run.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgArg {
    Sma,
    Dec,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OcclusionArg {
    Apriori,
    Dynamic,
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Emit {
    Sankey,
    Coverage,
    Events,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Scenario JSON file, or the name of a built-in scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long, value_enum)]
    alg: AlgArg,
    #[arg(long)]
    horizon: usize,
    #[arg(long, value_enum)]
    occlusion: OcclusionArg,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; `OCCTRACK_OUT` is used when the flag is absent.
    #[arg(long, env = "OCCTRACK_OUT")]
    out: PathBuf,
    /// Particles per planner solve.
    #[arg(long)]
    pso_swarm: Option<usize>,
    /// Iterations per planner solve.
    #[arg(long)]
    pso_iterations: Option<usize>,
}

#[derive(clap::Args, Debug)]
struct AnalyzeArgs {
    /// Directory written by `occtrack run`.
    #[arg(long)]
    traces: PathBuf,
    #[arg(long, value_enum)]
    emit: Emit,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn resolve_scenario(arg: &str) -> Result<ScenarioConfig> {
    let path = Path::new(arg);
    if path.exists() {
        return load_scenario(path).with_context(|| format!("loading scenario {}", path.display()));
    }
    if CANONICAL.contains(&arg) {
        return Ok(canonical_scenario(arg)?);
    }
    bail!(
        "scenario `{arg}` is neither a file nor a built-in scenario ({})",
        CANONICAL.join(", ")
    )
}

fn trace_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("trial_{index:04}.json"))
}

fn run(args: RunArgs) -> Result<()> {
    let scenario = resolve_scenario(&args.scenario)?;
    let alg = match args.alg {
        AlgArg::Sma => Algorithm::SmaNbo,
        AlgArg::Dec => Algorithm::DecPomdp,
    };
    let mode = match args.occlusion {
        OcclusionArg::Apriori => OcclusionMode::Apriori,
        OcclusionArg::Dynamic => OcclusionMode::Dynamic,
        OcclusionArg::None => OcclusionMode::None,
    };
    let mut config = RunConfig::new(alg, args.horizon, mode, args.trials, args.seed);
    if let Some(n) = args.pso_swarm {
        config.pso.swarm_size = n;
    }
    if let Some(n) = args.pso_iterations {
        config.pso.iterations = n;
    }

    let batch = run_batch(&scenario, &config)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for outcome in &batch.outcomes {
        if let Some(trace) = &outcome.trace {
            let path = trace_path(&args.out, outcome.index);
            fs::write(&path, trace.to_json()?).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    let summary = batch.summary();
    fs::write(args.out.join(SUMMARY_FILE), summary.to_json()?)?;

    let agg = &summary.aggregates;
    println!(
        "{}: {} trials completed, {} failed; final goal frequency {:.3}",
        scenario.name,
        agg.completed,
        agg.failed,
        agg.final_goal_freq()
    );
    for f in &summary.failures {
        eprintln!("trial {} (seed {}) failed: {}", f.index, f.seed, f.error);
    }
    if agg.completed == 0 {
        bail!("every trial failed");
    }
    Ok(())
}

fn load_traces(dir: &Path) -> Result<(BatchSummary, Vec<TrialTrace>)> {
    let summary_path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?;
    let summary = BatchSummary::from_json(&text).with_context(|| format!("parsing {}", summary_path.display()))?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trial_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    let mut traces = Vec::with_capacity(paths.len());
    for p in paths {
        let text = fs::read_to_string(&p)?;
        traces.push(TrialTrace::from_json(&text).with_context(|| format!("parsing {}", p.display()))?);
    }
    if traces.is_empty() {
        bail!("no trial traces found in {}", dir.display());
    }
    Ok((summary, traces))
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let (summary, traces) = load_traces(&args.traces)?;
    let refs: Vec<&TrialTrace> = traces.iter().collect();
    let scenario = &summary.scenario;
    let text = match (args.emit, args.format) {
        (Emit::Sankey, Format::Csv) => export_sankey(&refs, scenario)?.to_csv(),
        (Emit::Sankey, Format::Json) => export_sankey(&refs, scenario)?.to_json()?,
        (Emit::Coverage, Format::Csv) => export_coverage(&refs, scenario)?.to_csv(),
        (Emit::Coverage, Format::Json) => export_coverage(&refs, scenario)?.to_json()?,
        (Emit::Events, format) => {
            let events = export_events(&refs, scenario)?;
            match format {
                Format::Json => occtrack_core::harness::export::events_to_json(&events)?,
                Format::Csv => occtrack_core::harness::export::events_to_csv(&events),
            }
        }
    };
    match args.output {
        Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Analyze(args) => analyze(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
