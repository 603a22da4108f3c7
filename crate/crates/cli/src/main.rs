//! `gsmp`: validate, analyse, simulate and estimate GSMP models.
//!
//! Every command prints a human summary to stdout and, with `--out`, writes
//! a JSON document. Stochastic commands require `--seed`; their documents
//! are identical for any `--workers` value.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Outcome;

#[derive(Parser, Debug)]
#[command(name = "gsmp", version, about = "GSMP toolkit with fixed and variable delays")]
struct Cli {
    /// Write the machine-readable JSON report here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exit with status 2 when a refused guarantee produced warnings.
    #[arg(long, global = true)]
    deny_warnings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model file against every invariant.
    Validate(ModelArg),
    /// Summarize states, events and delay laws.
    Info(ModelArg),
    /// Build the region graph and decompose it into BSCCs.
    Regions(RegionsArgs),
    /// Run the single-ticking classifier and report the guarantee.
    Check(CheckArgs),
    /// Simulate one run and report partial frequencies.
    Simulate(SimulateArgs),
    /// Estimate reach probabilities and per-BSCC frequencies.
    Estimate(EstimateArgs),
    /// Run a reproduction experiment.
    Experiment(ExperimentArgs),
    /// List the built-in catalog.
    Catalog,
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Model file (`.toml`) or catalog key.
    model: String,
}

#[derive(Args, Debug)]
struct RegionsArgs {
    #[command(flatten)]
    model: ModelArg,
    /// Write a Graphviz rendering of the graph.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Include every region in the report.
    #[arg(long)]
    list: bool,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Args, Debug)]
struct TargetArg {
    /// Target states (default: the catalog entry's target).
    #[arg(long = "target", num_args = 1..)]
    target: Vec<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long)]
    seed: u64,
    /// Step budget.
    #[arg(long, default_value_t = 100_000, conflicts_with = "time")]
    steps: u64,
    /// Time budget instead of a step budget.
    #[arg(long)]
    time: Option<f64>,
    #[command(flatten)]
    target: TargetArg,
    /// Write every configuration of the run as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the checkpoint series as CSV.
    #[arg(long)]
    checkpoints: Option<PathBuf>,
    /// Checkpoint every k steps instead of at powers of two.
    #[arg(long)]
    every: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EstimateMethod {
    Mc,
    Grid,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    model: ModelArg,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = EstimateMethod::Mc)]
    method: EstimateMethod,
    #[command(flatten)]
    target: TargetArg,
    /// Runs for the reach estimate.
    #[arg(long, default_value_t = 1000)]
    reach_runs: usize,
    /// Last horizon of the reach estimate, in steps.
    #[arg(long, default_value_t = 1 << 16)]
    horizon: u64,
    /// Plateau threshold of the reach estimate.
    #[arg(long, default_value_t = 1e-3)]
    plateau_tolerance: f64,
    /// Independent runs per BSCC for the frequency estimate.
    #[arg(long, default_value_t = 4)]
    runs: usize,
    /// Steps per frequency run, burn-in included.
    #[arg(long, default_value_t = 1 << 20)]
    steps: u64,
    #[arg(long, default_value_t = 0.1)]
    burn_in: f64,
    #[arg(long, default_value_t = 32)]
    batches: usize,
    /// Confidence level of batch-means intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Grid truncation `n` (default: chosen from the model).
    #[arg(long)]
    n: Option<u32>,
    /// Kernel draws per grid cell.
    #[arg(long, default_value_t = 4096)]
    draws: u32,
    /// Average 4 quasi-random representatives per grid cell.
    #[arg(long)]
    refine: bool,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    #[arg(long, default_value_t = 100_000)]
    iterations: usize,
    /// Run grid estimation on models that are not single-ticking.
    #[arg(long)]
    force: bool,
    /// Write the reach history over doubling horizons as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExperimentName {
    Oscillation,
    SinkPlateau,
    SinkVisits,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    #[arg(long)]
    seed: u64,
    /// Model (default: fig1 for oscillation, fig2-sink for sink-plateau,
    /// fig2-cycled for sink-visits).
    #[arg(long)]
    model: Option<String>,
    /// Number of runs (default: 200, 10000, 1000).
    #[arg(long)]
    runs: Option<usize>,
    /// Horizon in attempts of three steps (default: 100000, 65536, 65536).
    #[arg(long)]
    horizon: Option<u64>,
    /// Write per-run results (oscillation, sink-visits) or the horizon
    /// history (sink-plateau) as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Info(a) => commands::info(&a.model),
        Command::Regions(a) => commands::regions(a),
        Command::Check(a) => commands::check(&a.model.model),
        Command::Simulate(a) => commands::simulate(a),
        Command::Estimate(a) => commands::estimate(a),
        Command::Experiment(a) => commands::experiment(a),
        Command::Catalog => commands::catalog(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    print!("{}", outcome.human);
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &cli.out {
        if let Err(e) = output::write_json(path, &outcome.document) {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    }
    if outcome.failed {
        return ExitCode::from(1);
    }
    if cli.deny_warnings && outcome.guarantee_warning {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
