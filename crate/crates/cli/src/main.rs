use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sparseloc_cli::config::{validate_config, Kind};
use sparseloc_cli::run::{derived_quantities, run_experiment};
use sparseloc_cli::{verify, CliError};

#[derive(Parser)]
#[command(
    name = "sparseloc",
    version,
    about = "Seeded, reproducible sparse-localization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output`, then `runs/<kind>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "SPARSELOC_THREADS", default_value_t = default_threads())]
    threads: usize,
    /// Only validate and print derived quantities.
    #[arg(long)]
    check: bool,
}

fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[derive(Subcommand)]
#[command(rename_all = "snake_case")]
enum Command {
    Norms(RunArgs),
    Kernel(RunArgs),
    Propagator(RunArgs),
    DecayCheck(RunArgs),
    Sparseness(RunArgs),
    Cook(RunArgs),
    Moments(RunArgs),
    DecayFit(RunArgs),
    SimonWolff(RunArgs),
    Thresholds(RunArgs),
    EdgeScan(RunArgs),
    Theorem2Cube(RunArgs),
    /// Run the acceptance suite.
    Verify {
        /// Run a single criterion.
        #[arg(long)]
        only: Option<u32>,
    },
}

fn run(kind: Kind, args: &RunArgs) -> Result<ExitCode, CliError> {
    let raw = std::fs::read_to_string(&args.config)?;
    let cfg = validate_config(&raw, Some(kind), args.seed).map_err(CliError::Config)?;
    if args.check {
        match derived_quantities(&cfg) {
            Ok(d) => println!("{}", serde_json::to_string_pretty(&d).unwrap_or_default()),
            Err(e) => eprintln!("derived quantities unavailable: {e}"),
        }
        return Ok(ExitCode::SUCCESS);
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs").join(kind.name()));
    let report = run_experiment(&cfg, &out, args.threads.max(1))?;
    for (name, pass) in &report.manifest.verdicts {
        println!("{name}: {}", if *pass { "pass" } else { "FAIL" });
    }
    println!("artifacts in {}", report.dir.display());
    Ok(if report.artifacts.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Verify { only } => {
            let ids: Vec<u32> = match only {
                Some(n) => vec![*n],
                None => verify::IDS.collect(),
            };
            let mut ok = true;
            for id in ids {
                let o = verify::run(id);
                println!("{}", o.line());
                ok &= o.pass;
            }
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
        Command::Norms(a) => (Kind::Norms, a),
        Command::Kernel(a) => (Kind::Kernel, a),
        Command::Propagator(a) => (Kind::Propagator, a),
        Command::DecayCheck(a) => (Kind::DecayCheck, a),
        Command::Sparseness(a) => (Kind::Sparseness, a),
        Command::Cook(a) => (Kind::Cook, a),
        Command::Moments(a) => (Kind::Moments, a),
        Command::DecayFit(a) => (Kind::DecayFit, a),
        Command::SimonWolff(a) => (Kind::SimonWolff, a),
        Command::Thresholds(a) => (Kind::Thresholds, a),
        Command::EdgeScan(a) => (Kind::EdgeScan, a),
        Command::Theorem2Cube(a) => (Kind::Theorem2Cube, a),
    };
    match run(kind, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
