use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use haltsim::experiment::{self, ConfigError, Overrides, RunError};

/// Thread-count override for the Monte Carlo pool.
const THREADS_ENV: &str = "HALTSIM_THREADS";

#[derive(Parser)]
#[command(name = "haltsim", version, about = "Run false-coin device experiments from a JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gaussian probes on a finite coin system
    Finite(Common),
    /// Analytic bounds and stopping times only
    Bounds(Common),
    /// Section measures of the tentative solution
    Tentative(Common),
    /// Brownian probes on a perturbed time scale
    Brownian(Common),
    /// The device against an encoded toy program
    Halting(Common),
    /// Whatever kind the config names
    Run(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the trial count.
    #[arg(long)]
    trials: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (expected, args) = match cli.command {
        Command::Finite(a) => (Some("finite"), a),
        Command::Bounds(a) => (Some("bounds"), a),
        Command::Tentative(a) => (Some("tentative"), a),
        Command::Brownian(a) => (Some("brownian"), a),
        Command::Halting(a) => (Some("halting"), a),
        Command::Run(a) => (None, a),
    };
    match execute(expected, &args) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("haltsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(expected: Option<&str>, args: &Common) -> Result<Vec<PathBuf>, RunError> {
    configure_threads()?;
    let origin = args.config.display().to_string();
    let src = fs::read_to_string(&args.config).map_err(|source| RunError::Io {
        path: args.config.clone(),
        source,
    })?;
    let overrides = Overrides {
        seed: args.seed,
        output: args.out.clone(),
        trials: args.trials,
    };
    let loaded = experiment::load_config(&src, &origin, &overrides)?;
    let kind = loaded.config.experiment.kind();
    if let Some(want) = expected.filter(|&w| w != kind) {
        return Err(RunError::Config(ConfigError {
            line: src.lines().position(|l| l.contains("\"kind\"")).map(|i| i + 1),
            column: None,
            origin,
            message: format!("subcommand {want} cannot run a {kind} config"),
        }));
    }
    let output = experiment::run(&loaded)?;
    output.write(&loaded.output)
}

fn configure_threads() -> Result<(), RunError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        RunError::Config(ConfigError {
            origin: THREADS_ENV.into(),
            line: None,
            column: None,
            message: format!("expected a thread count, got {raw:?}"),
        })
    })?;
    // A pool that already exists keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
