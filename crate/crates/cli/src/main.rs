use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vi_cli::{format_summary, parse_config, run_experiment, HarnessError, Overrides, Preset};

#[derive(Parser)]
#[command(
    name = "visolve",
    version,
    about = "Run variational inequality solver experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace and summary CSVs.
    Run(RunArgs),
    /// List the available problem presets.
    Presets,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    preset: Option<String>,
    /// Problem dimension (example1, example2).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated algorithm names.
    #[arg(long)]
    algos: Option<String>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    stop_tol: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// key=value file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Record per-iteration wall clock in the traces.
    #[arg(long)]
    timing: bool,
}

fn run(args: RunArgs) -> Result<(), HarnessError> {
    let preset = args
        .preset
        .as_deref()
        .map(str::parse::<Preset>)
        .transpose()?;
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let mut spec = parse_config(&text, preset)?;
    spec.apply(&Overrides {
        m: args.m,
        seed: args.seed,
        algos: args.algos,
        max_iters: args.max_iters,
        stop_tol: args.stop_tol,
        out_dir: args.out_dir,
        timing: args.timing,
    })?;
    let summary = run_experiment(&spec)?;
    print!("{}", format_summary(&summary));
    println!("output written to {}", spec.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for p in Preset::ALL {
                println!("{:<10} {}", p.name(), p.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => match run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(if e.is_usage() { 2 } else { 1 })
            }
        },
    }
}
