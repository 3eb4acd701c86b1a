use std::path::PathBuf;
use std::process::ExitCode;

use bandtrace_cli::{parse_config, run_command, CliError, Command};
use bandtrace_core::Mode;
use clap::Parser;

#[derive(Debug, Parser)]
#[command(
    name = "bandtrace",
    version,
    about = "Orthogonal polynomials on several intervals"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `output_dir` from the config, else `bandtrace-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print fit slopes and verdicts.
    #[arg(long)]
    summary: bool,
    #[arg(long)]
    n_max: Option<usize>,
    /// asymptotic | exact-n
    #[arg(long)]
    mode: Option<Mode>,
}

fn run(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::ConfigIo {
        path: args.config.clone(),
        source,
    })?;
    let config = parse_config(&text)?.with_overrides(args.n_max, args.mode)?;
    let artifacts = run_command(&config, args.command)?;
    let dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("bandtrace-out"));
    artifacts.write(&dir)?;
    if args.summary {
        for line in &artifacts.summary {
            println!("{line}");
        }
    }
    match artifacts.failure {
        Some(f) => Err(CliError::Verification(f)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bandtrace: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
