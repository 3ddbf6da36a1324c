use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use hhc_cli::{configure_threads, parse_config, run_experiment, Command};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Run,
    Converge,
    StabilityScan,
    Equivalence,
    Bench,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Run => Command::Run,
            Cmd::Converge => Command::Converge,
            Cmd::StabilityScan => Command::StabilityScan,
            Cmd::Equivalence => Command::Equivalence,
            Cmd::Bench => Command::Bench,
        }
    }
}

/// Runs hyperbolic heat conduction experiments described by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "hhc", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run even when the parameters violate a stability condition.
    #[arg(long)]
    override_stability: bool,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<u8> {
    let cli = Cli::parse();
    let threads = std::env::var("HHC_THREADS").ok();
    configure_threads(threads.as_deref()).map_err(anyhow::Error::msg)?;

    let text =
        std::fs::read_to_string(&cli.config).with_context(|| format!("reading config {}", cli.config.display()))?;
    let parsed = parse_config(&text).with_context(|| format!("in {}", cli.config.display()))?;
    let mut config = parsed.config;
    let command = Command::from(cli.command);
    if config.command_declared && config.command != command {
        bail!("config declares command `{}` but `{command}` was requested", config.command);
    }
    config.command = command;
    config.override_stability |= cli.override_stability;
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }

    let report = run_experiment(&config)?;
    for w in &report.warnings {
        eprintln!("warning: overridden: {w}");
    }
    // A closed stdout (e.g. piped into `head`) must not turn a finished run into a failure.
    let mut out = std::io::stdout().lock();
    let _ = write!(out, "{}", report.table);
    let _ = writeln!(out, "manifest: {}", report.manifest.display());
    Ok(report.status.exit_code())
}
