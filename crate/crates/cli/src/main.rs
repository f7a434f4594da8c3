use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slngeo_cli::commands::{self, ClassifyKind};
use slngeo_cli::config::{self, ScenarioConfig, SweepConfig};
use slngeo_cli::CliError;

/// Geodesics of SL(n) with the Hilbert-Schmidt metric.
#[derive(Debug, Parser)]
#[command(name = "slngeo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a scenario and write its trajectory and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for output files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a line `A + tB` or an exponential curve `A e^{tB}`.
    Classify {
        #[arg(long, value_enum)]
        kind: ClassifyKind,
        /// JSON file holding `A` as nested arrays.
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Write the semi-axis curves of a preset figure.
    Figures {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
        id: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, requires = "t_max", allow_hyphen_values = true)]
        t_min: Option<f64>,
        #[arg(long, requires = "t_min")]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Integrate an ensemble of random scenarios.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

// A closed pipe (`slngeo ... | head`) is not an error.
fn emit(text: &str) -> Result<(), CliError> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.into()))?;
    emit(&text)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg: ScenarioConfig = config::load(&config)?;
            let summary = commands::run(&cfg, out.as_deref())?;
            print_json(&summary)?;
            if let Some(t) = summary.truncation {
                return Err(CliError::Truncated(t));
            }
        }
        Command::Classify { kind, a, b } => {
            let read = |p: &PathBuf| {
                slngeo::io::read_matrix(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            };
            emit(&commands::classify(kind, &read(&a)?, &read(&b)?)?.join("\n"))?;
        }
        Command::Figures { id, out, t_min, t_max, dt } => {
            let window = t_min.zip(t_max);
            print_json(&commands::figures(id, window, dt, &out)?)?;
        }
        Command::Sweep { config, out } => {
            let cfg: SweepConfig = config::load(&config)?;
            let path = commands::sweep(&cfg, out.as_deref())?;
            emit(&path.display().to_string())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("slngeo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
