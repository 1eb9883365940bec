use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use offkit::commands::{check_config, load_config, EXIT_OK};
use offkit::{cmd_constraints, cmd_energy, CliError, ConstraintsArgs, EnergyArgs, ModelKind};

/// Energy and offloading-constraint analysis for mobile application traces.
#[derive(Parser)]
#[command(name = "offkit", version)]
struct Cli {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Energy model, overriding the configuration.
    #[arg(long, global = true, value_enum)]
    model: Option<ModelKind>,
    /// Print the effective configuration to stdout and exit.
    #[arg(long)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Attribute traffic to call trees and bound per-method energy.
    Energy {
        #[arg(long)]
        packets: PathBuf,
        #[arg(long)]
        methods: PathBuf,
        #[arg(long)]
        out_dot: PathBuf,
        #[arg(long)]
        out_report: PathBuf,
        /// Also write the flow and packet attribution.
        #[arg(long)]
        out_assignment: Option<PathBuf>,
    },
    /// Check methods for offloading constraints.
    Constraints {
        #[arg(long)]
        facts: PathBuf,
        #[arg(long)]
        out_findings: PathBuf,
        #[arg(long)]
        out_stats: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(model) = cli.model {
        config.model = model;
    }
    check_config(&config, "--model")?;

    if cli.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let stderr = io::stderr();
    let mut diag = stderr.lock();
    match cli.command {
        Some(Command::Energy { packets, methods, out_dot, out_report, out_assignment }) => {
            cmd_energy(&EnergyArgs { packets, methods, out_dot, out_report, out_assignment }, &config, &mut diag)
        }
        Some(Command::Constraints { facts, out_findings, out_stats }) => {
            cmd_constraints(&ConstraintsArgs { facts, out_findings, out_stats }, &config, &mut diag)
        }
        None => Cli::command().error(ErrorKind::MissingSubcommand, "a subcommand is required").exit(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
