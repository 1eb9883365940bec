//! The two pipelines behind the `energy` and `constraints` subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use offkit_core::calltree::{aggregate_traffic, build_call_tree, collapse_library_frames, emit_dot_all, emit_report};
use offkit_core::codefacts::{analyze_all, load_facts, render_findings, summarize_stats};
use offkit_core::correlator::{assign_flows_to_threads, associate_packets_to_calls};
use offkit_core::trace::{parse_method_trace, parse_packet_trace, segment_flows};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {msg}")]
    Input { path: String, msg: String },
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input { .. } => EXIT_INPUT,
            CliError::Config { .. } => EXIT_CONFIG,
        }
    }

    fn input(path: &Path, msg: impl ToString) -> Self {
        CliError::Input { path: path.display().to_string(), msg: msg.to_string() }
    }
}

pub struct EnergyArgs {
    pub packets: PathBuf,
    pub methods: PathBuf,
    pub out_dot: PathBuf,
    pub out_report: PathBuf,
    pub out_assignment: Option<PathBuf>,
}

pub struct ConstraintsArgs {
    pub facts: PathBuf,
    pub out_findings: PathBuf,
    pub out_stats: PathBuf,
}

/// Reads and validates a configuration file; `None` yields the defaults.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        source: ConfigError::Invalid(e.to_string()),
    })?;
    RunConfig::parse(&text).map_err(|source| CliError::Config { path: path.display().to_string(), source })
}

/// Re-validates a configuration after command-line overrides.
pub fn check_config(config: &RunConfig, origin: &str) -> Result<(), CliError> {
    config.validate().map_err(|source| CliError::Config { path: origin.to_string(), source })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::input(path, e))
}

fn warn(diag: &mut dyn Write, path: &Path, msg: &str) {
    let _ = writeln!(diag, "warning: {}: {msg}", path.display());
}

pub fn cmd_energy(args: &EnergyArgs, config: &RunConfig, diag: &mut dyn Write) -> Result<(), CliError> {
    let trace = parse_packet_trace(&read(&args.packets)?).map_err(|e| CliError::input(&args.packets, e))?;
    let methods = parse_method_trace(&read(&args.methods)?).map_err(|e| CliError::input(&args.methods, e))?;
    for w in &methods.warnings {
        warn(diag, &args.methods, w);
    }

    let flows = segment_flows(&trace, config.idle_gap_us).map_err(|e| CliError::input(&args.packets, e))?;
    let filter = config.network_filter();
    let assignment = assign_flows_to_threads(&trace, &flows, &methods.threads, &filter, &config.correlation())
        .map_err(|e| CliError::input(&args.packets, e))?;
    let assignment = associate_packets_to_calls(&assignment, &trace, &flows, &methods.threads, &filter);
    for w in &assignment.warnings {
        warn(diag, &args.packets, w);
    }

    let model = config.energy_model();
    let horizon = model.default_horizon(&trace);
    let mut trees = Vec::with_capacity(methods.threads.len());
    for thread in &methods.threads {
        let mut tree = build_call_tree(thread).map_err(|e| CliError::input(&args.methods, e))?;
        if !config.collapse_prefixes.is_empty() {
            collapse_library_frames(&mut tree, &config.collapse_prefixes);
        }
        trees.push(
            aggregate_traffic(tree, &trace, &assignment, &model, horizon)
                .map_err(|e| CliError::input(&args.methods, e))?,
        );
    }

    let report = emit_report(&trees, &trace, &model, horizon).map_err(|e| CliError::input(&args.packets, e))?;
    write(&args.out_dot, &emit_dot_all(&trees, config.min_bytes_filter))?;
    write(&args.out_report, &report)?;
    if let Some(path) = &args.out_assignment {
        write(path, &assignment.to_report(&trace, &flows, &methods.threads))?;
    }
    Ok(())
}

pub fn cmd_constraints(args: &ConstraintsArgs, config: &RunConfig, diag: &mut dyn Write) -> Result<(), CliError> {
    let constraints = config.constraints();
    let db = load_facts(&read(&args.facts)?, &constraints).map_err(|e| CliError::input(&args.facts, e))?;
    for w in &db.warnings {
        warn(diag, &args.facts, w);
    }
    let findings = analyze_all(&db, &constraints);
    write(&args.out_findings, &render_findings(&findings))?;
    write(&args.out_stats, &summarize_stats(&findings).render())?;
    Ok(())
}
