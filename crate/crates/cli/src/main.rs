//! `dcplace`: generate workloads, solve placements, compare architectures and export LP models.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dcplace::experiment::{
    self, render_csv, render_json, run_comparison, write_report, ArchSelection, ComparisonReport, Config, OutputFormat,
    SolverKind, Status,
};
use dcplace::fabric::TierPolicy;
use dcplace::optimizer::export_lp;

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NOT_PROVEN: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "dcplace", version, about = "Power-aware workload placement for composable datacentres")]
#[command(args_override_self = true)]
struct Cli {
    /// JSON config document; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of workloads to generate.
    #[arg(long, global = true, value_name = "N")]
    workloads: Option<u32>,
    /// traditional, rackscale, podscale or all.
    #[arg(long, global = true, value_name = "ARCH")]
    arch: Option<ArchSelection>,
    /// top-tier or full-path.
    #[arg(long, global = true)]
    policy: Option<TierPolicy>,
    /// exact or greedy.
    #[arg(long, global = true)]
    solver: Option<SolverKind>,
    #[arg(long, global = true, value_name = "NODES")]
    node_budget: Option<u64>,
    /// Seconds.
    #[arg(long, global = true, value_name = "SECONDS")]
    time_budget: Option<f64>,
    /// json or csv.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Output file (JSON, LP) or directory (CSV); standard output when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit the generated workload set as JSON.
    Gen,
    /// Solve one architecture and print its power report.
    Solve,
    /// Run the three-architecture comparison.
    Compare,
    /// Write the placement model of one architecture in CPLEX LP format.
    ExportLp,
    /// Print the tool version.
    Version,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, message: message.into() }
    }
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
            Config::from_json(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        None => Config::default(),
    };
    if let Some(v) = cli.seed {
        config.seed = v;
    }
    if let Some(v) = cli.workloads {
        config.n_workloads = v;
    }
    if let Some(v) = cli.arch {
        config.architecture = v;
    }
    if let Some(v) = cli.policy {
        config.policy = v;
    }
    if let Some(v) = cli.solver {
        config.solver = v;
    }
    if let Some(v) = cli.node_budget {
        config.node_budget = v;
    }
    if let Some(v) = cli.time_budget {
        config.time_budget_s = v;
    }
    if let Some(v) = cli.format {
        config.format = v;
    }
    if let Some(v) = &cli.out {
        config.out = Some(v.clone());
    }
    config.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(config)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::config(format!("cannot write to standard output: {e}"))),
    }
}

fn emit_report(config: &Config, report: &ComparisonReport) -> Result<(), Failure> {
    let io = |e: experiment::ReportError| Failure::config(e.to_string());
    match (&config.out, config.format) {
        (Some(path), format) => write_report(report, format, path).map_err(io),
        (None, OutputFormat::Json) => emit(None, &render_json(report).map_err(io)?),
        (None, OutputFormat::Csv) => {
            let (summary, tiers) = render_csv(report).map_err(io)?;
            emit(None, &format!("{summary}\n{tiers}"))
        }
    }
}

/// Exit status of a report: infeasibility first, then a missing optimality proof.
fn report_status(config: &Config, report: &ComparisonReport) -> u8 {
    let mut code = EXIT_OK;
    for a in &report.architectures {
        match a.status {
            Status::Infeasible => return EXIT_INFEASIBLE,
            Status::Unsolved if config.solver == SolverKind::Greedy => return EXIT_INFEASIBLE,
            Status::Unsolved => code = EXIT_NOT_PROVEN,
            Status::Solved => {
                let proven = a.solution.as_ref().is_some_and(|s| s.proven_optimal);
                if config.solver == SolverKind::Exact && !proven {
                    code = EXIT_NOT_PROVEN;
                }
            }
        }
    }
    code
}

fn single_arch(config: &Config, command: &str) -> Result<dcplace::domain::ArchitectureKind, Failure> {
    config.architecture.single().ok_or_else(|| {
        Failure::config(format!("{command} needs one architecture: pass --arch traditional|rackscale|podscale"))
    })
}

fn report_errors(report: &ComparisonReport) {
    for a in &report.architectures {
        if let Some(e) = &a.error {
            eprintln!("dcplace: {}: {e}", a.architecture);
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Command::Version = cli.command {
        println!("dcplace {}", env!("CARGO_PKG_VERSION"));
        return Ok(EXIT_OK);
    }
    let config = load_config(&cli)?;
    match cli.command {
        Command::Version => unreachable!("handled above"),
        Command::Gen => {
            let ws = experiment::workloads(&config).map_err(|e| Failure::config(e.to_string()))?;
            let mut text = serde_json::to_string_pretty(&ws).map_err(|e| Failure::config(e.to_string()))?;
            text.push('\n');
            emit(config.out.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
        Command::Solve => {
            single_arch(&config, "solve")?;
            let report = run_comparison(&config).map_err(|e| Failure::config(e.to_string()))?;
            report_errors(&report);
            match config.format {
                OutputFormat::Json => {
                    let result = &report.architectures[0];
                    let mut text = serde_json::to_string_pretty(result).map_err(|e| Failure::config(e.to_string()))?;
                    text.push('\n');
                    emit(config.out.as_deref(), &text)?;
                }
                OutputFormat::Csv => emit_report(&config, &report)?,
            }
            Ok(report_status(&config, &report))
        }
        Command::Compare => {
            let report = run_comparison(&config).map_err(|e| Failure::config(e.to_string()))?;
            report_errors(&report);
            emit_report(&config, &report)?;
            Ok(report_status(&config, &report))
        }
        Command::ExportLp => {
            let kind = single_arch(&config, "export-lp")?;
            let ws = experiment::workloads(&config).map_err(|e| Failure::config(e.to_string()))?;
            let instance = experiment::build_instance(&config, kind, ws)
                .map_err(|e| Failure::config(e.to_string()))?
                .map_err(|e| Failure { code: EXIT_INFEASIBLE, message: e.to_string() })?;
            let text = export_lp(&instance).map_err(|e| Failure { code: EXIT_INFEASIBLE, message: e.to_string() })?;
            emit(config.out.as_deref(), &text)?;
            Ok(EXIT_OK)
        }
    }
}

fn main_with(args: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("dcplace: {}", f.message);
            f.code
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(main_with(std::env::args_os()))
}
