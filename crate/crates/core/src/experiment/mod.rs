//! The three-architecture comparison on one shared workload set.

mod config;
mod report;

use std::thread;

use crate::domain::{build_topology, ArchitectureKind, DomainError, Workload};
use crate::optimizer::{evaluate, solve_exact, solve_greedy, MilpInstance, SolveError, SolveResult};
use crate::wlgen::{generate_workloads, WlgenError};

pub use config::{ArchSelection, Config, OutputFormat, RackCounts, SolverKind, CONFIG_SCHEMA_VERSION, REFERENCE_SEED};
pub use report::{
    render_csv, render_json, write_report, ArchitectureResult, ComparisonReport, ConfigEcho, Deltas, ReferenceTargets,
    ReportError, Solution, Status, ToolInfo, REPORT_SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Workloads(#[from] WlgenError),
    #[error(transparent)]
    Topology(#[from] DomainError),
    #[error("percent delta needs a positive baseline, got {0}")]
    Baseline(f64),
}

/// `100 * (a - b) / b`.
pub fn percent_delta(a: f64, b: f64) -> Result<f64, ExperimentError> {
    if !(b.is_finite() && b > 0.0) {
        return Err(ExperimentError::Baseline(b));
    }
    Ok(100.0 * (a - b) / b)
}

/// Workloads of the configured run.
pub fn workloads(config: &Config) -> Result<Vec<Workload>, ExperimentError> {
    Ok(generate_workloads(config.seed, config.n_workloads, &config.profile)?)
}

/// Placement problem for one architecture.
///
/// The outer error is a configuration problem; the inner one means the workloads cannot be
/// placed on this architecture at all.
pub fn build_instance(
    config: &Config,
    kind: ArchitectureKind,
    workloads: Vec<Workload>,
) -> Result<Result<MilpInstance, SolveError>, ExperimentError> {
    let topology = build_topology(
        kind,
        config.n_cpu,
        config.n_mem,
        config.racks.get(kind),
        config.cpu_spec,
        config.mem_spec,
        config.epb,
    )?;
    Ok(MilpInstance::new(topology, workloads, config.policy).map(|i| i.with_cross_rack(config.allow_cross_rack)))
}

/// Runs the configured solver.
pub fn solve(config: &Config, instance: &MilpInstance) -> Result<SolveResult, SolveError> {
    match config.solver {
        SolverKind::Exact => solve_exact(instance, config.limits()),
        SolverKind::Greedy => solve_greedy(instance),
    }
}

fn run_one(config: &Config, kind: ArchitectureKind, ws: &[Workload]) -> Result<ArchitectureResult, ExperimentError> {
    let racks = config.racks.get(kind);
    let outcome = build_instance(config, kind, ws.to_vec())?.and_then(|instance| {
        let result = solve(config, &instance)?;
        let power = evaluate(&instance, &result.placement)?;
        Ok((result, power))
    });
    Ok(match outcome {
        Ok((result, power)) => ArchitectureResult {
            architecture: kind,
            racks,
            status: Status::Solved,
            error: None,
            workloads: ws.to_vec(),
            solution: Some(Solution {
                objective_w: result.objective_w,
                proven_optimal: result.proven_optimal,
                nodes_explored: result.nodes_explored,
                placement: result.placement,
                power,
            }),
        },
        Err(e) => ArchitectureResult {
            architecture: kind,
            racks,
            status: Status::from_error(&e),
            error: Some(e.to_string()),
            workloads: ws.to_vec(),
            solution: None,
        },
    })
}

/// Generates one workload set and solves it on every selected architecture.
///
/// The solves run on separate threads; the report is assembled in architecture order.
pub fn run_comparison(config: &Config) -> Result<ComparisonReport, ExperimentError> {
    config.validate()?;
    let ws = workloads(config)?;
    let kinds = config.architecture.kinds();
    let results: Vec<Result<ArchitectureResult, ExperimentError>> = thread::scope(|s| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&kind| {
                s.spawn({
                    let ws = &ws;
                    move || run_one(config, kind, ws)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    let architectures = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ComparisonReport::assemble(config, architectures))
}
