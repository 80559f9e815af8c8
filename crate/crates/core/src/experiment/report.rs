use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{ArchitectureKind, EpbTable, Placement, ResourceSpec, Tier, Workload};
use crate::fabric::TierPolicy;
use crate::optimizer::SolveError;
use crate::power::PowerReport;
use crate::wlgen::WorkloadProfile;

use super::{percent_delta, Config, OutputFormat, RackCounts, SolverKind};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv encoding failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo { name: "dcplace".into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

/// The inputs that determine a report's numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub n_workloads: u32,
    pub n_cpu: u32,
    pub n_mem: u32,
    pub racks: RackCounts,
    pub cpu_spec: ResourceSpec,
    pub mem_spec: ResourceSpec,
    pub epb: EpbTable,
    pub profile: WorkloadProfile,
    pub policy: TierPolicy,
    pub allow_cross_rack: bool,
    pub solver: SolverKind,
    pub node_budget: u64,
    pub time_budget_s: f64,
}

impl From<&Config> for ConfigEcho {
    fn from(c: &Config) -> Self {
        ConfigEcho {
            seed: c.seed,
            n_workloads: c.n_workloads,
            n_cpu: c.n_cpu,
            n_mem: c.n_mem,
            racks: c.racks,
            cpu_spec: c.cpu_spec,
            mem_spec: c.mem_spec,
            epb: c.epb,
            profile: c.profile.clone(),
            policy: c.policy,
            allow_cross_rack: c.allow_cross_rack,
            solver: c.solver,
            node_budget: c.node_budget,
            time_budget_s: c.time_budget_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Solved,
    /// No placement exists.
    Infeasible,
    /// The solver stopped without a placement although one may exist.
    Unsolved,
}

impl Status {
    pub fn from_error(e: &SolveError) -> Self {
        match e {
            SolveError::Infeasible | SolveError::Instance(_) => Status::Infeasible,
            _ => Status::Unsolved,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub objective_w: f64,
    pub proven_optimal: bool,
    pub nodes_explored: u64,
    pub placement: Placement,
    pub power: PowerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureResult {
    pub architecture: ArchitectureKind,
    pub racks: u32,
    pub status: Status,
    pub error: Option<String>,
    pub workloads: Vec<Workload>,
    pub solution: Option<Solution>,
}

impl ArchitectureResult {
    pub fn power(&self) -> Option<&PowerReport> {
        self.solution.as_ref().map(|s| &s.power)
    }
}

/// Relative differences between architectures; absent when an operand was not solved.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deltas {
    pub tmpc_savings_rackscale_vs_traditional_pct: Option<f64>,
    pub tmpc_savings_podscale_vs_traditional_pct: Option<f64>,
    pub tnpc_podscale_vs_rackscale_pct: Option<f64>,
    pub tnpc_rackscale_vs_traditional_pct: Option<f64>,
    pub tnpc_rackscale_to_traditional_ratio: Option<f64>,
}

impl Deltas {
    pub fn compute(architectures: &[ArchitectureResult]) -> Self {
        let get = |k: ArchitectureKind| architectures.iter().find(|a| a.architecture == k).and_then(|a| a.power());
        let trad = get(ArchitectureKind::Traditional);
        let rack = get(ArchitectureKind::RackScale);
        let pod = get(ArchitectureKind::PodScale);
        let savings = |x: Option<&PowerReport>| {
            let (x, t) = (x?, trad?);
            percent_delta(x.tmpc_w, t.tmpc_w).ok().map(|d| -d)
        };
        let tnpc = |a: Option<&PowerReport>, b: Option<&PowerReport>| percent_delta(a?.tnpc_w, b?.tnpc_w).ok();
        let ratio = match (rack, trad) {
            (Some(r), Some(t)) if t.tnpc_w > 0.0 => Some(r.tnpc_w / t.tnpc_w),
            _ => None,
        };
        Deltas {
            tmpc_savings_rackscale_vs_traditional_pct: savings(rack),
            tmpc_savings_podscale_vs_traditional_pct: savings(pod),
            tnpc_podscale_vs_rackscale_pct: tnpc(pod, rack),
            tnpc_rackscale_vs_traditional_pct: tnpc(rack, trad),
            tnpc_rackscale_to_traditional_ratio: ratio,
        }
    }
}

/// Headline figures the comparison is measured against, with notes on how the run relates to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTargets {
    pub tmpc_savings_pct: f64,
    pub tnpc_podscale_vs_rackscale_pct: f64,
    pub tnpc_rackscale_vs_traditional_pct: f64,
    pub notes: Vec<String>,
}

impl ReferenceTargets {
    fn for_deltas(d: &Deltas) -> Self {
        let mut notes = Vec::new();
        if let (Some(pct), Some(ratio)) = (d.tnpc_rackscale_vs_traditional_pct, d.tnpc_rackscale_to_traditional_ratio) {
            notes.push(format!(
                "rack-scale network power is {ratio:.4}x traditional (+{pct:.2}%); the +300% target is not \
                 reproduced because it depends on a tier-attribution rule and figure magnitudes that are not recoverable"
            ));
        }
        ReferenceTargets {
            tmpc_savings_pct: 49.0,
            tnpc_podscale_vs_rackscale_pct: 30.0,
            tnpc_rackscale_vs_traditional_pct: 300.0,
            notes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub config: ConfigEcho,
    pub architectures: Vec<ArchitectureResult>,
    pub deltas: Deltas,
    pub reference: ReferenceTargets,
}

impl ComparisonReport {
    pub fn assemble(config: &Config, architectures: Vec<ArchitectureResult>) -> Self {
        let deltas = Deltas::compute(&architectures);
        ComparisonReport {
            schema_version: REPORT_SCHEMA_VERSION,
            tool: ToolInfo::current(),
            config: config.into(),
            reference: ReferenceTargets::for_deltas(&deltas),
            architectures,
            deltas,
        }
    }

    pub fn architecture(&self, kind: ArchitectureKind) -> Option<&ArchitectureResult> {
        self.architectures.iter().find(|a| a.architecture == kind)
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn render_json(report: &ComparisonReport) -> Result<String, ReportError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

/// `summary.csv` and `tiers.csv` contents; unsolved architectures have no rows.
pub fn render_csv(report: &ComparisonReport) -> Result<(String, String), ReportError> {
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["architecture", "tcpc_w", "tmpc_w", "tnpc_w", "total_w", "active_cpus", "active_mems"])?;
    let mut tiers = csv::Writer::from_writer(Vec::new());
    tiers.write_record(["architecture", "tier", "traffic_gbps", "power_w"])?;
    for a in &report.architectures {
        let Some(p) = a.power() else { continue };
        summary.write_record([
            a.architecture.name().to_string(),
            fixed(p.tcpc_w),
            fixed(p.tmpc_w),
            fixed(p.tnpc_w),
            fixed(p.total_w),
            p.active_cpus.to_string(),
            p.active_mems.to_string(),
        ])?;
        for tier in Tier::ALL {
            let u = p.tier(tier);
            tiers.write_record([
                a.architecture.name().to_string(),
                tier.name().to_string(),
                fixed(u.traffic_gbps),
                fixed(u.power_w),
            ])?;
        }
    }
    let finish = |w: csv::Writer<Vec<u8>>| -> Result<String, ReportError> {
        let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    };
    Ok((finish(summary)?, finish(tiers)?))
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Writes the report. JSON goes to the file `destination`; CSV writes `summary.csv` and
/// `tiers.csv` into the directory `destination`, creating it if needed.
pub fn write_report(report: &ComparisonReport, format: OutputFormat, destination: &Path) -> Result<(), ReportError> {
    match format {
        OutputFormat::Json => write_file(destination, &render_json(report)?),
        OutputFormat::Csv => {
            fs::create_dir_all(destination)
                .map_err(|source| ReportError::Io { path: destination.to_path_buf(), source })?;
            let (summary, tiers) = render_csv(report)?;
            write_file(&destination.join("summary.csv"), &summary)?;
            write_file(&destination.join("tiers.csv"), &tiers)
        }
    }
}
