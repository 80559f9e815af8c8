use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domain::{ArchitectureKind, EpbTable, ResourceKind, ResourceSpec};
use crate::fabric::TierPolicy;
use crate::optimizer::Limits;
use crate::wlgen::WorkloadProfile;

use super::ExperimentError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Seed of the reference experiment.
pub const REFERENCE_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Exact,
    Greedy,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Exact => "exact",
            SolverKind::Greedy => "greedy",
        })
    }
}

impl FromStr for SolverKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(SolverKind::Exact),
            "greedy" => Ok(SolverKind::Greedy),
            other => Err(ExperimentError::Config(format!("unknown solver '{other}'"))),
        }
    }
}

/// One architecture or all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchSelection {
    #[default]
    All,
    Traditional,
    RackScale,
    PodScale,
}

impl ArchSelection {
    pub fn kinds(self) -> Vec<ArchitectureKind> {
        match self {
            ArchSelection::All => ArchitectureKind::ALL.to_vec(),
            ArchSelection::Traditional => vec![ArchitectureKind::Traditional],
            ArchSelection::RackScale => vec![ArchitectureKind::RackScale],
            ArchSelection::PodScale => vec![ArchitectureKind::PodScale],
        }
    }

    pub fn single(self) -> Option<ArchitectureKind> {
        match self {
            ArchSelection::All => None,
            ArchSelection::Traditional => Some(ArchitectureKind::Traditional),
            ArchSelection::RackScale => Some(ArchitectureKind::RackScale),
            ArchSelection::PodScale => Some(ArchitectureKind::PodScale),
        }
    }
}

impl FromStr for ArchSelection {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(ArchSelection::All);
        }
        let kind: ArchitectureKind =
            s.parse().map_err(|e: crate::domain::DomainError| ExperimentError::Config(e.to_string()))?;
        Ok(match kind {
            ArchitectureKind::Traditional => ArchSelection::Traditional,
            ArchitectureKind::RackScale => ArchSelection::RackScale,
            ArchitectureKind::PodScale => ArchSelection::PodScale,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(ExperimentError::Config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Number of racks built for each architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RackCounts {
    pub traditional: u32,
    pub rackscale: u32,
    pub podscale: u32,
}

impl Default for RackCounts {
    fn default() -> Self {
        RackCounts { traditional: 1, rackscale: 2, podscale: 2 }
    }
}

impl RackCounts {
    pub fn get(&self, kind: ArchitectureKind) -> u32 {
        match kind {
            ArchitectureKind::Traditional => self.traditional,
            ArchitectureKind::RackScale => self.rackscale,
            ArchitectureKind::PodScale => self.podscale,
        }
    }
}

/// Everything a run needs. Missing fields take the reference-experiment defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub schema_version: u32,
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
    /// Lets rack-scale workloads take CPU and memory from different racks.
    pub allow_cross_rack: bool,
    pub solver: SolverKind,
    pub node_budget: u64,
    pub time_budget_s: f64,
    pub architecture: ArchSelection,
    pub format: OutputFormat,
    pub out: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        let limits = Limits::default();
        Config {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: REFERENCE_SEED,
            n_workloads: 20,
            n_cpu: 20,
            n_mem: 20,
            racks: RackCounts::default(),
            cpu_spec: ResourceSpec::reference_cpu(),
            mem_spec: ResourceSpec::reference_mem(),
            epb: EpbTable::default(),
            profile: WorkloadProfile::default(),
            policy: TierPolicy::TopTier,
            allow_cross_rack: true,
            solver: SolverKind::Exact,
            node_budget: limits.node_budget,
            time_budget_s: limits.time_budget.as_secs_f64(),
            architecture: ArchSelection::All,
            format: OutputFormat::Json,
            out: None,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let config: Config = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.n_cpu == 0 || self.n_mem == 0 {
            return bad("n_cpu and n_mem must be at least 1".into());
        }
        for kind in ArchitectureKind::ALL {
            if self.racks.get(kind) == 0 {
                return bad(format!("racks.{} must be at least 1", kind.name()));
            }
        }
        if self.cpu_spec.kind != ResourceKind::Cpu || self.mem_spec.kind != ResourceKind::Mem {
            return bad("cpu_spec must have kind cpu and mem_spec kind mem".into());
        }
        self.cpu_spec.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.mem_spec.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.epb.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.profile.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        if !(self.time_budget_s.is_finite() && self.time_budget_s >= 0.0) {
            return bad(format!("time_budget_s must be a non-negative number, got {}", self.time_budget_s));
        }
        Ok(())
    }

    pub fn limits(&self) -> Limits {
        Limits { node_budget: self.node_budget, time_budget: Duration::from_secs_f64(self.time_budget_s) }
    }
}
