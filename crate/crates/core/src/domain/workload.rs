use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Deci, DomainError};

/// The six fixed traffic streams every workload carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowKind {
    CpuMemUp,
    CpuMemDown,
    CpuIoUp,
    CpuIoDown,
    MemIoUp,
    MemIoDown,
}

impl FlowKind {
    pub const ALL: [FlowKind; 6] = [
        FlowKind::CpuMemUp,
        FlowKind::CpuMemDown,
        FlowKind::CpuIoUp,
        FlowKind::CpuIoDown,
        FlowKind::MemIoUp,
        FlowKind::MemIoDown,
    ];

    /// Runs between the CPU and memory modules of a workload.
    pub fn is_cpu_mem(self) -> bool {
        matches!(self, FlowKind::CpuMemUp | FlowKind::CpuMemDown)
    }

    /// Runs between the CPU module and the internet gateway.
    pub fn is_cpu_io(self) -> bool {
        matches!(self, FlowKind::CpuIoUp | FlowKind::CpuIoDown)
    }

    pub fn is_mem_io(self) -> bool {
        matches!(self, FlowKind::MemIoUp | FlowKind::MemIoDown)
    }

    pub fn is_io(self) -> bool {
        !self.is_cpu_mem()
    }
}

impl fmt::Display for FlowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Flow rates in Gbps, one per [`FlowKind`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowRates {
    pub cpu_mem_up: f64,
    pub cpu_mem_down: f64,
    pub cpu_io_up: f64,
    pub cpu_io_down: f64,
    pub mem_io_up: f64,
    pub mem_io_down: f64,
}

impl FlowRates {
    /// 120/100 CPU-memory, 2/1 CPU-IO, 2/1 memory-IO.
    pub fn reference() -> Self {
        FlowRates {
            cpu_mem_up: 120.0,
            cpu_mem_down: 100.0,
            cpu_io_up: 2.0,
            cpu_io_down: 1.0,
            mem_io_up: 2.0,
            mem_io_down: 1.0,
        }
    }

    pub fn zero() -> Self {
        FlowRates {
            cpu_mem_up: 0.0,
            cpu_mem_down: 0.0,
            cpu_io_up: 0.0,
            cpu_io_down: 0.0,
            mem_io_up: 0.0,
            mem_io_down: 0.0,
        }
    }

    pub fn get(&self, kind: FlowKind) -> f64 {
        match kind {
            FlowKind::CpuMemUp => self.cpu_mem_up,
            FlowKind::CpuMemDown => self.cpu_mem_down,
            FlowKind::CpuIoUp => self.cpu_io_up,
            FlowKind::CpuIoDown => self.cpu_io_down,
            FlowKind::MemIoUp => self.mem_io_up,
            FlowKind::MemIoDown => self.mem_io_down,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (FlowKind, f64)> + '_ {
        FlowKind::ALL.iter().map(move |&k| (k, self.get(k)))
    }

    pub fn cpu_mem_total(&self) -> f64 {
        self.cpu_mem_up + self.cpu_mem_down
    }

    pub fn cpu_io_total(&self) -> f64 {
        self.cpu_io_up + self.cpu_io_down
    }

    pub fn mem_io_total(&self) -> f64 {
        self.mem_io_up + self.mem_io_down
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        for (kind, rate) in self.iter() {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(DomainError::InvalidWorkload(format!("flow {kind} has invalid rate {rate}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    pub id: u32,
    /// CPU demand in 0.1 GHz units.
    pub cpu_demand: Deci,
    /// Memory demand in 0.1 GB units.
    pub mem_demand: Deci,
    pub flows: FlowRates,
}

impl Workload {
    pub fn new(id: u32, cpu_demand: Deci, mem_demand: Deci, flows: FlowRates) -> Result<Self, DomainError> {
        let w = Workload { id, cpu_demand, mem_demand, flows };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.cpu_demand.0 == 0 || self.mem_demand.0 == 0 {
            return Err(DomainError::InvalidWorkload(format!(
                "workload {} must have positive CPU and memory demand",
                self.id
            )));
        }
        self.flows.validate()
    }

    pub fn demand(&self, kind: super::ResourceKind) -> Deci {
        match kind {
            super::ResourceKind::Cpu => self.cpu_demand,
            super::ResourceKind::Mem => self.mem_demand,
        }
    }
}
