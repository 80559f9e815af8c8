use std::fmt;

use serde::{Deserialize, Serialize};

use super::DomainError;

/// Fixed-point quantity in tenths of the base unit (0.1 GHz for CPU, 0.1 GB for memory).
///
/// Capacity checks are done on these integers so feasibility never depends on
/// floating-point rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Deci(pub u32);

impl Deci {
    pub const ZERO: Deci = Deci(0);

    pub fn get(self) -> u32 {
        self.0
    }

    /// Value in base units (GHz or GB).
    pub fn as_units(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Display for Deci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

impl std::ops::Add for Deci {
    type Output = Deci;
    fn add(self, rhs: Deci) -> Deci {
        Deci(self.0 + rhs.0)
    }
}

impl std::iter::Sum for Deci {
    fn sum<I: Iterator<Item = Deci>>(iter: I) -> Deci {
        Deci(iter.map(|d| d.0).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Cpu,
    Mem,
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceKind::Cpu => f.write_str("cpu"),
            ResourceKind::Mem => f.write_str("mem"),
        }
    }
}

/// Capacity and power characteristics of one CPU or memory module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSpec {
    pub kind: ResourceKind,
    pub capacity: Deci,
    pub peak_power_w: f64,
    /// Fraction of peak power that scales with load; the rest is drawn whenever the module is on.
    pub dynamic_range: f64,
}

impl ResourceSpec {
    pub fn new(kind: ResourceKind, capacity: Deci, peak_power_w: f64, dynamic_range: f64) -> Result<Self, DomainError> {
        let spec = ResourceSpec { kind, capacity, peak_power_w, dynamic_range };
        spec.validate()?;
        Ok(spec)
    }

    /// 3.6 GHz, 130 W, 30 % dynamic range.
    pub fn reference_cpu() -> Self {
        ResourceSpec { kind: ResourceKind::Cpu, capacity: Deci(36), peak_power_w: 130.0, dynamic_range: 0.3 }
    }

    /// 24 GB, 40 W, 30 % dynamic range.
    pub fn reference_mem() -> Self {
        ResourceSpec { kind: ResourceKind::Mem, capacity: Deci(240), peak_power_w: 40.0, dynamic_range: 0.3 }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.capacity.0 == 0 {
            return Err(DomainError::InvalidSpec(format!("{} capacity must be positive", self.kind)));
        }
        if !(self.peak_power_w.is_finite() && self.peak_power_w > 0.0) {
            return Err(DomainError::InvalidSpec(format!(
                "{} peak power must be positive, got {}",
                self.kind, self.peak_power_w
            )));
        }
        if !(0.0..=1.0).contains(&self.dynamic_range) {
            return Err(DomainError::InvalidSpec(format!(
                "{} dynamic range must lie in [0, 1], got {}",
                self.kind, self.dynamic_range
            )));
        }
        Ok(())
    }

    /// Power drawn by a powered-on module regardless of load.
    pub fn idle_power_w(&self) -> f64 {
        (1.0 - self.dynamic_range) * self.peak_power_w
    }

    /// Load-proportional watts per deci-unit of assigned demand.
    pub fn watts_per_deci(&self) -> f64 {
        self.dynamic_range * self.peak_power_w / f64::from(self.capacity.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deci_display() {
        assert_eq!(Deci(36).to_string(), "3.6");
        assert_eq!(Deci(240).to_string(), "24.0");
        assert_eq!(Deci(1).to_string(), "0.1");
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ResourceSpec::new(ResourceKind::Cpu, Deci(0), 130.0, 0.3).is_err());
        assert!(ResourceSpec::new(ResourceKind::Cpu, Deci(36), 0.0, 0.3).is_err());
        assert!(ResourceSpec::new(ResourceKind::Cpu, Deci(36), 130.0, 1.2).is_err());
        assert!(ResourceSpec::new(ResourceKind::Mem, Deci(240), 40.0, 0.0).is_ok());
    }
}
