//! Seed-reproducible workload generation.
//!
//! Demands are drawn from a SplitMix64 stream onto a fixed lattice so that the
//! same `(seed, n, profile)` yields the same workloads bit for bit in any
//! implementation.

use serde::{Deserialize, Serialize};

use crate::domain::{Deci, FlowRates, Workload};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WlgenError {
    #[error("invalid sampling range [{lo}, {hi}] with step {step}: {reason}")]
    Range { lo: u32, hi: u32, step: u32, reason: &'static str },
    #[error("invalid profile: {0}")]
    Profile(String),
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GeneratorState(pub u64);

/// Advances the state and returns the mixed output.
pub fn splitmix64_next(state: GeneratorState) -> (GeneratorState, u64) {
    let next = state.0.wrapping_add(GOLDEN_GAMMA);
    let mut z = next;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (GeneratorState(next), z)
}

fn lattice_size(lo: u32, hi: u32, step: u32) -> Result<u64, WlgenError> {
    let err = |reason| WlgenError::Range { lo, hi, step, reason };
    if step == 0 {
        return Err(err("step must be positive"));
    }
    if lo > hi {
        return Err(err("lo exceeds hi"));
    }
    if !(hi - lo).is_multiple_of(step) {
        return Err(err("step must divide hi - lo"));
    }
    Ok(u64::from((hi - lo) / step) + 1)
}

/// Maps a raw draw onto `{lo, lo + step, ..., hi}`.
///
/// Uses `raw mod n`; the modulo bias is below 2^-59 for the lattice sizes used here.
pub fn lattice_value(raw: u64, lo: u32, hi: u32, step: u32) -> Result<u32, WlgenError> {
    let n = lattice_size(lo, hi, step)?;
    Ok(lo + (raw % n) as u32 * step)
}

/// Draws one value uniformly from the lattice `{lo, lo + step, ..., hi}`.
pub fn sample_uniform_fixed(
    state: GeneratorState,
    lo: u32,
    hi: u32,
    step: u32,
) -> Result<(GeneratorState, u32), WlgenError> {
    lattice_size(lo, hi, step)?;
    let (next, raw) = splitmix64_next(state);
    Ok((next, lattice_value(raw, lo, hi, step)?))
}

/// Demand ranges (inclusive, deci-units) and the fixed flow rates of generated workloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadProfile {
    pub cpu_range: (Deci, Deci),
    pub cpu_step: Deci,
    pub mem_range: (Deci, Deci),
    pub mem_step: Deci,
    pub fixed_flows: FlowRates,
}

impl Default for WorkloadProfile {
    /// 1-3 GHz in 0.1 GHz steps, 5-8 GB in 1 GB steps, reference flow rates.
    fn default() -> Self {
        WorkloadProfile {
            cpu_range: (Deci(10), Deci(30)),
            cpu_step: Deci(1),
            mem_range: (Deci(50), Deci(80)),
            mem_step: Deci(10),
            fixed_flows: FlowRates::reference(),
        }
    }
}

impl WorkloadProfile {
    pub fn validate(&self) -> Result<(), WlgenError> {
        lattice_size(self.cpu_range.0 .0, self.cpu_range.1 .0, self.cpu_step.0)?;
        lattice_size(self.mem_range.0 .0, self.mem_range.1 .0, self.mem_step.0)?;
        if self.cpu_range.0 .0 == 0 || self.mem_range.0 .0 == 0 {
            return Err(WlgenError::Profile("demand ranges must start above zero".into()));
        }
        self.fixed_flows.validate().map_err(|e| WlgenError::Profile(e.to_string()))
    }
}

/// Generates `n` workloads with ids `0..n`, drawing CPU then memory demand for each.
pub fn generate_workloads(seed: u64, n: u32, profile: &WorkloadProfile) -> Result<Vec<Workload>, WlgenError> {
    profile.validate()?;
    let mut state = GeneratorState(seed);
    let mut out = Vec::with_capacity(n as usize);
    for id in 0..n {
        let (s, cpu) = sample_uniform_fixed(state, profile.cpu_range.0 .0, profile.cpu_range.1 .0, profile.cpu_step.0)?;
        let (s, mem) = sample_uniform_fixed(s, profile.mem_range.0 .0, profile.mem_range.1 .0, profile.mem_step.0)?;
        state = s;
        out.push(Workload { id, cpu_demand: Deci(cpu), mem_demand: Deci(mem), flows: profile.fixed_flows });
    }
    Ok(out)
}
