//! Power-aware placement of workloads in traditional and disaggregated datacentres.
//!
//! * [`domain`]: workloads, resource modules and the three architectures.
//! * [`power`]: module power model and the CPU + memory + network decomposition.
//! * [`fabric`]: tier attribution of flows and network power.
//! * [`optimizer`]: exact, greedy and brute-force solvers plus LP export.
//! * [`wlgen`]: seed-reproducible workload generation.
//! * [`experiment`]: the three-architecture comparison and its reports.

pub mod domain;
pub mod experiment;
pub mod fabric;
pub mod optimizer;
pub mod power;
pub mod wlgen;
