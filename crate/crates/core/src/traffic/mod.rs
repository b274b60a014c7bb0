//! Workload generation and replay.
//!
//! The generator draws request sizes from a size distribution fitted to
//! observed traffic and spaces them by a fixed interval or Poisson arrivals.
//! The activator replays a workload into an [`Engine`](crate::emulation::Engine).

mod dist;
mod workload;

use thiserror::Error;

pub use dist::{fit_empirical, parse_size_samples, ArrivalModel, Empirical, SizeDistribution};
pub use workload::{
    emit_workload, generate_workload, parse_workload, Destination, RequestKind, Workload,
    WorkloadEntry,
};

use crate::emulation::Engine;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrafficError {
    #[error("no samples to fit")]
    EmptySamples,
    #[error("{0}")]
    InvalidParameter(String),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown endpoint `{0}`")]
    UnknownEndpoint(String),
}

/// Schedules one inject event per workload entry. Every endpoint is checked
/// before anything is scheduled, so a bad entry leaves the engine untouched.
/// Returns the flow ids assigned, in entry order.
pub fn activate(workload: &Workload, engine: &mut Engine) -> Result<Vec<u64>, TrafficError> {
    for entry in workload.entries() {
        engine.check_endpoints(entry)?;
    }
    workload
        .entries()
        .iter()
        .map(|entry| engine.add_flow(entry.clone()))
        .collect()
}
