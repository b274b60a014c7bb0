//! Discrete-event packet engine: serialization and propagation delay per
//! link direction, eight strictly prioritized tail-drop FIFOs per port, and
//! hop-by-hop forwarding over the routing tables.

mod engine;
mod event;
mod queue;

use std::net::Ipv4Addr;

pub use engine::{
    DropReason, Engine, EngineConfig, FlowOutcome, FlowStatus, LinkDownError, TraceRecord,
};
pub use event::{EventHandle, EventQueue, PastEventError};
pub use queue::{ClassCounters, Enqueued, PortQueue};

pub const PRIORITY_CLASSES: usize = 8;
pub const DEFAULT_MTU: u64 = 1500;
pub const DEFAULT_TTL: u8 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub flow_id: u64,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub size: u64,
    /// 0-7, 7 highest
    pub priority: u8,
    pub ttl: u8,
    pub created_at: f64,
}

/// Splits a message into MTU-sized packets plus a remainder.
pub fn packetize(size: u64, mtu: u64) -> Vec<u64> {
    assert!(mtu > 0, "mtu must be positive");
    let mut sizes = vec![mtu; (size / mtu) as usize];
    if !size.is_multiple_of(mtu) {
        sizes.push(size % mtu);
    }
    sizes
}

/// Seconds to clock `bytes` onto a link of `bandwidth_bps`.
pub fn serialization_time(bytes: u64, bandwidth_bps: f64) -> f64 {
    (bytes * 8) as f64 / bandwidth_bps
}
