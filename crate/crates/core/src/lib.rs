//! Deterministic discrete-event simulator of a network and cloud test bench.

// `!(x > 0.0)` is how NaN gets rejected along with the negatives
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod control;
pub mod emulation;
pub mod scenario;
pub mod stats;
pub mod topology;
pub mod traffic;
pub mod units;
