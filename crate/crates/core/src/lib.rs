//! Coded multi-valued Byzantine consensus with diagnosis-graph isolation.
//!
//! Layers, bottom up: [`gf`] and [`code`] for the systematic MDS code,
//! [`bitcast`] for single-source broadcast, [`diagnosis`] for trust
//! bookkeeping, [`consensus`] for one generation of the protocol, [`simnet`]
//! to run scenarios, and [`metrics`] for bit accounting and predictions.

pub mod bitcast;
pub mod bits;
pub mod code;
pub mod consensus;
pub mod diagnosis;
pub mod gf;
pub mod metrics;
pub mod selftest;
pub mod simnet;
