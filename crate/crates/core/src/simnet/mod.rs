//! Deterministic synchronous simulator with scripted Byzantine nodes.

pub mod adversary;
pub mod engine;
pub mod library;
pub mod scenario;
pub mod sweep;

pub use adversary::{Action, Adversary, Directive};
pub use engine::{run_scenario, GenerationRecord, Property, RunResult, SimError, Violation};
pub use scenario::{FaultyNode, Scenario, ScenarioError, Values};
pub use sweep::{sweep, SummaryRow, SweepOutcome};
