//! Seeded discrete-event simulation of a mining network.
//!
//! Mining is a Poisson process of total rate `lambda`; each block goes to a
//! miner drawn by mining power. Blocks reach other miners after the link
//! delay, are queued for execution and validated under the delayed-execution
//! rule. Miner 0 runs the adversary strategy when there is one.

mod batch;
mod config;
mod engine;
mod invariants;
mod legacy;
mod md1;
mod metrics;
mod trace;

pub use batch::run_batch;
pub use config::{AdversaryStrategy, DelayModel, Horizon, LegacyMode, MinerSpec, NetworkConfig, Protocol, Scenario};
pub use engine::{run, run_with, ChainRule, RunOptions, RunOutput};
pub use invariants::check_invariants;
pub use legacy::{run_legacy_fairness, SkipFlags};
pub use md1::{simulate_md1, Md1Estimate};
pub use metrics::{RunMetrics, Violation, ViolationKind, WithholdStats};
pub use trace::{write_trace, RecordKind, Trace, TraceRecord};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
}
