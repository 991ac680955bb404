//! Tools for proof-of-work chains that delay transaction execution by a fixed
//! number of blocks: queueing bounds, Markov chain analyses, the per-miner
//! protocol state machine and a seeded discrete-event simulator.

pub mod analytic;
pub mod markov;
pub mod profiles;
pub mod protocol;
pub mod report;
pub mod sim;
