//! Finite Markov chains: mining-fairness chains for non-delayed execution and
//! the hidden-chain attack chain.

mod fairness;
mod hca;
mod matrix;
mod oca;
mod stationary;

pub use fairness::{
    block_fraction, chain_fractions, compete_prob, honest_chain, honest_chain_printed, legacy_tau_for_ratio,
    reduced_two_state, reduced_two_state_matrix, skip_both_chain, skip_both_chain_printed,
    skip_creation_only_chain, start_schedule, win_probabilities, zero_arrival_prob, MinerProfile,
};
pub use hca::{build_hca_chain, hca_late_fraction, HcaChain, HcaParams, HcaStrategy, HcaState};
pub use matrix::{ChainKind, TransitionMatrix};
pub use oca::oca_late_bound;
pub use stationary::{solve_stationary, solve_stationary_with, SolverConfig, StationaryDistribution};

use thiserror::Error;

use crate::analytic::AnalyticError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("row {row} sums to {sum} (or has an entry outside [0,1])")]
    NotStochastic { row: usize, sum: f64 },
    #[error("stationary solver stopped after {iterations} iterations with residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("chain has {classes} recurrent classes; a unique stationary distribution needs one")]
    NotErgodic { classes: usize },
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}
