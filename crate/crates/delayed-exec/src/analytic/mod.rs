//! Queueing bounds used to pick the execution delay and to bound late blocks.

mod md1;
mod poisson;
mod rates;
mod withhold;
mod zeta;

pub use md1::{md1_stationary, md1_tail, Md1Distribution};
pub use poisson::{poisson_burst_tail, poisson_cdf, poisson_pmf, PoissonTable};
pub use rates::RateParams;
pub use withhold::{select_t_star, withhold_success_prob, TStarSearch};
pub use zeta::{
    choose_zeta, honest_bound, zeta_bound, QueueTailBound, ZetaSearch, DEFAULT_MAX_ZETA,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("utilization {rho} >= 1 (arrival rate {lambda_bar} blocks/s); shrink the slack factors or tau")]
    Utilization { rho: f64, lambda_bar: f64 },
    #[error("{0}")]
    Domain(String),
    #[error("no finite withholding time: adversary rate {beta} >= effective honest rate {gamma}")]
    NoFiniteTStar { beta: f64, gamma: f64 },
    #[error("no zeta <= {max_zeta} brings the bound below {target}")]
    Saturation { max_zeta: u32, target: f64 },
}

pub(crate) fn check_prob_input(name: &str, v: f64) -> Result<(), AnalyticError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(AnalyticError::Domain(format!("{name} must be finite and >= 0, got {v}")))
    }
}
