use super::MarkovError;
use crate::analytic::{md1_tail, AnalyticError, RateParams};

/// Upper bound on the fraction of flooding-adversary blocks that reach an
/// honest queue holding at least `zeta` blocks.
pub fn oca_late_bound(params: &RateParams, zeta: u32) -> Result<f64, MarkovError> {
    let rho = (params.alpha + params.beta) * params.tau;
    md1_tail(rho, zeta as u64).map_err(|e| match e {
        AnalyticError::Utilization { rho, .. } => {
            MarkovError::Analytic(AnalyticError::Utilization { rho, lambda_bar: params.alpha + params.beta })
        }
        other => other.into(),
    })
}
