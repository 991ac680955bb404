use serde::{Deserialize, Serialize};

use super::md1::md1_tail;
use super::poisson::poisson_burst_tail;
use super::withhold::{select_t_star, TStarSearch};
use super::{AnalyticError, RateParams};

pub const DEFAULT_MAX_ZETA: u32 = 10_000;

/// Both terms of the queue-overflow bound at one (zeta, eps0, eps1) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueTailBound {
    pub zeta: u32,
    pub s0: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub t_star: f64,
    pub lambda_bar: f64,
    pub md1_tail: f64,
    pub burst_tail: f64,
    pub total: f64,
}

fn check_eps(eps0: f64, eps1: f64) -> Result<(), AnalyticError> {
    if !(eps0 > 0.0) || !(eps1 > 0.0) {
        return Err(AnalyticError::Domain(format!("slack factors must be > 0, got {eps0}, {eps1}")));
    }
    Ok(())
}

/// Upper bound on Pr[Q >= zeta] for an honest queue when the adversary
/// withholds blocks for at most `t_star` seconds.
pub fn zeta_bound(
    params: &RateParams,
    zeta: u32,
    eps0: f64,
    eps1: f64,
    t_star: f64,
) -> Result<QueueTailBound, AnalyticError> {
    check_eps(eps0, eps1)?;
    if !(t_star >= 0.0) {
        return Err(AnalyticError::Domain(format!("t_star must be >= 0, got {t_star}")));
    }
    let lambda_bar = (1.0 + eps0) * params.alpha + (1.0 + eps1) * params.beta;
    let rho = lambda_bar * params.tau;
    if rho >= 1.0 {
        return Err(AnalyticError::Utilization { rho, lambda_bar });
    }
    let s0 = (params.delta / eps0).max(t_star / eps1);
    let md1 = md1_tail(rho, zeta as u64)?;
    let burst = poisson_burst_tail(lambda_bar * s0, zeta as u64)?;
    Ok(QueueTailBound {
        zeta,
        s0,
        eps0,
        eps1,
        t_star,
        lambda_bar,
        md1_tail: md1,
        burst_tail: burst,
        total: (md1 + burst).min(1.0),
    })
}

/// The bound with no adversary: only honest blocks, each delayed at most delta.
pub fn honest_bound(alpha: f64, tau: f64, delta: f64, zeta: u32, eps0: f64) -> Result<QueueTailBound, AnalyticError> {
    check_eps(eps0, 1.0)?;
    let lambda_bar = (1.0 + eps0) * alpha;
    let rho = lambda_bar * tau;
    if rho >= 1.0 {
        return Err(AnalyticError::Utilization { rho, lambda_bar });
    }
    let s0 = delta / eps0;
    let md1 = md1_tail(rho, zeta as u64)?;
    let burst = poisson_burst_tail(lambda_bar * s0, zeta as u64)?;
    Ok(QueueTailBound {
        zeta,
        s0,
        eps0,
        eps1: f64::NAN,
        t_star: 0.0,
        lambda_bar,
        md1_tail: md1,
        burst_tail: burst,
        total: (md1 + burst).min(1.0),
    })
}

/// Search settings for [`choose_zeta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaSearch {
    pub eps_grid: Vec<f64>,
    pub max_zeta: u32,
    pub t_star: TStarSearch,
}

impl Default for ZetaSearch {
    fn default() -> Self {
        ZetaSearch {
            eps_grid: (1..=60).map(|k| 0.05 * k as f64).collect(),
            max_zeta: DEFAULT_MAX_ZETA,
            t_star: TStarSearch::default(),
        }
    }
}

impl ZetaSearch {
    /// Smallest bound over the slack grid at a fixed zeta. Errors when no
    /// grid point keeps the inflated utilization below one.
    pub fn best_bound(&self, params: &RateParams, zeta: u32, t_star: f64) -> Result<QueueTailBound, AnalyticError> {
        // eps1 only matters when the adversary term is present
        let eps1_grid: &[f64] = if params.beta == 0.0 && t_star == 0.0 {
            &self.eps_grid[..1]
        } else {
            &self.eps_grid
        };
        let mut best: Option<QueueTailBound> = None;
        let mut first_err = None;
        for &e0 in &self.eps_grid {
            for &e1 in eps1_grid {
                match zeta_bound(params, zeta, e0, e1, t_star) {
                    Ok(b) => {
                        if best.map_or(true, |cur| b.total < cur.total) {
                            best = Some(b);
                        }
                    }
                    Err(e @ AnalyticError::Utilization { .. }) => {
                        first_err.get_or_insert(e);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        match (best, first_err) {
            (Some(b), _) => Ok(b),
            (None, Some(e)) => Err(e),
            (None, None) => Err(AnalyticError::Domain("empty slack grid".into())),
        }
    }
}

/// Minimal zeta whose best bound falls below `target`, searched by
/// doubling and then bisection.
pub fn choose_zeta(
    params: &RateParams,
    eta: f64,
    target: f64,
    search: &ZetaSearch,
) -> Result<(u32, QueueTailBound), AnalyticError> {
    if !(target > 0.0) {
        return Err(AnalyticError::Domain(format!("target must be > 0, got {target}")));
    }
    let t_star = select_t_star(params, eta, search.t_star)?;
    if target >= 1.0 {
        return Ok((1, search.best_bound(params, 1, t_star)?));
    }
    let ok = |z: u32| -> Result<Option<QueueTailBound>, AnalyticError> {
        let b = search.best_bound(params, z, t_star)?;
        Ok((b.total < target).then_some(b))
    };
    let mut lo = 0u32;
    let mut hi = 1u32;
    let mut hit = loop {
        if let Some(b) = ok(hi)? {
            break b;
        }
        if hi >= search.max_zeta {
            return Err(AnalyticError::Saturation { max_zeta: search.max_zeta, target });
        }
        lo = hi;
        hi = (hi * 2).min(search.max_zeta);
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match ok(mid)? {
            Some(b) => {
                hi = mid;
                hit = b;
            }
            None => lo = mid,
        }
    }
    Ok((hi, hit))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchor() -> RateParams {
        RateParams::from_ratios(15.0, 0.25, 0.5, 10.0).unwrap()
    }

    #[test]
    fn zeta_zero_is_clamped() {
        let b = zeta_bound(&anchor(), 0, 0.1, 0.1, 100.0).unwrap();
        assert_eq!(b.total, 1.0);
    }

    #[test]
    fn honest_path_is_the_reduction() {
        let p = RateParams::from_ratios(15.0, 0.0, 0.5, 10.0).unwrap();
        for z in [1, 5, 20, 40] {
            for e0 in [0.05, 0.3, 0.9] {
                let a = zeta_bound(&p, z, e0, 0.7, 0.0).unwrap();
                let b = honest_bound(p.alpha, p.tau, p.delta, z, e0).unwrap();
                assert_eq!(a.total, b.total);
                assert_eq!(a.s0, b.s0);
            }
        }
    }

    #[test]
    fn utilization_error_reports_rate() {
        let e = zeta_bound(&anchor(), 10, 3.0, 3.0, 10.0).unwrap_err();
        match e {
            AnalyticError::Utilization { lambda_bar, .. } => assert!(lambda_bar > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn target_one_gives_one() {
        let (z, _) = choose_zeta(&anchor(), 0.001, 1.0, &ZetaSearch::default()).unwrap();
        assert_eq!(z, 1);
    }

    #[test]
    fn saturation_is_reported() {
        let search = ZetaSearch { max_zeta: 8, ..ZetaSearch::default() };
        let e = choose_zeta(&anchor(), 0.001, 0.01, &search).unwrap_err();
        assert!(matches!(e, AnalyticError::Saturation { max_zeta: 8, .. }));
    }

    #[test]
    fn chosen_zeta_is_minimal() {
        let p = RateParams::from_ratios(15.0, 0.25, 0.33, 10.0).unwrap();
        let search = ZetaSearch::default();
        let (z, b) = choose_zeta(&p, 0.001, 0.01, &search).unwrap();
        assert!(b.total < 0.01);
        let below = search.best_bound(&p, z - 1, b.t_star).unwrap();
        assert!(below.total >= 0.01);
    }
}
