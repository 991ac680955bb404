use serde::{Deserialize, Serialize};

use super::poisson::PoissonTable;
use super::{check_prob_input, AnalyticError, RateParams};

const GRID_TOL: f64 = 1e-12;

/// Pr[X - N > 0] with X ~ Poisson(beta t_w) and N ~ Poisson(gamma t_w),
/// gamma = alpha / (1 + delta alpha). Truncated mass is added back, so the
/// value errs upward.
pub fn withhold_success_prob(alpha: f64, beta: f64, delta: f64, t_w: f64) -> Result<f64, AnalyticError> {
    for (name, v) in [("alpha", alpha), ("beta", beta), ("delta", delta), ("t_w", t_w)] {
        check_prob_input(name, v)?;
    }
    if beta == 0.0 || t_w == 0.0 {
        return Ok(0.0);
    }
    let gamma = alpha / (1.0 + delta * alpha);
    let adv = PoissonTable::new(beta * t_w, GRID_TOL);
    let hon = PoissonTable::new(gamma * t_w, GRID_TOL);
    // survival[k] = Pr[X > k] over the adversary table's support
    let len = adv.pmf.len();
    let mut survival = vec![0.0; len];
    let mut acc = 0.0;
    for i in (0..len).rev() {
        survival[i] = acc;
        acc += adv.pmf[i];
    }
    let sf = |n: u64| -> f64 {
        if n < adv.start {
            1.0
        } else if n >= adv.end() {
            0.0
        } else {
            survival[(n - adv.start) as usize]
        }
    };
    let mut p = 0.0;
    for (i, &w) in hon.pmf.iter().enumerate() {
        p += w * sf(hon.start + i as u64);
    }
    Ok((p + adv.residual + hon.residual).min(1.0))
}

/// Grid used by [`select_t_star`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TStarSearch {
    /// Grid step in seconds; `None` means delta/10 (or a tenth of the block
    /// interval when delta is zero).
    pub step: Option<f64>,
    pub max_points: usize,
}

impl Default for TStarSearch {
    fn default() -> Self {
        TStarSearch { step: None, max_points: 50_000_000 }
    }
}

/// Smallest grid time from which the withholding success probability stays
/// at or below `eta` for every later time.
///
/// The scan stops once the Chernoff bound `exp(-t (sqrt(gamma) - sqrt(beta))^2)`
/// drops below `eta`, because that bound dominates the success probability
/// at every later time.
pub fn select_t_star(params: &RateParams, eta: f64, search: TStarSearch) -> Result<f64, AnalyticError> {
    if !(eta > 0.0) || eta > 1.0 {
        return Err(AnalyticError::Domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    if params.beta == 0.0 || eta >= 1.0 {
        return Ok(0.0);
    }
    let gamma = params.gamma();
    if params.beta >= gamma {
        return Err(AnalyticError::NoFiniteTStar { beta: params.beta, gamma });
    }
    let step = match search.step {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(AnalyticError::Domain(format!("grid step must be > 0, got {s}"))),
        None if params.delta > 0.0 => params.delta / 10.0,
        None => 0.1 / params.lambda,
    };
    let gap = (gamma.sqrt() - params.beta.sqrt()).powi(2);
    let mut last_bad: Option<usize> = None;
    for i in 1..=search.max_points {
        let t = i as f64 * step;
        if (-t * gap).exp() <= eta {
            return Ok(last_bad.map_or(0.0, |j| (j + 1) as f64 * step));
        }
        if withhold_success_prob(params.alpha, params.beta, params.delta, t)? > eta {
            last_bad = Some(i);
        }
    }
    Err(AnalyticError::Domain(format!(
        "withholding scan exceeded {} grid points",
        search.max_points
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases() {
        assert_eq!(withhold_success_prob(0.1, 0.0, 1.0, 100.0).unwrap(), 0.0);
        assert_eq!(withhold_success_prob(0.1, 0.05, 1.0, 0.0).unwrap(), 0.0);
        let p = RateParams::new(0.1, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(select_t_star(&p, 0.001, TStarSearch::default()).unwrap(), 0.0);
        let p = RateParams::new(0.1, 0.25, 1.0, 1.0).unwrap();
        assert_eq!(select_t_star(&p, 1.0, TStarSearch::default()).unwrap(), 0.0);
    }

    #[test]
    fn small_window_matches_enumeration() {
        // with tiny means only (X, N) in {0,1,2}^2 matter
        let (a, b, d, t): (f64, f64, f64, f64) = (0.2, 0.1, 0.5, 0.3);
        let g = a / (1.0 + d * a);
        let px = |k: i32| (-(b * t)).exp() * (b * t).powi(k) / [1.0, 1.0, 2.0, 6.0, 24.0][k as usize];
        let pn = |k: i32| (-(g * t)).exp() * (g * t).powi(k) / [1.0, 1.0, 2.0, 6.0, 24.0][k as usize];
        let mut want = 0.0;
        for x in 0..5 {
            for n in 0..x {
                want += px(x) * pn(n);
            }
        }
        let got = withhold_success_prob(a, b, d, t).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} {want}");
    }

    #[test]
    fn adversary_majority_has_no_t_star() {
        let p = RateParams::new(1.0, 0.45, 0.1, 1.0).unwrap();
        assert!(matches!(
            select_t_star(&p, 0.001, TStarSearch::default()),
            Err(AnalyticError::NoFiniteTStar { .. })
        ));
    }

    #[test]
    fn t_star_monotone_in_eta() {
        let p = RateParams::from_ratios(15.0, 0.25, 0.5, 10.0).unwrap();
        let loose = select_t_star(&p, 0.01, TStarSearch::default()).unwrap();
        let tight = select_t_star(&p, 0.001, TStarSearch::default()).unwrap();
        assert!(tight > loose && loose > 0.0);
        let after = withhold_success_prob(p.alpha, p.beta, p.delta, tight).unwrap();
        assert!(after <= 0.001);
    }
}
