use statrs::function::gamma::ln_gamma;

use super::{check_prob_input, AnalyticError};

/// Poisson probability mass at `k`, evaluated in log space.
pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * mean.ln() - mean - ln_gamma(kf + 1.0)).exp()
}

/// Pr[Poisson(mean) <= k].
pub fn poisson_cdf(mean: f64, k: u64) -> f64 {
    1.0 - upper_tail(mean, k + 1)
}

/// Pr[Poisson(mean) >= zeta].
pub fn poisson_burst_tail(mean: f64, zeta: u64) -> Result<f64, AnalyticError> {
    check_prob_input("mean", mean)?;
    Ok(upper_tail(mean, zeta))
}

fn upper_tail(mean: f64, zeta: u64) -> f64 {
    if zeta == 0 {
        return 1.0;
    }
    if mean == 0.0 {
        return 0.0;
    }
    if zeta as f64 > mean {
        // terms above the mode shrink geometrically with ratio mean/(i+1)
        let mut term = poisson_pmf(mean, zeta);
        let mut sum = 0.0;
        let mut i = zeta as f64;
        loop {
            sum += term;
            let ratio = mean / (i + 1.0);
            term *= ratio;
            i += 1.0;
            if term <= sum * 1e-17 || term == 0.0 {
                // remaining mass is below term * r / (1 - r); keep it
                sum += term * ratio / (1.0 - ratio);
                break;
            }
        }
        sum.min(1.0)
    } else {
        let mut term = poisson_pmf(mean, zeta - 1);
        let mut lower = 0.0;
        let mut i = (zeta - 1) as f64;
        loop {
            lower += term;
            if i == 0.0 {
                break;
            }
            term *= i / mean;
            i -= 1.0;
            if term <= lower * 1e-18 {
                break;
            }
        }
        (1.0 - lower).clamp(0.0, 1.0)
    }
}

/// Dense table of Poisson masses covering all but a negligible tail.
#[derive(Debug, Clone)]
pub struct PoissonTable {
    pub start: u64,
    pub pmf: Vec<f64>,
    /// Probability mass not represented in `pmf`.
    pub residual: f64,
}

impl PoissonTable {
    pub fn new(mean: f64, tol: f64) -> Self {
        if mean == 0.0 {
            return PoissonTable { start: 0, pmf: vec![1.0], residual: 0.0 };
        }
        let mode = mean.floor() as u64;
        let anchor = poisson_pmf(mean, mode);
        let mut below = Vec::new();
        let mut t = anchor;
        let mut k = mode;
        while k > 0 {
            t *= k as f64 / mean;
            k -= 1;
            if t < tol * 1e-6 {
                break;
            }
            below.push(t);
        }
        let start = mode - below.len() as u64;
        below.reverse();
        let mut pmf = below;
        pmf.push(anchor);
        let mut t = anchor;
        let mut k = mode;
        loop {
            k += 1;
            t *= mean / k as f64;
            if t < tol * 1e-6 {
                break;
            }
            pmf.push(t);
        }
        let total: f64 = pmf.iter().sum();
        PoissonTable { start, pmf, residual: (1.0 - total).max(0.0) }
    }

    pub fn end(&self) -> u64 {
        self.start + self.pmf.len() as u64
    }

    pub fn get(&self, k: u64) -> f64 {
        if k < self.start || k >= self.end() {
            0.0
        } else {
            self.pmf[(k - self.start) as usize]
        }
    }
}
