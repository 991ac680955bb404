use serde::{Deserialize, Serialize};

use super::AnalyticError;

/// Mining and network rates for one parameter point. Rates are blocks/second,
/// times are seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub lambda: f64,
    pub f_max: f64,
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub delta: f64,
}

impl RateParams {
    pub fn new(lambda: f64, f_max: f64, tau: f64, delta: f64) -> Result<Self, AnalyticError> {
        for (name, v) in [("lambda", lambda), ("tau", tau), ("delta", delta), ("f_max", f_max)] {
            if !v.is_finite() || v < 0.0 {
                return Err(AnalyticError::Domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if f_max >= 0.5 {
            return Err(AnalyticError::Domain(format!("f_max must be < 0.5, got {f_max}")));
        }
        let beta = f_max * lambda;
        Ok(RateParams { lambda, f_max, alpha: lambda - beta, beta, tau, delta })
    }

    /// Parameters expressed relative to the mean block interval `interval`:
    /// `tau_ratio` = tau/I and `delay_ratio` = I/Delta.
    pub fn from_ratios(
        interval: f64,
        f_max: f64,
        tau_ratio: f64,
        delay_ratio: f64,
    ) -> Result<Self, AnalyticError> {
        if !(interval > 0.0) || !(delay_ratio > 0.0) {
            return Err(AnalyticError::Domain("interval and I/delta must be > 0".into()));
        }
        Self::new(1.0 / interval, f_max, tau_ratio * interval, interval / delay_ratio)
    }

    /// Honest chain growth rate after discounting network delay.
    pub fn gamma(&self) -> f64 {
        self.alpha / (1.0 + self.delta * self.alpha)
    }

    pub fn utilization(&self) -> f64 {
        self.lambda * self.tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_exact() {
        let p = RateParams::new(1.0 / 15.0, 0.25, 7.5, 1.5).unwrap();
        assert!((p.alpha + p.beta - p.lambda).abs() <= f64::EPSILON * p.lambda);
        assert!((p.gamma() - p.alpha / (1.0 + 1.5 * p.alpha)).abs() < 1e-18);
    }

    #[test]
    fn rejects_half_power() {
        assert!(RateParams::new(1.0, 0.5, 0.1, 0.1).is_err());
        assert!(RateParams::new(-1.0, 0.1, 0.1, 0.1).is_err());
    }
}
