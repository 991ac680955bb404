use serde::{Deserialize, Serialize};

use super::AnalyticError;

/// Stationary queue-length distribution of an M/D/1 queue, truncated at `cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Md1Distribution {
    pub rho: f64,
    pub probabilities: Vec<f64>,
    pub cutoff: usize,
    pub residual: f64,
}

impl Md1Distribution {
    pub fn tail_from(&self, zeta: usize) -> f64 {
        if zeta > self.cutoff {
            return self.residual;
        }
        self.probabilities[zeta..].iter().sum::<f64>() + self.residual
    }
}

fn check_rho(rho: f64) -> Result<(), AnalyticError> {
    if !rho.is_finite() || rho < 0.0 {
        return Err(AnalyticError::Domain(format!("utilization must be >= 0, got {rho}")));
    }
    if rho >= 1.0 {
        return Err(AnalyticError::Utilization { rho, lambda_bar: f64::NAN });
    }
    Ok(())
}

/// Generates pi_0, pi_1, ... of the embedded chain one at a time.
///
/// Uses the level-crossing balance between n and n+1:
/// `a_0 pi_{n+1} = pi_0 abar_n + sum_{k=1..n} pi_k abar_{n+1-k}`,
/// where `a_k` is the Poisson(rho) mass of arrivals during one service and
/// `abar_j = Pr[A > j]`. Every term is non-negative, so deep tails keep
/// full relative precision.
struct Md1Recursion {
    a0: f64,
    abar: Vec<f64>,
    pi: Vec<f64>,
}

impl Md1Recursion {
    fn new(rho: f64) -> Self {
        let a0 = (-rho).exp();
        let mut a = vec![a0];
        let mut k = 0usize;
        loop {
            k += 1;
            let next = a[k - 1] * rho / k as f64;
            if next == 0.0 || k > 600 {
                break;
            }
            a.push(next);
        }
        let mut abar = vec![0.0; a.len()];
        let mut acc = 0.0;
        for j in (0..a.len()).rev() {
            abar[j] = acc;
            acc += a[j];
        }
        Md1Recursion { a0, abar, pi: vec![1.0 - rho] }
    }

    fn abar(&self, j: usize) -> f64 {
        self.abar.get(j).copied().unwrap_or(0.0)
    }

    /// Returns pi_n for the next unseen n.
    fn advance(&mut self) -> f64 {
        let n = self.pi.len() - 1;
        let mut s = self.pi[0] * self.abar(n);
        let lo = (n + 1).saturating_sub(self.abar.len()).max(1);
        for k in lo..=n {
            s += self.pi[k] * self.abar(n + 1 - k);
        }
        let v = s / self.a0;
        self.pi.push(v);
        v
    }

    fn ensure(&mut self, upto: usize) {
        while self.pi.len() <= upto {
            self.advance();
        }
    }
}

/// Larger root of `exp(rho (z - 1)) = z`; the tail of the queue length decays like `z^-n`.
fn decay_root(rho: f64) -> f64 {
    let mut z = 2.0 / rho + 1.0;
    for _ in 0..200 {
        let f = rho * (z - 1.0) - z.ln();
        let df = rho - 1.0 / z;
        let step = f / df;
        z -= step;
        if step.abs() < 1e-15 * z {
            break;
        }
    }
    z
}

pub fn md1_stationary(rho: f64, cutoff: usize) -> Result<Md1Distribution, AnalyticError> {
    check_rho(rho)?;
    if cutoff < 1 {
        return Err(AnalyticError::Domain("cutoff must be >= 1".into()));
    }
    let mut probabilities = vec![0.0; cutoff + 1];
    probabilities[0] = 1.0 - rho;
    if rho > 0.0 {
        let mut rec = Md1Recursion::new(rho);
        rec.ensure(cutoff);
        probabilities.copy_from_slice(&rec.pi[..=cutoff]);
    }
    let total: f64 = probabilities.iter().sum();
    Ok(Md1Distribution { rho, probabilities, cutoff, residual: (1.0 - total).max(0.0) })
}

/// Pr[Q >= zeta] for the stationary M/D/1 queue with utilization `rho`.
pub fn md1_tail(rho: f64, zeta: u64) -> Result<f64, AnalyticError> {
    check_rho(rho)?;
    if zeta == 0 {
        return Ok(1.0);
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    let zeta = zeta as usize;
    let mut rec = Md1Recursion::new(rho);
    rec.ensure(zeta - 1);
    let head: f64 = rec.pi[..zeta].iter().sum();
    let complement = 1.0 - head;
    if complement > 1e-3 {
        return Ok(complement.min(1.0));
    }
    let limiting = 1.0 / decay_root(rho);
    let mut tail = 0.0;
    let mut prev = rec.pi[zeta - 1];
    let cap = zeta + 2_000_000;
    for n in zeta..cap {
        let v = rec.advance();
        debug_assert_eq!(rec.pi.len(), n + 1);
        tail += v;
        if v == 0.0 {
            return Ok(tail);
        }
        let r = if prev > 0.0 { (v / prev).max(limiting) } else { limiting };
        prev = v;
        let rest = v * r / (1.0 - r);
        if rest <= 1e-15 * tail {
            return Ok((tail + rest).min(1.0));
        }
    }
    Ok(complement.max(tail).min(1.0))
}
