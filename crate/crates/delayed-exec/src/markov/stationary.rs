use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{MarkovError, TransitionMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDistribution {
    pub psi: Vec<f64>,
    /// max_j |(psi P)_j - psi_j|
    pub residual_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Chains with at most this many states are solved directly.
    pub direct_limit: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { direct_limit: 200, max_iterations: 1_000_000, tolerance: 1e-10 }
    }
}

pub fn solve_stationary(matrix: &TransitionMatrix) -> Result<StationaryDistribution, MarkovError> {
    solve_stationary_with(matrix, &SolverConfig::default())
}

pub fn solve_stationary_with(
    matrix: &TransitionMatrix,
    cfg: &SolverConfig,
) -> Result<StationaryDistribution, MarkovError> {
    matrix.audit()?;
    let n = matrix.len();
    if n == 0 {
        return Err(MarkovError::Domain("empty chain".into()));
    }
    let classes = matrix.recurrent_class_count();
    if classes != 1 {
        return Err(MarkovError::NotErgodic { classes });
    }
    let start = if n <= cfg.direct_limit { direct(matrix) } else { None };
    let mut psi = start.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    let mut next = vec![0.0; n];
    let mut residual = residual_of(matrix, &psi, &mut next);
    let mut it = 0;
    // lazy chain (P + I)/2: same fixed point, aperiodic
    while residual >= cfg.tolerance {
        if it >= cfg.max_iterations {
            return Err(MarkovError::NonConvergence { iterations: it, residual });
        }
        for _ in 0..16 {
            matrix.left_mul(&psi, &mut next);
            for (p, q) in psi.iter_mut().zip(&next) {
                *p = 0.5 * (*p + q);
            }
            it += 1;
        }
        normalize(&mut psi);
        residual = residual_of(matrix, &psi, &mut next);
    }
    Ok(StationaryDistribution { psi, residual_error: residual })
}

fn residual_of(m: &TransitionMatrix, psi: &[f64], scratch: &mut [f64]) -> f64 {
    m.left_mul(psi, scratch);
    psi.iter().zip(scratch.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
}

/// Solves psi (P - I) = 0 with sum(psi) = 1 by LU on the transposed system.
fn direct(m: &TransitionMatrix) -> Option<Vec<f64>> {
    let n = m.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for &(j, p) in m.row(i) {
            a[(j, i)] += p;
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    let mut psi: Vec<f64> = x.iter().copied().collect();
    if psi.iter().any(|v| !v.is_finite()) {
        return None;
    }
    normalize(&mut psi);
    Some(psi)
}
