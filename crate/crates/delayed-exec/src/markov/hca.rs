use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{solve_stationary, ChainKind, MarkovError, TransitionMatrix};
use crate::analytic::PoissonTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HcaStrategy {
    /// Reset after release: the adversary mines privately on its released tip.
    Rar,
    /// Mine after release: blocks found while honest miners still cannot
    /// validate the released chain are published at once.
    Mar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HcaParams {
    pub zeta: u32,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub m_cap: u32,
    pub strategy: HcaStrategy,
}

impl HcaParams {
    /// Defaults: omega = 0.5 and truncation at zeta + 50.
    pub fn new(zeta: u32, tau: f64, alpha: f64, beta: f64, strategy: HcaStrategy) -> Self {
        HcaParams { zeta, tau, alpha, beta, omega: 0.5, m_cap: zeta + 50, strategy }
    }

    fn check(&self) -> Result<(), MarkovError> {
        if self.zeta < 1 || self.m_cap < 2 {
            return Err(MarkovError::Domain("need zeta >= 1 and truncation height >= 2".into()));
        }
        if !(self.alpha > 0.0) || !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(MarkovError::Domain("need alpha > 0 and beta >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(MarkovError::Domain(format!("omega must lie in [0,1], got {}", self.omega)));
        }
        if !(self.tau >= 0.0) {
            return Err(MarkovError::Domain("tau must be >= 0".into()));
        }
        if self.strategy == HcaStrategy::Mar && self.beta * self.tau >= 1.0 {
            return Err(MarkovError::Domain("silent periods never end when beta * tau >= 1".into()));
        }
        Ok(())
    }
}

/// State (x, y): honest blocks and hidden adversary blocks since the fork.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HcaState {
    pub x: u32,
    pub y: u32,
}

/// Expected block counts attached to one transition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub late: f64,
    pub total: f64,
    pub adversary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcaChain {
    pub params: HcaParams,
    pub states: Vec<HcaState>,
    pub matrix: TransitionMatrix,
    /// Per row, the expected counts given each taken transition, keyed by target.
    pub counts: Vec<Vec<(usize, TransitionCounts)>>,
}

impl HcaChain {
    pub fn counts(&self, i: usize, j: usize) -> TransitionCounts {
        self.counts[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(TransitionCounts::default(), |k| self.counts[i][k].1)
    }
}

struct Builder {
    index: HashMap<HcaState, usize>,
    // target, probability, counts
    rows: Vec<Vec<(usize, f64, TransitionCounts)>>,
}

impl Builder {
    fn add(&mut self, from: usize, to: HcaState, p: f64, c: TransitionCounts) {
        if p > 0.0 {
            self.rows[from].push((self.index[&to], p, c));
        }
    }
}

pub fn build_hca_chain(params: HcaParams) -> Result<HcaChain, MarkovError> {
    params.check()?;
    let m = params.m_cap;
    let lambda = params.alpha + params.beta;
    let p = params.alpha / lambda;
    let q = params.beta / lambda;
    let st = |x, y| HcaState { x, y };

    let mut states = vec![st(0, 0), st(0, 1), st(1, 1)];
    for y in 2..=m {
        for x in 0..=y - 2 {
            states.push(st(x, y));
        }
    }
    let index: HashMap<HcaState, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut b = Builder { index, rows: vec![Vec::new(); states.len()] };

    let none = TransitionCounts::default();
    let release = |b: &mut Builder, from: usize, y: u32, w: f64| {
        let yf = y as f64;
        if y <= params.zeta {
            let c = TransitionCounts { late: 0.0, total: yf, adversary: yf };
            b.add(from, st(0, 0), w, c);
            return;
        }
        let late = (y - params.zeta) as f64;
        let first_silence = params.beta * (y - params.zeta + 1) as f64 * params.tau;
        match params.strategy {
            HcaStrategy::Rar => {
                // blocks found during the silent period start the next hidden chain
                let c = TransitionCounts { late, total: yf, adversary: yf };
                let table = PoissonTable::new(first_silence, 1e-14);
                let mut used = 0.0;
                for j in 0..m - 1 {
                    let pj = table.get(j as u64);
                    used += pj;
                    b.add(from, st(0, j), w * pj, c);
                }
                b.add(from, st(0, m - 1), w * (1.0 - used).max(0.0), c);
            }
            HcaStrategy::Mar => {
                // each published block extends the silence by tau
                let mut gen = first_silence;
                let mut extra = 0.0;
                while gen > 1e-12 {
                    extra += gen;
                    gen *= params.beta * params.tau;
                }
                let c = TransitionCounts { late: late + extra, total: yf + extra, adversary: yf + extra };
                b.add(from, st(0, 0), w, c);
            }
        }
    };

    for (i, s) in states.clone().into_iter().enumerate() {
        match (s.x, s.y) {
            (0, 0) => {
                b.add(i, st(0, 0), p, TransitionCounts { late: 0.0, total: 1.0, adversary: 0.0 });
                b.add(i, st(0, 1), q, none);
            }
            (0, 1) => {
                b.add(i, st(1, 1), p, none);
                b.add(i, st(0, 2), q, none);
            }
            (1, 1) => {
                // the next block settles the race: adversary (q), honest on the
                // adversary's block ((1-omega) p) or honest on its own (omega p)
                let adv = 2.0 * q + (1.0 - params.omega) * p;
                b.add(i, st(0, 0), 1.0, TransitionCounts { late: 0.0, total: 2.0, adversary: adv });
            }
            (_, y) if y == m => release(&mut b, i, m, 1.0),
            (x, y) => {
                if x + 2 == y {
                    release(&mut b, i, y, p);
                } else {
                    b.add(i, st(x + 1, y), p, none);
                }
                b.add(i, st(x, y + 1), q, none);
            }
        }
    }

    let mut rows = Vec::with_capacity(states.len());
    let mut counts = Vec::with_capacity(states.len());
    for r in b.rows {
        let mut merged: Vec<(usize, f64, TransitionCounts)> = Vec::new();
        let mut r = r;
        r.sort_by_key(|e| e.0);
        for (j, pj, c) in r {
            match merged.last_mut() {
                Some(last) if last.0 == j => {
                    // keep conditional expectations: weight by probability
                    let tot = last.1 + pj;
                    let mix = |a: f64, b: f64| (a * last.1 + b * pj) / tot;
                    last.2 = TransitionCounts {
                        late: mix(last.2.late, c.late),
                        total: mix(last.2.total, c.total),
                        adversary: mix(last.2.adversary, c.adversary),
                    };
                    last.1 = tot;
                }
                _ => merged.push((j, pj, c)),
            }
        }
        rows.push(merged.iter().map(|&(j, pj, _)| (j, pj)).collect::<Vec<_>>());
        counts.push(merged.iter().map(|&(j, _, c)| (j, c)).collect::<Vec<_>>());
    }
    let labels = states.iter().map(|s| format!("({},{})", s.x, s.y)).collect();
    let matrix = TransitionMatrix::from_sparse(labels, ChainKind::Hca, rows);
    matrix.audit()?;
    let classes = matrix.recurrent_class_count();
    if classes != 1 {
        return Err(MarkovError::NotErgodic { classes });
    }
    Ok(HcaChain { params, states, matrix, counts })
}

/// Long-run (late fraction, adversary fraction) of main-chain blocks.
pub fn hca_late_fraction(chain: &HcaChain) -> Result<(f64, f64), MarkovError> {
    let psi = solve_stationary(&chain.matrix)?.psi;
    let (mut late, mut total, mut adv) = (0.0, 0.0, 0.0);
    for (i, &w) in psi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (&(j, pj), &(jj, c)) in chain.matrix.row(i).iter().zip(&chain.counts[i]) {
            debug_assert_eq!(j, jj);
            late += w * pj * c.late;
            total += w * pj * c.total;
            adv += w * pj * c.adversary;
        }
    }
    Ok((late / total, adv / total))
}
