use serde::{Deserialize, Serialize};

use super::MarkovError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainKind {
    HonestHighTau,
    SkipBoth,
    SkipCreationOnly,
    ReducedTwoState,
    Hca,
}

/// Row-stochastic matrix with labeled states, stored as sparse rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub labels: Vec<String>,
    pub kind: ChainKind,
    rows: Vec<Vec<(usize, f64)>>,
}

pub(crate) const ROW_TOL: f64 = 1e-9;

impl TransitionMatrix {
    /// Builds from sparse rows; entries for the same column are merged and
    /// zero entries dropped. Does not check stochasticity (see [`Self::audit`]).
    pub fn from_sparse(labels: Vec<String>, kind: ChainKind, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.sort_by_key(|&(j, _)| j);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(r.len());
                for (j, p) in r {
                    match merged.last_mut() {
                        Some(last) if last.0 == j => last.1 += p,
                        _ => merged.push((j, p)),
                    }
                }
                merged.retain(|&(_, p)| p != 0.0);
                merged
            })
            .collect();
        TransitionMatrix { labels, kind, rows }
    }

    pub fn from_dense(labels: Vec<String>, kind: ChainKind, dense: Vec<Vec<f64>>) -> Self {
        let rows = dense
            .into_iter()
            .map(|r| r.into_iter().enumerate().collect())
            .collect();
        Self::from_sparse(labels, kind, rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0.0; n];
                for &(j, p) in r {
                    d[j] = p;
                }
                d
            })
            .collect()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, p)| p).sum()
    }

    /// Largest |row sum - 1| over all rows.
    pub fn max_row_deviation(&self) -> f64 {
        (0..self.len()).map(|i| (self.row_sum(i) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Checks every row sums to one within 1e-9 with entries in [0, 1].
    pub fn audit(&self) -> Result<(), MarkovError> {
        for (i, r) in self.rows.iter().enumerate() {
            let sum: f64 = r.iter().map(|&(_, p)| p).sum();
            let bad_entry = r.iter().any(|&(_, p)| !(-ROW_TOL..=1.0 + ROW_TOL).contains(&p));
            if bad_entry || !((sum - 1.0).abs() <= ROW_TOL) {
                return Err(MarkovError::NotStochastic { row: i, sum });
            }
        }
        Ok(())
    }

    /// `x P` for a row vector `x`.
    pub fn left_mul(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, r) in self.rows.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &(j, p) in r {
                out[j] += xi * p;
            }
        }
    }

    /// Number of closed communicating classes (each supports one stationary law).
    pub fn recurrent_class_count(&self) -> usize {
        let comp = self.strong_components();
        let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
        let mut leaks = vec![false; ncomp];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, _) in r {
                if comp[i] != comp[j] {
                    leaks[comp[i]] = true;
                }
            }
        }
        leaks.iter().filter(|&&l| !l).count()
    }

    // Kosaraju with explicit stacks.
    fn strong_components(&self) -> Vec<usize> {
        let n = self.len();
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut stack = vec![(s, 0usize)];
            while let Some(&mut (v, ref mut k)) = stack.last_mut() {
                if let Some(&(w, _)) = self.rows[v].get(*k) {
                    *k += 1;
                    if !seen[w] {
                        seen[w] = true;
                        stack.push((w, 0));
                    }
                } else {
                    order.push(v);
                    stack.pop();
                }
            }
        }
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, _) in r {
                rev[j].push(i);
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for &s in order.iter().rev() {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &rev[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}
