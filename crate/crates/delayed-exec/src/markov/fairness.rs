use serde::{Deserialize, Serialize};

use super::{solve_stationary, ChainKind, MarkovError, StationaryDistribution, TransitionMatrix};

/// Probability that a miner of rate `lambda_x` finds a block before one of
/// rate `lambda_y` within `t` seconds.
pub fn compete_prob(lambda_x: f64, lambda_y: f64, t: f64) -> f64 {
    if lambda_x == 0.0 {
        return 0.0;
    }
    let s = lambda_x + lambda_y;
    lambda_x / s * (1.0 - (-s * t).exp())
}

/// Probability of no block from a rate-`lambda` miner within `t` seconds.
pub fn zero_arrival_prob(lambda: f64, t: f64) -> f64 {
    (-lambda * t).exp()
}

/// Processing time per block for the legacy model when blocks are validated
/// and created serially: the mean interval is `2 tau + 1/lambda`, so
/// `tau/I = ratio` gives `tau = ratio / ((1 - 2 ratio) lambda)`.
pub fn legacy_tau_for_ratio(ratio: f64, lambda: f64) -> Result<f64, MarkovError> {
    if !(0.0..0.5).contains(&ratio) || !(lambda > 0.0) {
        return Err(MarkovError::Domain(format!("need 0 <= tau/I < 0.5 and lambda > 0, got {ratio}, {lambda}")));
    }
    Ok(ratio / ((1.0 - 2.0 * ratio) * lambda))
}

/// Mining rates of all miners; miner 0 processes blocks in `c * tau`, the
/// others in `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerProfile {
    pub rates: Vec<f64>,
    pub c: f64,
    pub tau: f64,
}

impl MinerProfile {
    pub fn new(rates: Vec<f64>, c: f64, tau: f64) -> Result<Self, MarkovError> {
        if rates.len() < 2 {
            return Err(MarkovError::Domain("need at least two miners".into()));
        }
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) || rates.iter().sum::<f64>() <= 0.0 {
            return Err(MarkovError::Domain("rates must be >= 0 with a positive total".into()));
        }
        if !(0.0..=1.0).contains(&c) {
            return Err(MarkovError::Domain(format!("c must lie in [0,1], got {c}")));
        }
        if !tau.is_finite() || tau < 0.0 {
            return Err(MarkovError::Domain(format!("tau must be >= 0, got {tau}")));
        }
        Ok(MinerProfile { rates, c, tau })
    }

    pub fn from_shares(shares: &[f64], lambda: f64, c: f64, tau: f64) -> Result<Self, MarkovError> {
        let total: f64 = shares.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(MarkovError::Domain(format!("mining shares sum to {total}, not 1")));
        }
        Self::new(shares.iter().map(|s| s * lambda).collect(), c, tau)
    }

    pub fn lambda(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn shares(&self) -> Vec<f64> {
        let l = self.lambda();
        self.rates.iter().map(|r| r / l).collect()
    }

    fn labels(&self) -> Vec<String> {
        (1..=self.rates.len()).map(|i| format!("miner{i}")).collect()
    }
}

/// Probability that each miner finds the next block when miner j starts
/// hashing at `starts[j]` (all clocks memoryless).
pub fn win_probabilities(starts: &[f64], rates: &[f64]) -> Vec<f64> {
    let n = rates.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| starts[a].total_cmp(&starts[b]));
    let mut wins = vec![0.0; n];
    let mut survive = 1.0;
    let mut active_rate = 0.0;
    let mut k = 0;
    while k < n {
        let t = starts[order[k]];
        while k < n && starts[order[k]] == t {
            active_rate += rates[order[k]];
            k += 1;
        }
        if active_rate == 0.0 {
            continue;
        }
        let hit = if k < n { 1.0 - (-active_rate * (starts[order[k]] - t)).exp() } else { 1.0 };
        for &j in &order[..k] {
            wins[j] += survive * rates[j] / active_rate * hit;
        }
        survive *= 1.0 - hit;
    }
    wins
}

/// Hashing start time of every miner after `last` mined the previous block.
///
/// Honest miners validate the received block and then create their own, so
/// they start at `2 tau` (miner 0 at `2 c tau`); the miner who found the
/// previous block only creates (`tau`, or `c tau` for miner 0). A miner that
/// skips validation and creation starts at once; one that only skips
/// creation starts after validating in `c tau`.
pub fn start_schedule(profile: &MinerProfile, kind: ChainKind, last: usize) -> Vec<f64> {
    let (tau, c) = (profile.tau, profile.c);
    let mut s = vec![2.0 * tau; profile.rates.len()];
    match kind {
        ChainKind::SkipBoth => {
            if last != 0 {
                s[last] = tau;
            }
            s[0] = 0.0;
        }
        ChainKind::SkipCreationOnly => {
            if last != 0 {
                s[last] = tau;
                s[0] = c * tau;
            } else {
                s[0] = 0.0;
            }
        }
        _ => {
            if last == 0 {
                s[0] = c * tau;
            } else {
                s[last] = tau;
                s[0] = 2.0 * c * tau;
            }
        }
    }
    s
}

fn interval_chain(profile: &MinerProfile, kind: ChainKind) -> TransitionMatrix {
    let rows = (0..profile.rates.len())
        .map(|u| win_probabilities(&start_schedule(profile, kind, u), &profile.rates))
        .collect();
    TransitionMatrix::from_dense(profile.labels(), kind, rows)
}

/// The transition formulas for the honest chain exactly as printed for
/// `c > 1/2`, without any row check.
pub fn honest_chain_printed(profile: &MinerProfile) -> TransitionMatrix {
    let r = &profile.rates;
    let p = profile.shares();
    let (tau, c) = (profile.tau, profile.c);
    let l1 = r[0];
    let m0 = zero_arrival_prob;
    let n = r.len();
    let mut rows = vec![vec![0.0; n]; n];
    let w = 2.0 * tau - c * tau;
    rows[0][0] = 1.0 - m0(l1, w) + p[0] * m0(l1, w);
    for v in 1..n {
        rows[0][v] = p[v] * m0(l1, w);
    }
    let head = 2.0 * c * tau - tau;
    for u in 1..n {
        let lu = r[u];
        rows[u][0] = m0(lu, head) * (compete_prob(l1, lu, w) + m0(l1 + lu, w) * p[0]);
        rows[u][u] = 1.0 - m0(l1, head) + m0(l1, head) * (compete_prob(lu, l1, w) + m0(l1 + lu, w) * p[u]);
        for v in 1..n {
            if v != u {
                rows[u][v] = m0(l1, head) * m0(l1 + lu, 2.0 * tau - 2.0 * c * tau) * p[v];
            }
        }
    }
    TransitionMatrix::from_dense(profile.labels(), ChainKind::HonestHighTau, rows)
}

/// Honest miners where miner 0 is `1/c` times faster at processing.
///
/// For `c > 1/2` the printed formulas are tried first; they are used only if
/// every row sums to one within 1e-9. Otherwise (and for `c <= 1/2`) the
/// chain comes from the start-time schedule of [`start_schedule`].
pub fn honest_chain(profile: &MinerProfile) -> Result<TransitionMatrix, MarkovError> {
    if profile.c > 0.5 {
        let printed = honest_chain_printed(profile);
        if printed.audit().is_ok() {
            return Ok(printed);
        }
    }
    let m = interval_chain(profile, ChainKind::HonestHighTau);
    m.audit()?;
    Ok(m)
}

/// The printed formulas for miner 0 skipping both validation and creation.
pub fn skip_both_chain_printed(profile: &MinerProfile) -> TransitionMatrix {
    let r = &profile.rates;
    let p = profile.shares();
    let tau = profile.tau;
    let l1 = r[0];
    let m0 = zero_arrival_prob;
    let n = r.len();
    let mut rows = vec![vec![0.0; n]; n];
    rows[0][0] = 1.0 - m0(l1, 2.0 * tau) + p[0] * m0(l1, 2.0 * tau);
    for v in 1..n {
        rows[0][v] = p[v] * m0(l1, 2.0 * tau);
    }
    for u in 1..n {
        let lu = r[u];
        rows[u][0] = 1.0 - m0(l1, tau) + m0(l1, tau) * (compete_prob(l1, lu, tau) + m0(l1 + lu, tau) * p[0]);
        rows[u][u] = m0(l1, tau) * (compete_prob(lu, l1, tau) + m0(l1 + lu, tau) * p[u]);
        for v in 1..n {
            if v != u {
                rows[u][v] = m0(l1, tau) * m0(l1 + lu, tau) * p[v];
            }
        }
    }
    TransitionMatrix::from_dense(profile.labels(), ChainKind::SkipBoth, rows)
}

/// Miner 0 mines on every received block at once, skipping validation and
/// creation; `profile.c` is ignored.
pub fn skip_both_chain(profile: &MinerProfile) -> Result<TransitionMatrix, MarkovError> {
    let m = skip_both_chain_printed(profile);
    m.audit()?;
    Ok(m)
}

/// Miner 0 validates received blocks in `c tau` but skips creating its own.
pub fn skip_creation_only_chain(profile: &MinerProfile) -> Result<TransitionMatrix, MarkovError> {
    let m = interval_chain(profile, ChainKind::SkipCreationOnly);
    m.audit()?;
    Ok(m)
}

/// Adversary (share `f`) against one aggregated honest miner, both skipping
/// rules applied: stationary law in closed form.
pub fn reduced_two_state(f: f64, lambda: f64, tau: f64) -> Result<StationaryDistribution, MarkovError> {
    if !(0.0..1.0).contains(&f) {
        return Err(MarkovError::Domain(format!("f must lie in [0,1), got {f}")));
    }
    let m = zero_arrival_prob(f * lambda, 2.0 * tau);
    let psi1 = 1.0 - m + f * m;
    Ok(StationaryDistribution { psi: vec![psi1, 1.0 - psi1], residual_error: 0.0 })
}

/// The two-state matrix whose stationary law [`reduced_two_state`] gives.
pub fn reduced_two_state_matrix(f: f64, lambda: f64, tau: f64) -> TransitionMatrix {
    let m = zero_arrival_prob(f * lambda, 2.0 * tau);
    let stay = 1.0 - m + f * m;
    let row = vec![stay, 1.0 - stay];
    TransitionMatrix::from_dense(
        vec!["adversary".into(), "honest".into()],
        ChainKind::ReducedTwoState,
        vec![row.clone(), row],
    )
}

/// Long-run fraction of blocks mined by each miner: the mass of transitions
/// entering each state.
pub fn block_fraction(matrix: &TransitionMatrix, psi: &StationaryDistribution) -> Vec<f64> {
    let mut out = vec![0.0; matrix.len()];
    matrix.left_mul(&psi.psi, &mut out);
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

/// Solves the chain and returns per-miner block fractions.
pub fn chain_fractions(m: &TransitionMatrix) -> Result<Vec<f64>, MarkovError> {
    let s = solve_stationary(m)?;
    Ok(block_fraction(m, &s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles;

    fn profile(c: f64, tau: f64) -> MinerProfile {
        MinerProfile::from_shares(&profiles::top_pools(), 1.0 / 15.0, c, tau).unwrap()
    }

    #[test]
    fn elementary_probabilities() {
        assert_eq!(compete_prob(1.0, 2.0, 0.0), 0.0);
        assert!((compete_prob(0.3, 0.3, 1e4) - 0.5).abs() < 1e-9);
        assert_eq!(compete_prob(0.0, 2.0, 5.0), 0.0);
        assert_eq!(zero_arrival_prob(0.4, 0.0), 1.0);
        assert_eq!(zero_arrival_prob(0.0, 9.0), 1.0);
        assert!((zero_arrival_prob(1.0 / 15.0, 30.0) - 0.135335283).abs() < 1e-9);
    }

    #[test]
    fn win_probabilities_sum_to_one() {
        let w = win_probabilities(&[0.0, 1.0, 1.0, 3.0], &[0.2, 0.5, 0.0, 1.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(w[2], 0.0);
        // a late starter can only win if nobody else has finished
        assert!((w[3] - (-0.2f64).exp() * (-1.4f64).exp() * 1.0 / 1.7).abs() < 1e-14);
    }

    #[test]
    fn zero_tau_rows_are_shares() {
        let p = profile(0.5, 0.0);
        let shares = p.shares();
        for m in [
            honest_chain(&p).unwrap(),
            skip_both_chain(&p).unwrap(),
            skip_creation_only_chain(&p).unwrap(),
        ] {
            for i in 0..m.len() {
                for (j, s) in shares.iter().enumerate() {
                    assert!((m.get(i, j) - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn printed_honest_formulas_are_not_stochastic() {
        let p = profile(0.6, legacy_tau_for_ratio(0.26, 1.0 / 15.0).unwrap());
        let printed = honest_chain_printed(&p);
        assert!(printed.max_row_deviation() > 1e-3);
        // the shipped chain falls back to the derived schedule
        let m = honest_chain(&p).unwrap();
        assert!(m.max_row_deviation() < 1e-12);
    }

    #[test]
    fn printed_skip_formulas_match_schedule() {
        let p = profile(0.0, 7.0);
        let printed = skip_both_chain_printed(&p);
        let derived = interval_chain(&p, ChainKind::SkipBoth);
        for i in 0..p.rates.len() {
            for j in 0..p.rates.len() {
                assert!((printed.get(i, j) - derived.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn honest_with_instant_processing_equals_skip_both() {
        let p = profile(0.0, 6.0);
        let a = honest_chain(&p).unwrap();
        let b = skip_both_chain(&p).unwrap();
        assert!(a.to_dense().iter().flatten().zip(b.to_dense().iter().flatten()).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn reduced_two_state_cases() {
        let s = reduced_two_state(0.0, 0.1, 5.0).unwrap();
        assert_eq!(s.psi, vec![0.0, 1.0]);
        let s = reduced_two_state(0.3, 0.1, 0.0).unwrap();
        assert!((s.psi[0] - 0.3).abs() < 1e-15);
        let (f, l, t) = (1.0 / 3.0, 1.0 / 15.0, 3.0);
        let solved = solve_stationary(&reduced_two_state_matrix(f, l, t)).unwrap();
        let closed = reduced_two_state(f, l, t).unwrap();
        assert!((solved.psi[0] - closed.psi[0]).abs() < 1e-12);
    }

    #[test]
    fn uniform_profile_is_fair_without_processing() {
        let p = MinerProfile::from_shares(&profiles::equal(5), 0.2, 1.0, 0.0).unwrap();
        let f = chain_fractions(&honest_chain(&p).unwrap()).unwrap();
        assert!(f.iter().all(|v| (v - 0.2).abs() < 1e-12));
    }

    #[test]
    fn skip_without_adversary_power() {
        let mut shares = profiles::equal(4);
        shares[0] = 0.0;
        let s: f64 = shares.iter().sum();
        shares.iter_mut().for_each(|v| *v /= s);
        let p = MinerProfile::from_shares(&shares, 0.1, 0.0, 4.0).unwrap();
        let f = chain_fractions(&skip_both_chain(&p).unwrap()).unwrap();
        assert!(f[0].abs() < 1e-15);
        assert!(f[1..].iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-12));
    }
}
