//! Mining-power profiles used by the fairness analyses and the simulator.

/// Percent of blocks mined by the 14 largest Ethereum pools over a
/// measurement window (they cover 97.08% of the blocks).
pub const TOP_POOLS_PERCENT: [f64; 14] = [
    32.98, 16.16, 15.06, 5.72, 5.67, 4.41, 4.14, 3.53, 2.61, 1.84, 1.34, 1.32, 1.25, 1.05,
];

/// The 14 pools renormalized to sum to one.
pub fn top_pools() -> Vec<f64> {
    let total: f64 = TOP_POOLS_PERCENT.iter().sum();
    TOP_POOLS_PERCENT.iter().map(|p| p / total).collect()
}

/// The 14 pools plus `extra` equal miners sharing the uncovered remainder.
pub fn pools_with_tail(extra: usize) -> Vec<f64> {
    let covered: f64 = TOP_POOLS_PERCENT.iter().sum();
    let mut v: Vec<f64> = TOP_POOLS_PERCENT.iter().map(|p| p / 100.0).collect();
    if extra == 0 {
        return top_pools();
    }
    let each = (100.0 - covered) / 100.0 / extra as f64;
    v.extend(std::iter::repeat(each).take(extra));
    v
}

/// 50 miners: the 14 pools and 36 equal small miners.
pub fn fifty_miners() -> Vec<f64> {
    pools_with_tail(36)
}

/// Replaces miner 0's share by `first` and rescales the others proportionally.
pub fn with_first_share(shares: &[f64], first: f64) -> Vec<f64> {
    let rest: f64 = shares[1..].iter().sum();
    std::iter::once(first)
        .chain(shares[1..].iter().map(|s| s * (1.0 - first) / rest))
        .collect()
}

/// `n` equal shares.
pub fn equal(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}
