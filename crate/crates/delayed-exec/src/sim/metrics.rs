use serde::{Deserialize, Serialize};

/// Counts of withholding attempts by the `Withhold` adversary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WithholdStats {
    /// Private forks whose timer expired.
    pub attempts: u64,
    /// Of those, forks longer than the honest chain when the timer expired.
    pub successes: u64,
    pub released_blocks: u64,
    /// Released blocks that ended in the final main chain.
    pub accepted_blocks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Two honest blocks mined more than delta apart without increasing height.
    HeightOrder,
    /// The shortest honest chain grew less than the selected honest blocks.
    ChainGrowth,
    /// An honest block was not validated by every honest miner within delta.
    LateValidation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub time: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub mined: Vec<u64>,
    pub main_chain: Vec<u64>,
    pub total_mined: u64,
    pub chain_length: u64,
    pub mpu: f64,
    /// Histogram over (honest miner, arriving block) of the TOLs still to be
    /// executed ahead of the block on its chain.
    pub queue_at_arrival: Vec<u64>,
    /// The same histogram restricted to adversary blocks.
    pub adversary_queue_at_arrival: Vec<u64>,
    pub es_fraction: f64,
    /// Main-chain adversary blocks that found at least `zeta` TOLs ahead of
    /// them at the observing honest miner.
    pub late_blocks: u64,
    pub late_fraction: f64,
    /// Mined blocks that are not in the final main chain.
    pub fork_count: u64,
    pub withhold: Option<WithholdStats>,
    pub invariant_violations: Vec<Violation>,
    pub end_time: f64,
}

pub(crate) fn bump(hist: &mut Vec<u64>, k: usize) {
    if hist.len() <= k {
        hist.resize(k + 1, 0);
    }
    hist[k] += 1;
}

impl RunMetrics {
    pub fn arrivals(&self) -> u64 {
        self.queue_at_arrival.iter().sum()
    }

    /// Fraction of recorded arrivals that saw at most `k` TOLs ahead.
    pub fn queue_fraction_at_most(&self, k: usize) -> f64 {
        let n = self.arrivals();
        if n == 0 {
            return 1.0;
        }
        self.queue_at_arrival.iter().take(k + 1).sum::<u64>() as f64 / n as f64
    }

    /// Fraction of adversary-block arrivals that saw at least `zeta` TOLs ahead.
    pub fn adversary_fraction_at_least(&self, zeta: usize) -> f64 {
        let n: u64 = self.adversary_queue_at_arrival.iter().sum();
        if n == 0 {
            return 0.0;
        }
        self.adversary_queue_at_arrival.iter().skip(zeta).sum::<u64>() as f64 / n as f64
    }

    pub fn share_of_main_chain(&self, miner: usize) -> f64 {
        if self.chain_length == 0 {
            0.0
        } else {
            self.main_chain[miner] as f64 / self.chain_length as f64
        }
    }
}
