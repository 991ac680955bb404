use serde::{Deserialize, Serialize};

use super::SimError;
use crate::markov::HcaStrategy;

/// One miner: share of total mining power and processing-time ratio
/// (its processing time is `c * tau`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinerSpec {
    pub power: f64,
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayModel {
    /// Every link delays every message by exactly `delta` seconds.
    Uniform { delta: f64 },
    /// Each delivery is delayed by an independent uniform draw from [0, delta].
    UpTo { delta: f64 },
    /// Fixed per-link delays `delays[from][to] * scale`.
    Matrix { delays: Vec<Vec<f64>>, scale: f64 },
}

impl DelayModel {
    /// Largest possible delay on any link.
    pub fn max_delay(&self) -> f64 {
        match self {
            DelayModel::Uniform { delta } | DelayModel::UpTo { delta } => *delta,
            DelayModel::Matrix { delays, scale } => {
                delays.iter().flatten().copied().fold(0.0, f64::max) * scale
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegacyMode {
    /// Every miner restarts hashing a fixed time after each block, as in
    /// the fairness chains.
    Simplified,
    /// Blocks propagate with link delays; miners validate, then create,
    /// then hash.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    Det { zeta: u32, tau: f64 },
    Legacy { tau: f64, mode: LegacyMode },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon {
    Seconds(f64),
    Blocks(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub miners: Vec<MinerSpec>,
    /// Total block rate, blocks/second.
    pub lambda: f64,
    pub delay: DelayModel,
    pub protocol: Protocol,
    pub seed: u64,
    pub horizon: Horizon,
}

/// What miner 0 does. Under every strategy except `Honest`, miner 0 is the
/// adversary and all other miners are honest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryStrategy {
    Honest,
    /// Mines on received blocks without waiting to validate them and/or
    /// without spending time to create its own.
    LegacySkip { validation: bool, creation: bool },
    /// Mines a private fork and publishes it `t_max` seconds after its first
    /// block if it is then longer than the honest chain.
    Withhold { t_max: f64 },
    /// Mines a hidden chain and releases it when the honest chain gets within
    /// one block. Honest miners extend the released block of a one-block race
    /// with probability `1 - omega`. With `stall_honest`, an honest miner that
    /// knows a longer chain it has not validated yet mines nothing useful,
    /// the simplification the hidden-chain Markov chain makes.
    HiddenChain {
        variant: HcaStrategy,
        omega: f64,
        #[serde(default)]
        stall_honest: bool,
    },
    /// Mines on the longest chain and publishes every block right away;
    /// honest miners break ties in the adversary's favor. With `forge_every = k > 0` every k-th block
    /// carries a wrong contract digest, which honest miners only detect after
    /// executing the TOLs it depends on.
    Oca {
        #[serde(default)]
        forge_every: u32,
    },
}

/// A network and what miner 0 does in it: the unit a single run consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub network: NetworkConfig,
    #[serde(default = "honest")]
    pub strategy: AdversaryStrategy,
}

fn honest() -> AdversaryStrategy {
    AdversaryStrategy::Honest
}

impl AdversaryStrategy {
    pub fn has_adversary(&self) -> bool {
        !matches!(self, AdversaryStrategy::Honest)
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdversaryStrategy::Honest => "honest",
            AdversaryStrategy::LegacySkip { .. } => "legacy_skip",
            AdversaryStrategy::Withhold { .. } => "withhold",
            AdversaryStrategy::HiddenChain { variant: HcaStrategy::Rar, .. } => "rar",
            AdversaryStrategy::HiddenChain { variant: HcaStrategy::Mar, .. } => "mar",
            AdversaryStrategy::Oca { .. } => "oca",
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.miners.is_empty() {
            return bad("at least one miner is required".into());
        }
        let total: f64 = self.miners.iter().map(|m| m.power).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("mining power fractions sum to {total}, expected 1"));
        }
        for (i, m) in self.miners.iter().enumerate() {
            if !(m.power >= 0.0) || !m.c.is_finite() || m.c < 0.0 {
                return bad(format!("miner {i}: power must be >= 0 and c >= 0"));
            }
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be > 0, got {}", self.lambda));
        }
        match &self.delay {
            DelayModel::Uniform { delta } | DelayModel::UpTo { delta } => {
                if !(*delta >= 0.0) || !delta.is_finite() {
                    return bad(format!("delta must be >= 0, got {delta}"));
                }
            }
            DelayModel::Matrix { delays, scale } => {
                let n = self.miners.len();
                if delays.len() != n || delays.iter().any(|r| r.len() != n) {
                    return bad(format!("delay matrix must be {n}x{n}"));
                }
                if delays.iter().flatten().any(|d| !(*d >= 0.0)) || !(*scale >= 0.0) {
                    return bad("delays and scale must be >= 0".into());
                }
            }
        }
        match self.protocol {
            Protocol::Det { zeta, tau } => {
                if zeta < 1 {
                    return bad("zeta must be >= 1".into());
                }
                if !(tau >= 0.0) || !tau.is_finite() {
                    return bad(format!("tau must be >= 0, got {tau}"));
                }
            }
            Protocol::Legacy { tau, .. } => {
                if !(tau >= 0.0) || !tau.is_finite() {
                    return bad(format!("tau must be >= 0, got {tau}"));
                }
            }
        }
        match self.horizon {
            Horizon::Seconds(s) if !(s > 0.0) => bad("horizon must be > 0".into()),
            Horizon::Blocks(0) => bad("horizon must be > 0".into()),
            _ => Ok(()),
        }
    }

    /// Mean block interval 1/lambda.
    pub fn interval(&self) -> f64 {
        1.0 / self.lambda
    }
}
