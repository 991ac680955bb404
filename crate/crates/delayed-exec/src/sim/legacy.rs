use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::config::{AdversaryStrategy, DelayModel, Horizon, LegacyMode, NetworkConfig, Protocol};
use super::metrics::RunMetrics;
use super::SimError;

/// Which of its two per-block jobs miner 0 skips.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipFlags {
    pub validation: bool,
    pub creation: bool,
}

/// Per-miner fraction of the final chain when miner 0 has processing ratio
/// `c` and skips the given jobs. Requires the legacy protocol.
pub fn run_legacy_fairness(config: &NetworkConfig, c: f64, skip: SkipFlags) -> Result<Vec<f64>, SimError> {
    let mut cfg = config.clone();
    cfg.miners[0].c = c;
    let strategy = AdversaryStrategy::LegacySkip { validation: skip.validation, creation: skip.creation };
    let m = run_legacy(&cfg, &strategy)?;
    Ok((0..m.main_chain.len()).map(|i| m.share_of_main_chain(i)).collect())
}

struct Timing {
    /// Time spent validating a received block.
    validate: Vec<f64>,
    /// Time spent assembling a block before hashing starts.
    create: Vec<f64>,
}

fn timing(cfg: &NetworkConfig, strategy: &AdversaryStrategy, tau: f64) -> Result<Timing, SimError> {
    let skip = match *strategy {
        AdversaryStrategy::Honest => SkipFlags::default(),
        AdversaryStrategy::LegacySkip { validation, creation } => SkipFlags { validation, creation },
        _ => return Err(SimError::Config(format!("strategy {} requires the DET protocol", strategy.name()))),
    };
    let mut validate: Vec<f64> = cfg.miners.iter().map(|m| m.c * tau).collect();
    let mut create = validate.clone();
    if skip.validation {
        validate[0] = 0.0;
    }
    if skip.creation {
        create[0] = 0.0;
    }
    Ok(Timing { validate, create })
}

pub(crate) fn run_legacy(cfg: &NetworkConfig, strategy: &AdversaryStrategy) -> Result<RunMetrics, SimError> {
    cfg.validate()?;
    let Protocol::Legacy { tau, mode } = cfg.protocol else {
        return Err(SimError::Config("legacy simulation requires the legacy protocol".into()));
    };
    let t = timing(cfg, strategy, tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(match mode {
        LegacyMode::Simplified => simplified(cfg, &t, &mut rng),
        LegacyMode::Full => full(cfg, &t, &mut rng),
    })
}

fn exp_clocks(cfg: &NetworkConfig) -> Vec<Option<Exp<f64>>> {
    cfg.miners.iter().map(|m| (m.power > 0.0).then(|| Exp::new(m.power * cfg.lambda).expect("positive rate"))).collect()
}

/// Lockstep rounds: after a block by `u`, miner `u` hashes once it has
/// created its next block and every other miner once it has validated the
/// new block and created its own. No forks.
fn simplified(cfg: &NetworkConfig, t: &Timing, rng: &mut ChaCha8Rng) -> RunMetrics {
    let n = cfg.miners.len();
    let clocks = exp_clocks(cfg);
    let mut mined = vec![0u64; n];
    let mut now = 0.0;
    let mut last = usize::MAX;
    let mut total = 0u64;
    loop {
        let mut best = (f64::INFINITY, 0);
        for j in 0..n {
            let Some(clock) = &clocks[j] else { continue };
            let start = if j == last { 0.0 } else { t.validate[j] } + t.create[j];
            let done = start + clock.sample(rng);
            if done < best.0 {
                best = (done, j);
            }
        }
        let next = now + best.0;
        if matches!(cfg.horizon, Horizon::Seconds(s) if next > s) {
            break;
        }
        now = next;
        last = best.1;
        mined[last] += 1;
        total += 1;
        if matches!(cfg.horizon, Horizon::Blocks(b) if total >= b) {
            break;
        }
    }
    RunMetrics {
        main_chain: mined.clone(),
        mined,
        total_mined: total,
        chain_length: total,
        mpu: 1.0,
        queue_at_arrival: Vec::new(),
        adversary_queue_at_arrival: Vec::new(),
        es_fraction: 0.0,
        late_blocks: 0,
        late_fraction: 0.0,
        fork_count: 0,
        withhold: None,
        invariant_violations: Vec::new(),
        end_time: now,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Ev {
    Found { miner: u32, epoch: u32 },
    Arrive { to: u32, block: u32 },
}

struct LBlock {
    parent: u32,
    height: u64,
    miner: u32,
}

/// Event-driven: blocks reach other miners after the link delay; a miner
/// that hears of a longer chain validates it, creates a block and hashes.
fn full(cfg: &NetworkConfig, t: &Timing, rng: &mut ChaCha8Rng) -> RunMetrics {
    let n = cfg.miners.len();
    let clocks = exp_clocks(cfg);
    let mut blocks = vec![LBlock { parent: 0, height: 0, miner: u32::MAX }];
    let mut target = vec![0u32; n];
    let mut epoch = vec![0u32; n];
    let mut mined = vec![0u64; n];
    let mut heap: BinaryHeap<Reverse<(u64, u64, Ev)>> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<_>, time: f64, ev: Ev| {
        seq += 1;
        heap.push(Reverse((time.to_bits(), seq, ev)));
    };
    for j in 0..n {
        if let Some(c) = &clocks[j] {
            let at = t.create[j] + c.sample(rng);
            push(&mut heap, at, Ev::Found { miner: j as u32, epoch: 0 });
        }
    }
    let mut best = 0u32;
    let mut total = 0u64;
    let mut now = 0.0;
    while let Some(Reverse((bits, _, ev))) = heap.pop() {
        let time = f64::from_bits(bits);
        match ev {
            Ev::Found { miner, epoch: e } => {
                let j = miner as usize;
                if e != epoch[j] {
                    continue;
                }
                let done = match cfg.horizon {
                    Horizon::Seconds(s) => time > s,
                    Horizon::Blocks(b) => total >= b,
                };
                if done {
                    continue;
                }
                now = time;
                total += 1;
                mined[j] += 1;
                let parent = target[j];
                let id = blocks.len() as u32;
                let height = blocks[parent as usize].height + 1;
                blocks.push(LBlock { parent, height, miner });
                if height > blocks[best as usize].height {
                    best = id;
                }
                target[j] = id;
                epoch[j] += 1;
                let clock = clocks[j].as_ref().expect("a miner that found a block has power");
                push(&mut heap, time + t.create[j] + clock.sample(rng), Ev::Found { miner, epoch: epoch[j] });
                for k in 0..n {
                    if k != j {
                        let d = match &cfg.delay {
                            DelayModel::Uniform { delta } => *delta,
                            DelayModel::UpTo { delta } => rng.random_range(0.0..=*delta),
                            DelayModel::Matrix { delays, scale } => delays[j][k] * scale,
                        };
                        push(&mut heap, time + d, Ev::Arrive { to: k as u32, block: id });
                    }
                }
            }
            Ev::Arrive { to, block } => {
                let k = to as usize;
                if blocks[block as usize].height <= blocks[target[k] as usize].height {
                    continue;
                }
                target[k] = block;
                epoch[k] += 1;
                if let Some(c) = &clocks[k] {
                    let at = time + t.validate[k] + t.create[k] + c.sample(rng);
                    push(&mut heap, at, Ev::Found { miner: to, epoch: epoch[k] });
                }
            }
        }
    }
    let mut main_chain = vec![0u64; n];
    let mut b = best;
    while b != 0 {
        main_chain[blocks[b as usize].miner as usize] += 1;
        b = blocks[b as usize].parent;
    }
    let len = blocks[best as usize].height;
    RunMetrics {
        mined,
        main_chain,
        total_mined: total,
        chain_length: len,
        mpu: if total == 0 { 1.0 } else { len as f64 / total as f64 },
        queue_at_arrival: Vec::new(),
        adversary_queue_at_arrival: Vec::new(),
        es_fraction: 0.0,
        late_blocks: 0,
        late_fraction: 0.0,
        fork_count: total - len,
        withhold: None,
        invariant_violations: Vec::new(),
        end_time: now,
    }
}
