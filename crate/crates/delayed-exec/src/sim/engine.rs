use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::config::{AdversaryStrategy, DelayModel, Horizon, NetworkConfig, Protocol};
use super::invariants::check_invariants;
use super::legacy;
use super::metrics::{bump, RunMetrics, WithholdStats};
use super::trace::{RecordKind, Trace, TraceRecord};
use super::SimError;
use crate::markov::HcaStrategy;
use crate::protocol::{BlockId, BlockStore, Digest, MinerId, MinerState, ProtocolError, TieBreak, TolId};

const ADV: usize = 0;
const NO_QUEUE: u32 = u32::MAX;

/// Which block an honest miner extends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainRule {
    #[default]
    LongestValidated,
    /// Extends the longest chain it has received, validated or not. Only
    /// useful as a broken rule for testing the invariant checks.
    LongestKnown,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub rule: ChainRule,
    /// Keep the data needed by `check_invariants` and run the checks.
    pub check_invariants: bool,
    /// Collect per-event trace records.
    pub record_events: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Option<Trace>,
    pub records: Vec<TraceRecord>,
}

/// Runs one simulation with the default options.
pub fn run(config: &NetworkConfig, strategy: &AdversaryStrategy) -> Result<RunMetrics, SimError> {
    run_with(config, strategy, &RunOptions::default()).map(|o| o.metrics)
}

pub fn run_with(config: &NetworkConfig, strategy: &AdversaryStrategy, opts: &RunOptions) -> Result<RunOutput, SimError> {
    config.validate()?;
    validate_strategy(config, strategy)?;
    match config.protocol {
        Protocol::Det { zeta, tau } => Ok(Engine::new(config, *strategy, *opts, zeta, tau)?.run()),
        Protocol::Legacy { .. } => {
            let metrics = legacy::run_legacy(config, strategy)?;
            Ok(RunOutput { metrics, trace: None, records: Vec::new() })
        }
    }
}

fn validate_strategy(config: &NetworkConfig, s: &AdversaryStrategy) -> Result<(), SimError> {
    let bad = |m: String| Err(SimError::Config(m));
    if s.has_adversary() && config.miners.len() < 2 {
        return bad("an adversary needs at least one honest miner besides miner 0".into());
    }
    match *s {
        AdversaryStrategy::Withhold { t_max } if !(t_max > 0.0) || !t_max.is_finite() => {
            bad(format!("t_max must be > 0, got {t_max}"))
        }
        AdversaryStrategy::HiddenChain { omega, .. } if !(0.0..=1.0).contains(&omega) => {
            bad(format!("omega must be in [0, 1], got {omega}"))
        }
        AdversaryStrategy::LegacySkip { .. } | AdversaryStrategy::Honest => Ok(()),
        _ if matches!(config.protocol, Protocol::Legacy { .. }) => {
            bad(format!("strategy {} requires the DET protocol", s.name()))
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    Mine,
    Deliver { to: u32, block: u32 },
    ServiceDone { miner: u32 },
    Timer { epoch: u32 },
}

#[derive(Debug, Default)]
struct Adversary {
    /// Mined but unpublished blocks, lowest first.
    private: Vec<BlockId>,
    base: BlockId,
    published_tip: BlockId,
    race: bool,
    flood: bool,
    epoch: u32,
    mined: u64,
    withhold: WithholdStats,
    released: Vec<BlockId>,
}

struct Engine {
    strategy: AdversaryStrategy,
    opts: RunOptions,
    zeta: u32,
    lambda: f64,
    delay: DelayModel,
    horizon: Horizon,
    store: BlockStore,
    miners: Vec<MinerState>,
    honest: Vec<bool>,
    observer: usize,
    events: BinaryHeap<Reverse<(u64, u64, Event)>>,
    seq: u64,
    rng_mine: ChaCha8Rng,
    rng_delay: ChaCha8Rng,
    rng_tie: ChaCha8Rng,
    winner: WeightedIndex<f64>,
    inter: Exp<f64>,
    orphans: Vec<HashMap<BlockId, Vec<BlockId>>>,
    adv: Adversary,
    best_honest: (u64, BlockId),
    mined: Vec<u64>,
    total_mined: u64,
    last_mine: f64,
    queue_hist: Vec<u64>,
    adv_hist: Vec<u64>,
    observer_queue: Vec<u32>,
    head_history: Vec<Vec<(f64, u64)>>,
    records: Vec<TraceRecord>,
}

impl Engine {
    fn new(cfg: &NetworkConfig, strategy: AdversaryStrategy, opts: RunOptions, zeta: u32, tau: f64) -> Result<Self, SimError> {
        let n = cfg.miners.len();
        let adversarial = strategy.has_adversary();
        let tie = match strategy {
            AdversaryStrategy::HiddenChain { .. } => TieBreak::Remember,
            AdversaryStrategy::Oca { .. } => TieBreak::Favor(vec![MinerId(ADV as u32)]),
            _ => TieBreak::FirstSeen,
        };
        let miners = cfg
            .miners
            .iter()
            .enumerate()
            .map(|(i, m)| {
                if adversarial && i == ADV {
                    MinerState::new(MinerId(i as u32), zeta, 0.0, TieBreak::FirstSeen)
                } else {
                    MinerState::new(MinerId(i as u32), zeta, m.c * tau, tie.clone())
                }
            })
            .collect();
        let honest: Vec<bool> = (0..n).map(|i| !(adversarial && i == ADV)).collect();
        let observer = honest.iter().position(|&h| h).expect("validated: an honest miner exists");
        let winner = WeightedIndex::new(cfg.miners.iter().map(|m| m.power))
            .map_err(|e| SimError::Config(format!("mining power: {e}")))?;
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(k);
            r
        };
        Ok(Engine {
            strategy,
            opts,
            zeta,
            lambda: cfg.lambda,
            delay: cfg.delay.clone(),
            horizon: cfg.horizon,
            store: BlockStore::new(),
            miners,
            honest,
            observer,
            events: BinaryHeap::new(),
            seq: 0,
            rng_mine: stream(1),
            rng_delay: stream(2),
            rng_tie: stream(3),
            winner,
            inter: Exp::new(cfg.lambda).expect("lambda validated"),
            orphans: vec![HashMap::new(); n],
            adv: Adversary::default(),
            best_honest: (0, BlockId(0)),
            mined: vec![0; n],
            total_mined: 0,
            last_mine: 0.0,
            queue_hist: Vec::new(),
            adv_hist: Vec::new(),
            observer_queue: vec![NO_QUEUE],
            head_history: if opts.check_invariants { vec![vec![(0.0, 0)]; n] } else { Vec::new() },
            records: Vec::new(),
        })
    }

    fn schedule(&mut self, t: f64, ev: Event) {
        self.seq += 1;
        self.events.push(Reverse((t.to_bits(), self.seq, ev)));
    }

    fn record(&mut self, time: f64, event: RecordKind, miner: usize, b: BlockId, queue: u32) {
        if self.opts.record_events {
            let height = self.store.get(b).height;
            self.records.push(TraceRecord { time, event, miner: miner as u32, block: b.0, height, queue });
        }
    }

    fn run(mut self) -> RunOutput {
        let first = self.inter.sample(&mut self.rng_mine);
        self.schedule(first, Event::Mine);
        while let Some(Reverse((bits, _, ev))) = self.events.pop() {
            let now = f64::from_bits(bits);
            match ev {
                Event::Mine => self.on_mine(now),
                Event::Deliver { to, block } => self.deliver(to as usize, BlockId(block), now),
                Event::ServiceDone { miner } => {
                    let m = miner as usize;
                    let step = self.miners[m].process_tol_step(&self.store, now);
                    if let Some(b) = step.completed {
                        self.record(now, RecordKind::Executed, m, b, 0);
                    }
                    if let Some(t) = step.next_done {
                        self.schedule(t, Event::ServiceDone { miner });
                    }
                    self.collect(m, now);
                }
                Event::Timer { epoch } => self.on_timer(epoch, now),
            }
            if matches!(self.strategy, AdversaryStrategy::HiddenChain { .. }) {
                self.hidden_chain_react(now);
            }
        }
        self.finish()
    }

    fn on_mine(&mut self, now: f64) {
        self.last_mine = now;
        let w = self.winner.sample(&mut self.rng_mine);
        self.mined[w] += 1;
        self.total_mined += 1;
        if self.honest[w] && self.stalled(w) {
            // The block would be orphaned by the longer chain being executed.
        } else if self.honest[w] {
            let parent = self.honest_parent(w);
            let b = self.create(w, parent, now, false);
            self.deliver(w, b, now);
            self.broadcast(w, b, now);
        } else {
            self.adversary_mine(now);
        }
        let more = match self.horizon {
            Horizon::Blocks(n) => self.total_mined < n,
            Horizon::Seconds(_) => true,
        };
        if more {
            let t = now + self.inter.sample(&mut self.rng_mine);
            if !matches!(self.horizon, Horizon::Seconds(s) if t > s) {
                self.schedule(t, Event::Mine);
            }
        }
    }

    fn stalled(&self, w: usize) -> bool {
        let AdversaryStrategy::HiddenChain { stall_honest: true, .. } = self.strategy else {
            return false;
        };
        let m = &self.miners[w];
        self.store.get(m.longest_known()).height > self.store.get(m.validated_head()).height
    }

    fn honest_parent(&mut self, w: usize) -> BlockId {
        let m = &self.miners[w];
        if self.opts.rule == ChainRule::LongestKnown {
            return m.longest_known();
        }
        let head = m.validated_head();
        if let (AdversaryStrategy::HiddenChain { omega, .. }, Some(c)) = (self.strategy, m.tie_candidate()) {
            if self.store.get(c).height == self.store.get(head).height && self.rng_tie.random::<f64>() >= omega {
                return c;
            }
        }
        head
    }

    fn create(&mut self, w: usize, parent: BlockId, now: f64, forge: bool) -> BlockId {
        let tol = TolId(self.store.len() as u64);
        self.miners[w].mempool_push(tol);
        let mut draft = self.miners[w].create(&self.store, parent, now);
        if forge {
            draft.contract_digest = Digest(draft.contract_digest.0.wrapping_add(0x9e37_79b9_7f4a_7c15) | 1);
        }
        let b = self.store.insert(draft);
        self.observer_queue.push(NO_QUEUE);
        self.record(now, RecordKind::Mined, w, b, 0);
        b
    }

    fn link_delay(&mut self, from: usize, to: usize) -> f64 {
        match &self.delay {
            DelayModel::Uniform { delta } => *delta,
            DelayModel::UpTo { delta } => {
                if *delta > 0.0 {
                    self.rng_delay.random_range(0.0..=*delta)
                } else {
                    0.0
                }
            }
            DelayModel::Matrix { delays, scale } => delays[from][to] * scale,
        }
    }

    /// Sends `b` from `from` to every other miner. The adversary, when present
    /// and not a legacy skipper, hears honest blocks at once.
    fn broadcast(&mut self, from: usize, b: BlockId, now: f64) {
        let instant_adv = self.strategy.has_adversary() && !matches!(self.strategy, AdversaryStrategy::LegacySkip { .. });
        for to in 0..self.miners.len() {
            if to == from {
                continue;
            }
            let d = if instant_adv && to == ADV { 0.0 } else { self.link_delay(from, to) };
            self.schedule(now + d, Event::Deliver { to: to as u32, block: b.0 });
        }
    }

    /// Publishes adversary blocks to every honest miner without delay.
    fn publish(&mut self, blocks: &[BlockId], now: f64) {
        for &b in blocks {
            self.record(now, RecordKind::Released, ADV, b, 0);
            for to in 0..self.miners.len() {
                if to != ADV {
                    self.schedule(now, Event::Deliver { to: to as u32, block: b.0 });
                }
            }
        }
    }

    fn deliver(&mut self, to: usize, b: BlockId, now: f64) {
        if self.miners[to].knows(b) {
            return;
        }
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            match self.miners[to].receive(&self.store, x, now) {
                Err(ProtocolError::Orphan { parent, .. }) => {
                    self.orphans[to].entry(parent).or_default().push(x);
                    continue;
                }
                Err(ProtocolError::Unknown(_)) => unreachable!("receive never reports unknown"),
                Ok(_) => {}
            }
            self.on_arrival(to, x, now);
            if let Some(children) = self.orphans[to].remove(&x) {
                stack.extend(children);
            }
        }
        if let Some(t) = self.miners[to].start_service(now) {
            self.schedule(t, Event::ServiceDone { miner: to as u32 });
        }
        self.collect(to, now);
    }

    fn on_arrival(&mut self, to: usize, b: BlockId, now: f64) {
        if !self.honest[to] {
            return;
        }
        let q = self.miners[to].queue_ahead(&self.store, b);
        bump(&mut self.queue_hist, q);
        if !self.honest[self.store.get(b).miner.index()] {
            bump(&mut self.adv_hist, q);
        }
        if to == self.observer {
            self.observer_queue[b.index()] = q as u32;
        }
        self.record(now, RecordKind::Arrived, to, b, q as u32);
    }

    fn collect(&mut self, m: usize, now: f64) {
        let (valid, moved) = self.miners[m].take_updates();
        if self.opts.record_events {
            for b in valid {
                self.record(now, RecordKind::Validated, m, b, 0);
            }
        }
        if !moved {
            return;
        }
        let head = self.miners[m].validated_head();
        let h = self.store.get(head).height;
        self.record(now, RecordKind::HeadChanged, m, head, 0);
        if self.opts.check_invariants {
            self.head_history[m].push((now, h));
        }
        if self.honest[m] && h > self.best_honest.0 {
            self.best_honest = (h, head);
        }
    }

    fn adversary_mine(&mut self, now: f64) {
        self.adv.mined += 1;
        match self.strategy {
            AdversaryStrategy::Honest => unreachable!("no adversary"),
            AdversaryStrategy::LegacySkip { .. } => {
                let parent = self.miners[ADV].validated_head();
                let b = self.create(ADV, parent, now, false);
                self.deliver(ADV, b, now);
                self.broadcast(ADV, b, now);
            }
            AdversaryStrategy::Oca { forge_every } => {
                let parent = self.miners[ADV].validated_head();
                let forge = forge_every > 0 && self.adv.mined % forge_every as u64 == 0;
                let b = self.create(ADV, parent, now, forge);
                self.deliver(ADV, b, now);
                self.broadcast(ADV, b, now);
            }
            AdversaryStrategy::Withhold { t_max } => {
                let parent = self.adv.private.last().copied().unwrap_or_else(|| self.miners[ADV].validated_head());
                let b = self.create(ADV, parent, now, false);
                self.deliver(ADV, b, now);
                if self.adv.private.is_empty() {
                    self.adv.epoch += 1;
                    let epoch = self.adv.epoch;
                    self.schedule(now + t_max, Event::Timer { epoch });
                }
                self.adv.private.push(b);
            }
            AdversaryStrategy::HiddenChain { .. } => {
                let parent = self.adv.private.last().copied().unwrap_or(self.adv.base);
                let b = self.create(ADV, parent, now, false);
                self.deliver(ADV, b, now);
                let flooding = self.adv.flood && !self.miners[self.observer].is_validated(self.adv.published_tip);
                if self.adv.race || flooding {
                    self.adv.race = false;
                    self.adv.base = b;
                    self.adv.published_tip = b;
                    self.publish(&[b], now);
                } else {
                    self.adv.private.push(b);
                }
            }
        }
    }

    fn on_timer(&mut self, epoch: u32, now: f64) {
        if epoch != self.adv.epoch || self.adv.private.is_empty() {
            return;
        }
        let private = std::mem::take(&mut self.adv.private);
        self.adv.withhold.attempts += 1;
        let tip = *private.last().expect("non-empty");
        if self.store.get(tip).height > self.best_honest.0 {
            self.adv.withhold.successes += 1;
            self.adv.withhold.released_blocks += private.len() as u64;
            self.publish(&private, now);
            self.adv.released.extend(private);
        }
    }

    fn hidden_chain_react(&mut self, now: f64) {
        let AdversaryStrategy::HiddenChain { variant, .. } = self.strategy else {
            return;
        };
        let a = &mut self.adv;
        if a.flood && self.miners[self.observer].is_validated(a.published_tip) {
            a.flood = false;
        }
        let hb = self.store.get(a.base).height;
        let hh = self.best_honest.0;
        if a.race && hh > hb {
            a.race = false;
        }
        let x = hh.saturating_sub(hb);
        let y = a.private.len() as u64;
        let cap = self.zeta as u64 + 50;
        let release = match y {
            0 => {
                if x > 0 {
                    a.base = self.best_honest.1;
                }
                false
            }
            1 if x == 1 => {
                a.race = true;
                true
            }
            _ if y >= cap || (y >= 2 && x + 1 == y) => true,
            _ => {
                if x >= y {
                    a.private.clear();
                    a.base = self.best_honest.1;
                }
                false
            }
        };
        if release {
            let private = std::mem::take(&mut a.private);
            let tip = *private.last().expect("non-empty");
            a.base = tip;
            a.published_tip = tip;
            a.flood = variant == HcaStrategy::Mar && y > self.zeta as u64;
            self.publish(&private, now);
        }
    }

    fn finish(mut self) -> RunOutput {
        let n = self.miners.len();
        let mut tip = None::<BlockId>;
        for (i, m) in self.miners.iter().enumerate() {
            if !self.honest[i] {
                continue;
            }
            let h = m.validated_head();
            if tip.map_or(true, |t| self.store.get(h).height > self.store.get(t).height) {
                tip = Some(h);
            }
        }
        let chain = self.store.chain(tip.expect("an honest miner exists"));
        let mut main_chain = vec![0u64; n];
        let (mut es, mut late) = (0u64, 0u64);
        for &b in &chain {
            let blk = self.store.get(b);
            main_chain[blk.miner.index()] += 1;
            es += blk.is_es as u64;
            let q = self.observer_queue[b.index()];
            late += (!self.honest[blk.miner.index()] && q != NO_QUEUE && q >= self.zeta) as u64;
        }
        let len = chain.len() as u64;
        let frac = |k: u64| if len == 0 { 0.0 } else { k as f64 / len as f64 };
        let withhold = matches!(self.strategy, AdversaryStrategy::Withhold { .. }).then(|| {
            let mut s = self.adv.withhold;
            let on_chain = |b: &&BlockId| chain.get(self.store.get(**b).height as usize - 1) == Some(*b);
            s.accepted_blocks = self.adv.released.iter().filter(on_chain).count() as u64;
            s
        });
        let mut metrics = RunMetrics {
            mined: self.mined.clone(),
            main_chain,
            total_mined: self.total_mined,
            chain_length: len,
            mpu: if self.total_mined == 0 { 1.0 } else { len as f64 / self.total_mined as f64 },
            queue_at_arrival: std::mem::take(&mut self.queue_hist),
            adversary_queue_at_arrival: std::mem::take(&mut self.adv_hist),
            es_fraction: frac(es),
            late_blocks: late,
            late_fraction: frac(late),
            fork_count: self.total_mined - len,
            withhold,
            invariant_violations: Vec::new(),
            end_time: self.last_mine,
        };
        let trace = self.opts.check_invariants.then(|| self.build_trace());
        if let Some(t) = &trace {
            metrics.invariant_violations = check_invariants(t);
        }
        RunOutput { metrics, trace, records: self.records }
    }

    fn build_trace(&mut self) -> Trace {
        let honest: Vec<usize> = (0..self.miners.len()).filter(|&i| self.honest[i]).collect();
        let validated_at = honest
            .iter()
            .map(|&i| {
                (0..self.store.len())
                    .map(|b| {
                        let t = self.miners[i].validated_at(BlockId(b as u32));
                        if t.is_nan() {
                            f64::INFINITY
                        } else {
                            t
                        }
                    })
                    .collect()
            })
            .collect();
        Trace {
            delta: self.delay.max_delay(),
            interval: 1.0 / self.lambda,
            zeta: self.zeta,
            blocks: self.store.iter().copied().collect(),
            honest_miners: honest.iter().map(|&i| MinerId(i as u32)).collect(),
            validated_at,
            head_history: honest.iter().map(|&i| std::mem::take(&mut self.head_history[i])).collect(),
            end_time: self.last_mine,
        }
    }
}
