use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use super::block::{BlockDraft, BlockId, BlockStore, MinerId, GENESIS};
use super::digest::{apply_transition, fold_refunds, payment_step, Digest, RefundToken, TolId};
use super::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    Valid,
    Invalid,
    Deferred(DeferReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeferReason {
    ParentNotValidated,
    /// The contract state after `needed` has not been computed yet.
    StateMissing { needed: BlockId },
}

/// How a miner treats a validated block as long as its current head.
#[derive(Debug, Clone, PartialEq)]
pub enum TieBreak {
    FirstSeen,
    /// Switch to a tie block mined by one of these miners when the current
    /// head was not.
    Favor(Vec<MinerId>),
    /// Remember the tie block; the caller picks a parent at mining time.
    Remember,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Unknown,
    Pending,
    Valid,
    Invalid,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    status: Status,
    processed: bool,
    parked: bool,
    arrival: f64,
    processed_at: f64,
    validated_at: f64,
    state: Digest,
    refund: RefundToken,
    payment: Digest,
}

const UNKNOWN: Slot = Slot {
    status: Status::Unknown,
    processed: false,
    parked: false,
    arrival: f64::NAN,
    processed_at: f64::NAN,
    validated_at: f64::NAN,
    state: Digest::EMPTY,
    refund: RefundToken(0),
    payment: Digest::EMPTY,
};

/// Result of advancing the processing server.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ServiceStep {
    pub completed: Option<BlockId>,
    /// Completion time of the TOL now in service, if one was started.
    pub next_done: Option<f64>,
}

/// One miner's view: known blocks, digest caches, the TOL work queue and the
/// head of the longest chain it has fully validated.
///
/// TOLs are executed one at a time in arrival order; a TOL becomes eligible
/// once its parent's TOL is executed, so a prefix shared by several forks is
/// executed once.
#[derive(Debug, Clone)]
pub struct MinerState {
    pub id: MinerId,
    zeta: u64,
    tau: f64,
    tie: TieBreak,
    slots: Vec<Slot>,
    head: BlockId,
    tie_candidate: Option<BlockId>,
    longest_known: BlockId,
    ready: BinaryHeap<Reverse<(u64, u32)>>,
    in_service: Option<BlockId>,
    busy_until: f64,
    wait_processing: HashMap<BlockId, Vec<BlockId>>,
    wait_validation: HashMap<BlockId, Vec<BlockId>>,
    wait_state: HashMap<BlockId, Vec<BlockId>>,
    mempool: VecDeque<TolId>,
    unprocessed: usize,
    newly_valid: Vec<BlockId>,
    head_moved: bool,
}

impl MinerState {
    pub fn new(id: MinerId, zeta: u32, tau: f64, tie: TieBreak) -> Self {
        assert!(zeta >= 1, "zeta must be at least 1");
        assert!(tau >= 0.0, "tau must be non-negative");
        let genesis = Slot {
            status: Status::Valid,
            processed: true,
            arrival: 0.0,
            processed_at: 0.0,
            validated_at: 0.0,
            state: Digest::GENESIS_CONTRACT,
            payment: Digest::GENESIS_PAYMENT,
            ..UNKNOWN
        };
        MinerState {
            id,
            zeta: zeta as u64,
            tau,
            tie,
            slots: vec![genesis],
            head: GENESIS,
            tie_candidate: None,
            longest_known: GENESIS,
            ready: BinaryHeap::new(),
            in_service: None,
            busy_until: 0.0,
            wait_processing: HashMap::new(),
            wait_validation: HashMap::new(),
            wait_state: HashMap::new(),
            mempool: VecDeque::new(),
            unprocessed: 0,
            newly_valid: Vec::new(),
            head_moved: false,
        }
    }

    fn slot(&self, b: BlockId) -> &Slot {
        self.slots.get(b.index()).unwrap_or(&UNKNOWN)
    }

    fn slot_mut(&mut self, b: BlockId) -> &mut Slot {
        if self.slots.len() <= b.index() {
            self.slots.resize(b.index() + 1, UNKNOWN);
        }
        &mut self.slots[b.index()]
    }

    pub fn zeta(&self) -> u32 {
        self.zeta as u32
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn knows(&self, b: BlockId) -> bool {
        self.slot(b).status != Status::Unknown
    }

    pub fn is_validated(&self, b: BlockId) -> bool {
        self.slot(b).status == Status::Valid
    }

    pub fn is_invalid(&self, b: BlockId) -> bool {
        self.slot(b).status == Status::Invalid
    }

    pub fn is_processed(&self, b: BlockId) -> bool {
        self.slot(b).processed
    }

    /// Arrival time, or NaN if unknown.
    pub fn arrival(&self, b: BlockId) -> f64 {
        self.slot(b).arrival
    }

    /// Validation time, or NaN if not (yet) validated.
    pub fn validated_at(&self, b: BlockId) -> f64 {
        self.slot(b).validated_at
    }

    pub fn processed_at(&self, b: BlockId) -> f64 {
        self.slot(b).processed_at
    }

    /// Locally computed contract state after executing `b`'s TOL.
    pub fn cached_state(&self, b: BlockId) -> Option<(Digest, RefundToken)> {
        let s = self.slot(b);
        s.processed.then_some((s.state, s.refund))
    }

    pub fn cached_payment(&self, b: BlockId) -> Option<Digest> {
        let s = self.slot(b);
        (s.status == Status::Valid).then_some(s.payment)
    }

    pub fn validated_head(&self) -> BlockId {
        self.head
    }

    pub fn tie_candidate(&self) -> Option<BlockId> {
        self.tie_candidate
    }

    pub fn longest_known(&self) -> BlockId {
        self.longest_known
    }

    pub fn busy_until(&self) -> f64 {
        self.busy_until
    }

    /// TOLs received but not yet executed (including the one in service).
    pub fn work_queue_len(&self) -> usize {
        self.unprocessed
    }

    /// Unexecuted TOLs ahead of `b` on its own chain.
    pub fn queue_ahead(&self, store: &BlockStore, b: BlockId) -> usize {
        let mut n = 0;
        let mut a = store.get(b).parent;
        while !self.slot(a).processed {
            n += 1;
            a = store.get(a).parent;
        }
        n
    }

    pub fn mempool_push(&mut self, tol: TolId) {
        self.mempool.push_back(tol);
    }

    pub fn mempool_len(&self) -> usize {
        self.mempool.len()
    }

    /// Blocks validated and whether the head moved since the last call.
    pub fn take_updates(&mut self) -> (Vec<BlockId>, bool) {
        let moved = std::mem::replace(&mut self.head_moved, false);
        (std::mem::take(&mut self.newly_valid), moved)
    }

    /// Registers a delivered block, queues its TOL and attempts validation.
    pub fn receive(&mut self, store: &BlockStore, b: BlockId, now: f64) -> Result<Validation, ProtocolError> {
        if self.knows(b) {
            return Ok(self.current(b));
        }
        let parent = store.get(b).parent;
        if !self.knows(parent) {
            return Err(ProtocolError::Orphan { block: b, parent });
        }
        {
            let s = self.slot_mut(b);
            s.status = Status::Pending;
            s.arrival = now;
        }
        if store.get(b).height > store.get(self.longest_known).height {
            self.longest_known = b;
        }
        self.unprocessed += 1;
        if self.slot(parent).processed {
            self.ready.push(Reverse((now.to_bits(), b.0)));
        } else {
            self.wait_processing.entry(parent).or_default().push(b);
        }
        self.validate(store, b, now)
    }

    fn current(&self, b: BlockId) -> Validation {
        match self.slot(b).status {
            Status::Valid => Validation::Valid,
            Status::Invalid => Validation::Invalid,
            _ => Validation::Deferred(DeferReason::ParentNotValidated),
        }
    }

    /// Checks `b`'s digests against locally computed ones. Deferred blocks
    /// are re-attempted automatically when what they wait for is ready.
    pub fn validate(&mut self, store: &BlockStore, b: BlockId, now: f64) -> Result<Validation, ProtocolError> {
        if !self.knows(b) {
            return Err(ProtocolError::Unknown(b));
        }
        let mut stack = vec![b];
        let mut first = None;
        while let Some(x) = stack.pop() {
            let v = self.check(store, x, now);
            first.get_or_insert(v);
            if matches!(v, Validation::Valid | Validation::Invalid) {
                if let Some(children) = self.wait_validation.remove(&x) {
                    stack.extend(children);
                }
            }
        }
        Ok(first.expect("at least one check"))
    }

    fn park(map: &mut HashMap<BlockId, Vec<BlockId>>, slot: &mut Slot, key: BlockId, b: BlockId) {
        if !slot.parked {
            slot.parked = true;
            map.entry(key).or_default().push(b);
        }
    }

    fn check(&mut self, store: &BlockStore, b: BlockId, now: f64) -> Validation {
        match self.slot(b).status {
            Status::Valid => return Validation::Valid,
            Status::Invalid => return Validation::Invalid,
            _ => {}
        }
        self.slot_mut(b).parked = false;
        let blk = *store.get(b);
        match self.slot(blk.parent).status {
            Status::Invalid => {
                self.slot_mut(b).status = Status::Invalid;
                return Validation::Invalid;
            }
            Status::Valid => {}
            _ => {
                let mut s = self.slots[b.index()];
                Self::park(&mut self.wait_validation, &mut s, blk.parent, b);
                self.slots[b.index()] = s;
                return Validation::Deferred(DeferReason::ParentNotValidated);
            }
        }
        let fold = if blk.is_es {
            fold_refunds(std::iter::empty())
        } else if blk.height <= self.zeta {
            if blk.contract_digest != Digest::GENESIS_CONTRACT {
                self.slot_mut(b).status = Status::Invalid;
                return Validation::Invalid;
            }
            fold_refunds(std::iter::empty())
        } else {
            let anc = store.ancestor_at(b, blk.height - self.zeta);
            if !self.slot(anc).processed {
                let mut s = self.slots[b.index()];
                Self::park(&mut self.wait_state, &mut s, anc, b);
                self.slots[b.index()] = s;
                return Validation::Deferred(DeferReason::StateMissing { needed: anc });
            }
            if blk.contract_digest != self.slot(anc).state {
                self.slot_mut(b).status = Status::Invalid;
                return Validation::Invalid;
            }
            self.refund_fold(store, anc, store.last_full_height(blk.parent))
        };
        let expected = payment_step(self.slot(blk.parent).payment, fold, blk.tol);
        if expected != blk.payment_digest {
            self.slot_mut(b).status = Status::Invalid;
            return Validation::Invalid;
        }
        {
            let s = self.slot_mut(b);
            s.status = Status::Valid;
            s.validated_at = now;
            s.payment = expected;
        }
        if let Some(pos) = self.mempool.iter().position(|&t| t == blk.tol) {
            self.mempool.remove(pos);
        }
        self.newly_valid.push(b);
        self.reconfigure(store, b);
        Validation::Valid
    }

    /// Refunds of every TOL not yet folded by an earlier non-ES block, up to
    /// and including `anc`, folded in ascending height.
    fn refund_fold(&self, store: &BlockStore, anc: BlockId, last_full: u64) -> u64 {
        let from = last_full.saturating_sub(self.zeta) + 1;
        let mut refunds = Vec::new();
        let mut a = anc;
        while store.get(a).height >= from && a != GENESIS {
            refunds.push(self.slot(a).refund);
            a = store.get(a).parent;
        }
        refunds.reverse();
        fold_refunds(refunds)
    }

    /// Builds a child of `parent` with the next TOL from the mempool. The
    /// contract digest is the cached state `zeta` blocks back, or the empty
    /// marker if that state is not available yet.
    pub fn create(&mut self, store: &BlockStore, parent: BlockId, now: f64) -> BlockDraft {
        let height = store.get(parent).height + 1;
        let tol = self.mempool.pop_front().unwrap_or(TolId::EMPTY);
        let none = fold_refunds(std::iter::empty());
        let (contract_digest, fold) = if height <= self.zeta {
            (Digest::GENESIS_CONTRACT, none)
        } else {
            let anc = store.ancestor_at(parent, height - self.zeta);
            if self.slot(anc).processed {
                (self.slot(anc).state, self.refund_fold(store, anc, store.last_full_height(parent)))
            } else {
                (Digest::EMPTY, none)
            }
        };
        let prev_payment = self.cached_payment(parent).unwrap_or(store.get(parent).payment_digest);
        BlockDraft {
            height,
            parent,
            miner: self.id,
            mined_at: now,
            tol,
            payment_digest: payment_step(prev_payment, fold, tol),
            contract_digest,
        }
    }

    /// Moves the head to `b` if its validated chain is strictly longer;
    /// equal-length chains follow the tie rule. Returns the new head if it moved.
    pub fn reconfigure(&mut self, store: &BlockStore, b: BlockId) -> Option<BlockId> {
        if self.slot(b).status != Status::Valid {
            return None;
        }
        let h = store.get(b).height;
        let hh = store.get(self.head).height;
        let switch = if h > hh {
            true
        } else if h == hh && b != self.head {
            match &self.tie {
                TieBreak::FirstSeen => false,
                TieBreak::Favor(set) => set.contains(&store.get(b).miner) && !set.contains(&store.get(self.head).miner),
                TieBreak::Remember => {
                    self.tie_candidate = Some(b);
                    false
                }
            }
        } else {
            false
        };
        if switch {
            self.head = b;
            self.tie_candidate = None;
            self.head_moved = true;
            Some(b)
        } else {
            None
        }
    }

    /// Starts executing the next eligible TOL if the server is idle.
    pub fn start_service(&mut self, now: f64) -> Option<f64> {
        if self.in_service.is_some() {
            return None;
        }
        let Reverse((_, id)) = self.ready.pop()?;
        self.in_service = Some(BlockId(id));
        self.busy_until = now + self.tau;
        Some(self.busy_until)
    }

    /// Completes the TOL in service if it is due at `now`, caches its result,
    /// re-validates blocks that waited for that state and starts the next TOL.
    pub fn process_tol_step(&mut self, store: &BlockStore, now: f64) -> ServiceStep {
        let mut step = ServiceStep::default();
        if let Some(b) = self.in_service {
            if self.busy_until <= now {
                self.in_service = None;
                self.complete(store, b, now);
                step.completed = Some(b);
            }
        }
        step.next_done = self.start_service(now);
        step
    }

    fn complete(&mut self, store: &BlockStore, b: BlockId, now: f64) {
        let blk = store.get(b);
        let prev = self.slot(blk.parent).state;
        let (state, refund) = apply_transition(prev, blk.tol);
        {
            let s = self.slot_mut(b);
            s.processed = true;
            s.processed_at = now;
            s.state = state;
            s.refund = refund;
        }
        self.unprocessed -= 1;
        if let Some(children) = self.wait_processing.remove(&b) {
            for c in children {
                let key = self.slot(c).arrival.to_bits();
                self.ready.push(Reverse((key, c.0)));
            }
        }
        if let Some(waiting) = self.wait_state.remove(&b) {
            for w in waiting {
                let _ = self.validate(store, w, now);
            }
        }
    }
}
