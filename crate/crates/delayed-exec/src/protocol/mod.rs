//! The per-miner protocol: blocks carry the payment digest of their own
//! transactions and the contract-state digest of the block `zeta` positions
//! earlier, or the empty marker when that state is not yet available.

mod block;
mod digest;
mod miner;

pub use block::{Block, BlockDraft, BlockId, BlockStore, MinerId, GENESIS};
pub use digest::{apply_transition, fold_refunds, payment_step, Digest, RefundToken, TolId};
pub use miner::{DeferReason, MinerState, ServiceStep, TieBreak, Validation};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("block {block:?} refers to unknown parent {parent:?}")]
    Orphan { block: BlockId, parent: BlockId },
    #[error("block {0:?} is not known to this miner")]
    Unknown(BlockId),
}
