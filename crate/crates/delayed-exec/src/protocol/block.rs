use serde::{Deserialize, Serialize};

use super::digest::{Digest, TolId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MinerId(pub u32);

pub const GENESIS: BlockId = BlockId(0);

impl BlockId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl MinerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub height: u64,
    pub parent: BlockId,
    pub miner: MinerId,
    pub mined_at: f64,
    pub tol: TolId,
    pub payment_digest: Digest,
    /// Contract state `zeta` blocks back, or [`Digest::EMPTY`].
    pub contract_digest: Digest,
    pub is_es: bool,
}

/// A block before it is stored and numbered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockDraft {
    pub height: u64,
    pub parent: BlockId,
    pub miner: MinerId,
    pub mined_at: f64,
    pub tol: TolId,
    pub payment_digest: Digest,
    pub contract_digest: Digest,
}

/// Append-only arena of all blocks ever mined in a run. Blocks are immutable
/// once stored and shared by every miner.
#[derive(Debug, Clone)]
pub struct BlockStore {
    blocks: Vec<Block>,
    // height of the latest non-ES block on the chain ending at each block
    last_full: Vec<u64>,
}

impl Default for BlockStore {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockStore {
    pub fn new() -> Self {
        let genesis = Block {
            id: GENESIS,
            height: 0,
            parent: GENESIS,
            miner: MinerId(u32::MAX),
            mined_at: 0.0,
            tol: TolId::EMPTY,
            payment_digest: Digest::GENESIS_PAYMENT,
            contract_digest: Digest::GENESIS_CONTRACT,
            is_es: false,
        };
        BlockStore { blocks: vec![genesis], last_full: vec![0] }
    }

    pub fn insert(&mut self, d: BlockDraft) -> BlockId {
        let parent = &self.blocks[d.parent.index()];
        assert_eq!(d.height, parent.height + 1, "height must extend the parent");
        let id = BlockId(u32::try_from(self.blocks.len()).expect("block id overflow"));
        let is_es = d.contract_digest.is_empty();
        let lf = if is_es { self.last_full[d.parent.index()] } else { d.height };
        self.blocks.push(Block {
            id,
            height: d.height,
            parent: d.parent,
            miner: d.miner,
            mined_at: d.mined_at,
            tol: d.tol,
            payment_digest: d.payment_digest,
            contract_digest: d.contract_digest,
            is_es,
        });
        self.last_full.push(lf);
        id
    }

    pub fn get(&self, id: BlockId) -> &Block {
        &self.blocks[id.index()]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter()
    }

    /// Height of the latest non-ES block at or below `id` on its chain
    /// (genesis counts as non-ES).
    pub fn last_full_height(&self, id: BlockId) -> u64 {
        self.last_full[id.index()]
    }

    /// Ancestor of `id` at `height` (which must not exceed id's height).
    pub fn ancestor_at(&self, mut id: BlockId, height: u64) -> BlockId {
        let mut h = self.get(id).height;
        debug_assert!(height <= h);
        while h > height {
            id = self.get(id).parent;
            h -= 1;
        }
        id
    }

    /// Blocks from genesis (excluded) to `tip`, in height order.
    pub fn chain(&self, tip: BlockId) -> Vec<BlockId> {
        let mut v = Vec::with_capacity(self.get(tip).height as usize);
        let mut b = tip;
        while b != GENESIS {
            v.push(b);
            b = self.get(b).parent;
        }
        v.reverse();
        v
    }

    pub fn is_ancestor(&self, anc: BlockId, of: BlockId) -> bool {
        let h = self.get(anc).height;
        h <= self.get(of).height && self.ancestor_at(of, h) == anc
    }
}
