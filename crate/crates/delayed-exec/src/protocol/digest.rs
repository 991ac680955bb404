use serde::{Deserialize, Serialize};

/// Opaque 64-bit digest. Computed digests are never zero, which is reserved
/// for the empty-state marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digest(pub u64);

/// Refund list produced by executing one TOL, reduced to a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RefundToken(pub u64);

/// Identifier of a transaction ordered list; 0 is the empty list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TolId(pub u64);

impl Digest {
    pub const EMPTY: Digest = Digest(0);
    pub const GENESIS_CONTRACT: Digest = Digest(0x6a09_e667_f3bc_c908);
    pub const GENESIS_PAYMENT: Digest = Digest(0xbb67_ae85_84ca_a73b);

    pub fn is_empty(self) -> bool {
        self == Digest::EMPTY
    }
}

impl TolId {
    pub const EMPTY: TolId = TolId(0);
}

const TAG_STATE: u64 = 0x3c6e_f372_fe94_f82b;
const TAG_REFUND: u64 = 0xa54f_f53a_5f1d_36f1;
const TAG_PAY: u64 = 0x510e_527f_ade6_82d1;
const TAG_FOLD: u64 = 0x9b05_688c_2b3e_6c1f;

#[inline]
fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn mix(tag: u64, a: u64, b: u64) -> u64 {
    let h = avalanche(avalanche(tag ^ a).wrapping_add(b).wrapping_add(0x9e37_79b9_7f4a_7c15));
    if h == 0 {
        1
    } else {
        h
    }
}

/// Executes `tol` on the contract state `prev`: new state digest and the
/// refund token of its transactions.
pub fn apply_transition(prev: Digest, tol: TolId) -> (Digest, RefundToken) {
    (Digest(mix(TAG_STATE, prev.0, tol.0)), RefundToken(mix(TAG_REFUND, prev.0, tol.0)))
}

/// Folds refund tokens in the given (ascending height) order.
pub fn fold_refunds<I: IntoIterator<Item = RefundToken>>(refunds: I) -> u64 {
    refunds.into_iter().fold(TAG_FOLD, |acc, r| mix(TAG_FOLD, acc, r.0))
}

/// Payment digest after applying the folded refunds and then the payment
/// part of `tol`.
pub fn payment_step(prev: Digest, refund_fold: u64, tol: TolId) -> Digest {
    Digest(mix(TAG_PAY, prev.0, mix(TAG_PAY, refund_fold, tol.0)))
}
