//! Membership, non-membership and range proofs against a [`RootRecord`].
//!
//! A proof is a list of per-node openings from the root down. Each opening
//! reveals some `(key, index, digest)` elements of one node together with a
//! single batch witness, and every non-root opening carries the node's
//! commitment, whose hash must equal the digest opened one level up. The
//! root level always attests its element count, which tells the verifier
//! whether the root is a leaf (a leaf root holds every element).
//!
//! Non-membership and range proofs additionally open the neighbours that
//! bound the queried interval: a left neighbour below `lo` at the deepest
//! level where one exists, and on the right either an element past `hi` or
//! the node's element count. Nodes lying entirely inside a range are not
//! opened; the verifier rebuilds them from the in-range elements, split into
//! nodes by one bit vector per level.
//!
//! [`RootRecord`]: crate::authtree::RootRecord

mod prove;
mod verify;
mod wire;

pub use verify::{verify_membership, verify_nonmembership, verify_range};

use crate::algebra::Digest;
use crate::btree::{Key, NodeType};
use crate::polycommit::{Commitment, Witness};

/// One opened element of a node. `index` is the 1-based sorted position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenedElement {
    pub key: Key,
    pub index: u32,
    pub digest: Digest,
}

/// Opening of one node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelProof {
    pub node_type: NodeType,
    /// Absent at the root, whose commitment comes from the root record.
    pub commitment: Option<Commitment>,
    pub opened: Vec<OpenedElement>,
    pub element_count: Option<u32>,
    pub witness: Witness,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MembershipProof {
    pub levels: Vec<LevelProof>,
}

impl MembershipProof {
    /// Digest the proof claims for the key.
    pub fn value_digest(&self) -> Option<Digest> {
        Some(self.levels.last()?.opened.first()?.digest)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NonMembershipProof {
    pub levels: Vec<LevelProof>,
    /// Depth (root = 0) of the node that opens the left neighbour of the
    /// key, if the key is not below every stored key.
    pub interval_depth: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RangeProof {
    /// Leftmost visited node at every depth, root first.
    pub left: Vec<LevelProof>,
    /// Rightmost visited node at each depth where it differs from the
    /// leftmost one; these are always the deepest levels.
    pub right: Vec<LevelProof>,
    /// `bit_vectors[j]` covers level `j` counted from the leaves: one bit per
    /// in-range element of each visited node, set on the last one of a node.
    pub bit_vectors: Vec<Vec<bool>>,
    /// Every `(key, value digest)` in the range, ascending.
    pub interior: Vec<(Key, Digest)>,
}

impl RangeProof {
    pub fn bit_count(&self) -> usize {
        self.bit_vectors.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Proof {
    Membership(MembershipProof),
    NonMembership(NonMembershipProof),
    Range(RangeProof),
}

impl Proof {
    pub fn to_bytes(&self) -> Vec<u8> {
        wire::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> crate::Result<Self> {
        wire::decode(bytes)
    }
}

impl From<MembershipProof> for Proof {
    fn from(p: MembershipProof) -> Self {
        Self::Membership(p)
    }
}

impl From<NonMembershipProof> for Proof {
    fn from(p: NonMembershipProof) -> Self {
        Self::NonMembership(p)
    }
}

impl From<RangeProof> for Proof {
    fn from(p: RangeProof) -> Self {
        Self::Range(p)
    }
}

/// Serialized length in bytes.
pub fn proof_size(proof: &Proof) -> usize {
    proof.to_bytes().len()
}

/// Serialized length of a single level record.
pub fn level_size(level: &LevelProof) -> usize {
    let mut out = Vec::new();
    wire::encode_level(&mut out, level);
    out.len()
}

/// Bit-vector total predicted for `m` contiguous elements in a tree whose
/// nodes each hold `fanout` elements, over levels `j = 0..=h`:
/// `Σ ceil(m / fanout^j)`. Measured totals equal this whenever the range
/// starts on a node boundary of such a uniform tree.
pub fn range_bits_model(fanout: usize, m: usize, h: usize) -> usize {
    assert!(fanout >= 2, "fanout must be at least 2");
    let mut total = 0;
    let mut width = 1usize;
    for _ in 0..=h {
        total += m.div_ceil(width);
        width = width.saturating_mul(fanout);
    }
    total
}
