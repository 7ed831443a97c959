//! Commitments layered over the B+ tree.
//!
//! Each node commits to the polynomial through `(k'_i, v_i)` where
//! `k'_i = H(key_i || i)` salts the key with its 1-based sorted position and
//! `v_i` is derived from the leaf value digest or the child's node hash. The
//! polynomial also passes through one fixed point carrying the element count,
//! which lets a proof attest that an opened element is the last in its node.
//! A node's hash is `H(C || type)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::algebra::{hash, hash_parts, hash_to_scalar, Digest, Scalar, G1_BYTES};
use crate::btree::{BPlusTree, Body, Key, LeafValue, Node, NodeType};
use crate::error::{Error, Result};
use crate::polycommit::{Commitment, Polynomial, PublicParams};

/// Commitment data cached on every committed node.
#[derive(Clone, Debug)]
pub struct NodeAuth {
    pub commitment: Commitment,
    pub node_hash: Digest,
    pub poly: Polynomial,
}

pub type AuthNode = Node<NodeAuth>;

const EMPTY_MARKER: u8 = 0xFF;

/// Root hash of the empty tree.
pub fn empty_root_hash() -> Digest {
    hash(&[EMPTY_MARKER])
}

pub fn salted_key(key: &Key, index: usize) -> Scalar {
    let index = u32::try_from(index).expect("node index fits in u32");
    hash_to_scalar(&[key.as_bytes(), &index.to_be_bytes()].concat())
}

/// Evaluation point of the element-count entry. The trailing `0xFF` bytes
/// keep it apart from every salted key, whose suffix is a small index.
pub fn count_point() -> Scalar {
    hash_to_scalar(b"element-count\xff\xff\xff\xff")
}

/// Scalar committed for an element whose value (or child hash) is `digest`.
pub fn value_scalar(digest: &Digest) -> Scalar {
    hash_to_scalar(digest)
}

pub fn node_hash(commitment: &Commitment, node_type: NodeType) -> Digest {
    hash_parts(&[&commitment.to_bytes(), &[node_type.to_byte()]])
}

/// Evaluation points of a node holding `elements` in sorted order.
pub fn node_points<'a>(elements: impl ExactSizeIterator<Item = (&'a Key, &'a Digest)>) -> Vec<(Scalar, Scalar)> {
    let count = elements.len();
    let mut points: Vec<_> = elements
        .enumerate()
        .map(|(i, (k, d))| (salted_key(k, i + 1), value_scalar(d)))
        .collect();
    points.push((count_point(), Scalar::from(count as u64)));
    points
}

/// Digest committed for each element: the value digest in a leaf, the
/// child's node hash in an internal node. Children must be committed.
pub fn element_digests(node: &AuthNode) -> Vec<Digest> {
    match node.body() {
        Body::Leaf(values) => values.iter().map(|v| v.digest).collect(),
        Body::Internal(children) => children
            .iter()
            .map(|c| c.annotation().expect("children are committed before parents").node_hash)
            .collect(),
    }
}

/// Interpolates, commits and hashes a node from its sorted elements.
pub fn commit_elements(
    params: &PublicParams,
    keys: &[Key],
    digests: &[Digest],
    node_type: NodeType,
) -> Result<NodeAuth> {
    debug_assert_eq!(keys.len(), digests.len());
    let points = node_points(keys.iter().zip(digests));
    let poly = Polynomial::interpolate(&points).map_err(|e| match e {
        Error::DuplicatePoint => Error::SaltCollision,
        e => e,
    })?;
    let commitment = params.commit(&poly)?;
    Ok(NodeAuth { commitment, node_hash: node_hash(&commitment, node_type), poly })
}

pub fn recommit_node(params: &PublicParams, node: &AuthNode, node_type: NodeType) -> Result<NodeAuth> {
    commit_elements(params, node.keys(), &element_digests(node), node_type)
}

/// Commits every node in the subtree that lacks an annotation, children
/// before parents. Returns how many nodes were committed.
fn recommit_dirty(params: &PublicParams, slot: &mut Arc<AuthNode>, is_root: bool) -> Result<usize> {
    if slot.annotation().is_some() {
        return Ok(0);
    }
    let node = Arc::get_mut(slot).expect("uncommitted nodes are never shared");
    let below = match node.body_mut() {
        Body::Internal(children) => children
            .par_iter_mut()
            .map(|c| recommit_dirty(params, c, false))
            .try_reduce(|| 0, |a, b| Ok(a + b))?,
        Body::Leaf(_) => 0,
    };
    let auth = recommit_node(params, node, node.node_type(is_root))?;
    node.set_annotation(auth);
    Ok(below + 1)
}

/// A published version of the tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RootRecord {
    pub root_hash: Digest,
    pub root_commitment: Commitment,
    pub element_count: u64,
    pub previous: Option<Digest>,
}

impl RootRecord {
    pub const ENCODED_LEN: usize = 32 + G1_BYTES + 8 + 1 + 32;

    pub fn genesis() -> Self {
        Self {
            root_hash: empty_root_hash(),
            root_commitment: Commitment::identity(),
            element_count: 0,
            previous: None,
        }
    }

    pub fn to_bytes(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        out[..32].copy_from_slice(&self.root_hash);
        out[32..80].copy_from_slice(&self.root_commitment.to_bytes());
        out[80..88].copy_from_slice(&self.element_count.to_le_bytes());
        if let Some(prev) = &self.previous {
            out[88] = 1;
            out[89..].copy_from_slice(prev);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != Self::ENCODED_LEN {
            return Err(Error::Decode(format!("root record must be {} bytes", Self::ENCODED_LEN)));
        }
        let previous = match bytes[88] {
            0 if bytes[89..].iter().all(|b| *b == 0) => None,
            1 => Some(bytes[89..].try_into().unwrap()),
            _ => return Err(Error::Decode("bad previous-root flag".into())),
        };
        Ok(Self {
            root_hash: bytes[..32].try_into().unwrap(),
            root_commitment: Commitment::from_bytes(&bytes[32..80])?,
            element_count: u64::from_le_bytes(bytes[80..88].try_into().unwrap()),
            previous,
        })
    }
}

/// Read-only view of one committed version.
#[derive(Clone, Debug)]
pub struct Snapshot {
    params: Arc<PublicParams>,
    q: usize,
    root: Arc<AuthNode>,
    record: RootRecord,
}

impl Snapshot {
    pub fn new(params: Arc<PublicParams>, q: usize, root: Arc<AuthNode>, record: RootRecord) -> Self {
        Self { params, q, root, record }
    }

    pub fn params(&self) -> &PublicParams {
        &self.params
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn root(&self) -> &Arc<AuthNode> {
        &self.root
    }

    pub fn record(&self) -> &RootRecord {
        &self.record
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }

    pub fn height(&self) -> usize {
        if self.root.is_empty() {
            0
        } else {
            self.root.height()
        }
    }

    pub fn get(&self, key: &Key) -> Option<LeafValue> {
        self.root.get(key).copied()
    }

    pub fn range_scan(&self, lo: &Key, hi: &Key) -> Result<Vec<(Key, LeafValue)>> {
        self.root.range(lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Op {
    Insert { key: Key, value: LeafValue },
    Delete { key: Key },
}

impl Op {
    /// Insert whose committed digest is the hash of `value`.
    pub fn insert(key: Key, value: &[u8]) -> Self {
        Self::Insert { key, value: LeafValue::new(hash(value)) }
    }

    pub fn delete(key: Key) -> Self {
        Self::Delete { key }
    }
}

/// Authenticated key-value tree with a history of published roots.
#[derive(Debug)]
pub struct AuthTree {
    params: Arc<PublicParams>,
    tree: BPlusTree<NodeAuth>,
    current: Snapshot,
    history: Vec<RootRecord>,
    last_recommitted: usize,
}

impl AuthTree {
    pub fn new(params: Arc<PublicParams>, q: usize) -> Result<Self> {
        let tree = BPlusTree::new(q)?;
        Self::check_params(&params, q)?;
        let current = Snapshot::new(params.clone(), q, tree.root().clone(), RootRecord::genesis());
        Ok(Self { params, tree, current, history: vec![RootRecord::genesis()], last_recommitted: 0 })
    }

    /// Rebuilds a tree from a committed root and its record history
    /// (oldest first, ending with the record for `root`).
    pub fn from_parts(
        params: Arc<PublicParams>,
        q: usize,
        root: Arc<AuthNode>,
        history: Vec<RootRecord>,
    ) -> Result<Self> {
        Self::check_params(&params, q)?;
        let record = *history.last().ok_or_else(|| Error::CorruptStore("empty root history".into()))?;
        let tree = BPlusTree::from_root(q, root.clone())?;
        let current = Snapshot::new(params.clone(), q, root, record);
        Ok(Self { params, tree, current, history, last_recommitted: 0 })
    }

    fn check_params(params: &PublicParams, q: usize) -> Result<()> {
        // q - 1 elements plus the count point need degree q - 1 and up to q
        // points in one batch opening
        if params.degree_bound() < q || params.max_batch() < q {
            return Err(Error::ParamsTooSmall { q, bound: params.degree_bound().min(params.max_batch()) });
        }
        Ok(())
    }

    pub fn params(&self) -> &Arc<PublicParams> {
        &self.params
    }

    pub fn q(&self) -> usize {
        self.tree.q()
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn record(&self) -> &RootRecord {
        self.current.record()
    }

    /// All published records, oldest first, starting with genesis.
    pub fn history(&self) -> &[RootRecord] {
        &self.history
    }

    pub fn snapshot(&self) -> Snapshot {
        self.current.clone()
    }

    /// Number of nodes recommitted by the most recent batch.
    pub fn last_recommitted(&self) -> usize {
        self.last_recommitted
    }

    pub fn get(&self, key: &Key) -> Option<LeafValue> {
        self.tree.get(key).copied()
    }

    /// Applies a batch and recommits each changed node once. A new record is
    /// published only when the root hash changes. On error the tree is left
    /// at its previous version.
    pub fn apply_updates(&mut self, ops: &[Op]) -> Result<RootRecord> {
        self.last_recommitted = 0;
        if ops.is_empty() {
            return Ok(*self.record());
        }
        let result = self.apply_inner(ops);
        if result.is_err() {
            self.tree = BPlusTree::from_root(self.q(), self.current.root().clone())?;
        }
        result
    }

    fn apply_inner(&mut self, ops: &[Op]) -> Result<RootRecord> {
        for op in ops {
            match op {
                Op::Insert { key, value } => {
                    self.tree.insert(key.clone(), *value)?;
                }
                Op::Delete { key } => {
                    self.tree.delete(key);
                }
            }
        }
        self.last_recommitted = if self.tree.is_empty() {
            0
        } else {
            recommit_dirty(&self.params, self.tree.root_mut(), true)?
        };

        let prev = *self.record();
        let mut record = match self.tree.root().annotation() {
            Some(auth) if !self.tree.is_empty() => RootRecord {
                root_hash: auth.node_hash,
                root_commitment: auth.commitment,
                element_count: self.tree.len() as u64,
                previous: None,
            },
            _ => RootRecord::genesis(),
        };
        if record.root_hash == prev.root_hash {
            record = prev;
        } else {
            record.previous = Some(prev.root_hash);
            self.history.push(record);
        }
        self.current = Snapshot::new(self.params.clone(), self.q(), self.tree.root().clone(), record);
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::g1_generator;
    use ark_ec::{AffineRepr, CurveGroup};

    fn params(t: usize) -> Arc<PublicParams> {
        Arc::new(PublicParams::test_mode(t, 11).unwrap())
    }

    fn ins(k: u64) -> Op {
        Op::insert(Key::from(k), &k.to_le_bytes())
    }

    #[test]
    fn value_scalar_mapping() {
        let d = hash(b"v");
        assert_eq!(value_scalar(&d), hash_to_scalar(&d));
        assert_ne!(value_scalar(&hash(b"a")), value_scalar(&hash(b"b")));
    }

    #[test]
    fn salted_key_depends_on_index() {
        let k = Key::from(5);
        assert_ne!(salted_key(&k, 1), salted_key(&k, 2));
        assert_eq!(salted_key(&k, 1), hash_to_scalar(&[&5u64.to_be_bytes()[..], &[0, 0, 0, 1]].concat()));
    }

    #[test]
    fn single_element_leaf_commitment_matches_trapdoor() {
        let pp = params(4);
        let key = Key::from(1);
        let digest = hash(b"one");
        let auth = commit_elements(&pp, std::slice::from_ref(&key), &[digest], NodeType::Root).unwrap();

        // φ is the line through (k'_1, v_1) and (count point, 1); evaluate it at α directly
        let alpha = pp.trapdoor().unwrap();
        let (x1, y1) = (salted_key(&key, 1), value_scalar(&digest));
        let (x2, y2) = (count_point(), Scalar::from(1u64));
        let at_alpha = y1 * (alpha - x2) / (x1 - x2) + y2 * (alpha - x1) / (x2 - x1);
        let expected = (g1_generator().into_group() * at_alpha).into_affine();
        assert_eq!(auth.commitment.0, expected);
        assert_eq!(auth.poly.degree(), Some(1));
        assert_eq!(auth.node_hash, hash(&[&auth.commitment.to_bytes()[..], &[0]].concat()));
    }

    #[test]
    fn commitment_is_deterministic() {
        let pp = params(8);
        let keys: Vec<Key> = (1..=5).map(Key::from).collect();
        let digests: Vec<Digest> = (1..=5u8).map(|i| hash(&[i])).collect();
        let a = commit_elements(&pp, &keys, &digests, NodeType::Leaf).unwrap();
        let b = commit_elements(&pp, &keys, &digests, NodeType::Leaf).unwrap();
        assert_eq!(a.node_hash, b.node_hash);
        assert!(pp.verify_poly(&a.commitment, &a.poly));

        // inserting the same content in a different order yields the same node
        let mut t1 = AuthTree::new(pp.clone(), 8).unwrap();
        let mut t2 = AuthTree::new(pp, 8).unwrap();
        t1.apply_updates(&(1..=5).map(ins).collect::<Vec<_>>()).unwrap();
        t2.apply_updates(&[5, 3, 1, 4, 2].map(ins)).unwrap();
        assert_eq!(t1.record().root_hash, t2.record().root_hash);
    }

    #[test]
    fn type_byte_changes_hash() {
        let pp = params(4);
        let auth = commit_elements(&pp, &[Key::from(1)], &[hash(b"x")], NodeType::Leaf).unwrap();
        assert_ne!(node_hash(&auth.commitment, NodeType::Leaf), node_hash(&auth.commitment, NodeType::Root));
    }

    #[test]
    fn rejects_small_params() {
        assert!(matches!(AuthTree::new(params(4), 8), Err(Error::ParamsTooSmall { q: 8, .. })));
        assert!(AuthTree::new(params(8), 8).is_ok());
    }

    #[test]
    fn empty_batch_publishes_nothing() {
        let mut t = AuthTree::new(params(4), 4).unwrap();
        let r = t.apply_updates(&[]).unwrap();
        assert_eq!(r, RootRecord::genesis());
        assert_eq!(t.history().len(), 1);
        assert_eq!(r.root_hash, empty_root_hash());
    }

    #[test]
    fn batching_does_not_change_the_root() {
        let pp = params(4);
        let mut a = AuthTree::new(pp.clone(), 4).unwrap();
        let mut b = AuthTree::new(pp, 4).unwrap();
        a.apply_updates(&[ins(1), ins(2)]).unwrap();
        b.apply_updates(&[ins(1)]).unwrap();
        b.apply_updates(&[ins(2)]).unwrap();
        assert_eq!(a.record().root_hash, b.record().root_hash);
    }

    #[test]
    fn every_insert_changes_the_root_and_links_history() {
        let mut t = AuthTree::new(params(4), 4).unwrap();
        for k in 0..40 {
            let before = *t.record();
            let after = t.apply_updates(&[ins(k)]).unwrap();
            assert_ne!(before.root_hash, after.root_hash);
            assert_eq!(after.previous, Some(before.root_hash));
            assert_eq!(after.element_count, k + 1);
        }
        let h = t.history();
        assert_eq!(h.len(), 41);
        assert!(h.windows(2).all(|w| w[1].previous == Some(w[0].root_hash)));
        assert_eq!(h[0].previous, None);
    }

    #[test]
    fn deleting_everything_returns_to_genesis_hash() {
        let mut t = AuthTree::new(params(4), 4).unwrap();
        t.apply_updates(&(0..20).map(ins).collect::<Vec<_>>()).unwrap();
        let r = t.apply_updates(&(0..20).map(|k| Op::delete(Key::from(k))).collect::<Vec<_>>()).unwrap();
        assert_eq!(r.root_hash, empty_root_hash());
        assert_eq!(r.element_count, 0);
        assert!(r.previous.is_some());
    }

    #[test]
    fn every_node_commitment_opens_to_its_poly() {
        let pp = params(8);
        let mut t = AuthTree::new(pp.clone(), 8).unwrap();
        t.apply_updates(&(0..200).map(ins).collect::<Vec<_>>()).unwrap();
        t.apply_updates(&(0..200).step_by(3).map(|k| Op::delete(Key::from(k))).collect::<Vec<_>>())
            .unwrap();
        fn walk(pp: &PublicParams, n: &AuthNode, is_root: bool) {
            let auth = n.annotation().unwrap();
            assert!(pp.verify_poly(&auth.commitment, &auth.poly));
            let fresh = recommit_node(pp, n, n.node_type(is_root)).unwrap();
            assert_eq!(fresh.node_hash, auth.node_hash);
            for c in n.children().unwrap_or(&[]) {
                walk(pp, c, false);
            }
        }
        walk(&pp, t.snapshot().root(), true);
    }

    #[test]
    fn recommit_count_bounded_by_path() {
        let mut t = AuthTree::new(params(8), 8).unwrap();
        for k in 0..300u64 {
            let height = t.snapshot().height();
            t.apply_updates(&[ins(k * 7919 % 1000)]).unwrap();
            // a split adds at most one node per level plus a new root
            assert!(t.last_recommitted() <= 2 * height + 1);
        }
    }

    #[test]
    fn old_snapshot_survives_updates() {
        let mut t = AuthTree::new(params(4), 4).unwrap();
        t.apply_updates(&(0..30).map(ins).collect::<Vec<_>>()).unwrap();
        let old = t.snapshot();
        t.apply_updates(&[ins(100), Op::delete(Key::from(3))]).unwrap();
        assert!(old.get(&Key::from(3)).is_some());
        assert!(old.get(&Key::from(100)).is_none());
        assert_eq!(old.root().annotation().unwrap().node_hash, old.record().root_hash);
    }

    #[test]
    fn record_round_trip() {
        let mut t = AuthTree::new(params(4), 4).unwrap();
        t.apply_updates(&[ins(1)]).unwrap();
        for r in t.history() {
            assert_eq!(RootRecord::from_bytes(&r.to_bytes()).unwrap(), *r);
        }
        assert!(RootRecord::from_bytes(&[0u8; 10]).is_err());
    }
}
