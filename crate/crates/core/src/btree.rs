//! Copy-on-write B+ tree with no cryptography attached.
//!
//! Every element of a node is a `(key, ref)` pair. In a leaf the ref is the
//! stored value; in an internal node it is a child and the key is the largest
//! key in that child's subtree, so `child_i` holds exactly the keys in
//! `(k_{i-1}, k_i]`. Descent picks the first element whose key is `>=` the
//! search key. Non-root nodes hold between `q/2` and `q - 1` elements.
//!
//! Nodes sit behind `Arc`s. A mutation copies every shared node on its path
//! (giving the copy a fresh [`NodeId`]) and edits unshared nodes in place, so
//! a cloned root keeps seeing its own version. Each node carries an optional
//! annotation of type `A` that is cleared whenever the node is touched; the
//! authenticated overlay stores its commitments there.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::algebra::Digest;
use crate::error::{Error, Result};

pub const MAX_KEY_LEN: usize = 1024;
pub const MAX_BRANCHING: usize = 1 << 16;

/// Byte-string key, ordered lexicographically.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Key(Vec<u8>);

impl Key {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self> {
        let bytes = bytes.into();
        if bytes.len() > MAX_KEY_LEN {
            return Err(Error::KeyTooLong { len: bytes.len(), max: MAX_KEY_LEN });
        }
        Ok(Self(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<u64> for Key {
    /// Big-endian, so numeric and byte order agree.
    fn from(v: u64) -> Self {
        Self(v.to_be_bytes().to_vec())
    }
}

/// Where a value's bytes live in the value log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ValueLocation {
    pub offset: u64,
    pub length: u32,
}

/// What a leaf stores for a key: the value digest, plus its storage position
/// when the tree is backed by a store. The position is never committed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LeafValue {
    pub digest: Digest,
    pub location: Option<ValueLocation>,
}

impl LeafValue {
    pub fn new(digest: Digest) -> Self {
        Self { digest, location: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u64);

static NEXT_NODE_ID: AtomicU64 = AtomicU64::new(1);

impl NodeId {
    pub fn fresh() -> Self {
        Self(NEXT_NODE_ID.fetch_add(1, Ordering::Relaxed))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

/// Node role, with the byte used when hashing a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeType {
    Root = 0,
    Internal = 1,
    Leaf = 2,
}

impl NodeType {
    pub fn to_byte(self) -> u8 {
        self as u8
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Root),
            1 => Some(Self::Internal),
            2 => Some(Self::Leaf),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Body<A> {
    Leaf(Vec<LeafValue>),
    Internal(Vec<Arc<Node<A>>>),
}

#[derive(Clone, Debug)]
pub struct Node<A> {
    id: NodeId,
    keys: Vec<Key>,
    body: Body<A>,
    annotation: Option<A>,
}

impl<A> Node<A> {
    pub fn new_leaf(keys: Vec<Key>, values: Vec<LeafValue>) -> Self {
        assert_eq!(keys.len(), values.len());
        Self { id: NodeId::fresh(), keys, body: Body::Leaf(values), annotation: None }
    }

    pub fn new_internal(keys: Vec<Key>, children: Vec<Arc<Node<A>>>) -> Self {
        assert_eq!(keys.len(), children.len());
        Self { id: NodeId::fresh(), keys, body: Body::Internal(children), annotation: None }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }

    pub fn body(&self) -> &Body<A> {
        &self.body
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.body, Body::Leaf(_))
    }

    pub fn values(&self) -> Option<&[LeafValue]> {
        match &self.body {
            Body::Leaf(v) => Some(v),
            Body::Internal(_) => None,
        }
    }

    pub fn children(&self) -> Option<&[Arc<Node<A>>]> {
        match &self.body {
            Body::Internal(c) => Some(c),
            Body::Leaf(_) => None,
        }
    }

    pub fn annotation(&self) -> Option<&A> {
        self.annotation.as_ref()
    }

    pub fn set_annotation(&mut self, a: A) {
        self.annotation = Some(a);
    }

    pub fn body_mut(&mut self) -> &mut Body<A> {
        &mut self.body
    }

    pub fn max_key(&self) -> Option<&Key> {
        self.keys.last()
    }

    pub fn node_type(&self, is_root: bool) -> NodeType {
        if is_root {
            NodeType::Root
        } else if self.is_leaf() {
            NodeType::Leaf
        } else {
            NodeType::Internal
        }
    }

    /// Index of the first element with key `>= key`, or `len()` if none.
    pub fn lower_bound(&self, key: &Key) -> usize {
        self.keys.partition_point(|k| k < key)
    }

    /// Number of leaf levels below and including this node.
    pub fn height(&self) -> usize {
        let mut h = 1;
        let mut node = self;
        while let Body::Internal(children) = &node.body {
            node = &children[0];
            h += 1;
        }
        h
    }

    fn split_off(&mut self, at: usize) -> Self {
        let keys = self.keys.split_off(at);
        let body = match &mut self.body {
            Body::Leaf(v) => Body::Leaf(v.split_off(at)),
            Body::Internal(c) => Body::Internal(c.split_off(at)),
        };
        Self { id: NodeId::fresh(), keys, body, annotation: None }
    }

    fn append(&mut self, other: &mut Self) {
        self.keys.append(&mut other.keys);
        match (&mut self.body, &mut other.body) {
            (Body::Leaf(a), Body::Leaf(b)) => a.append(b),
            (Body::Internal(a), Body::Internal(b)) => a.append(b),
            _ => unreachable!("siblings are always at the same level"),
        }
    }

    /// Moves the first `n` elements of `other` onto the end of `self`.
    fn take_front(&mut self, other: &mut Self, n: usize) {
        self.keys.extend(other.keys.drain(..n));
        match (&mut self.body, &mut other.body) {
            (Body::Leaf(a), Body::Leaf(b)) => a.extend(b.drain(..n)),
            (Body::Internal(a), Body::Internal(b)) => a.extend(b.drain(..n)),
            _ => unreachable!("siblings are always at the same level"),
        }
    }

    /// Moves the last `n` elements of `other` onto the front of `self`.
    fn take_back(&mut self, other: &mut Self, n: usize) {
        let mut moved = other.split_off(other.len() - n);
        moved.append(self);
        std::mem::swap(&mut self.keys, &mut moved.keys);
        std::mem::swap(&mut self.body, &mut moved.body);
    }

    /// Looks `key` up in this subtree.
    pub fn get(&self, key: &Key) -> Option<&LeafValue> {
        let mut node = self;
        loop {
            let i = node.lower_bound(key);
            match &node.body {
                Body::Leaf(values) => {
                    return (node.keys.get(i) == Some(key)).then(|| &values[i]);
                }
                Body::Internal(children) => {
                    node = children.get(i)?;
                }
            }
        }
    }

    /// Descends toward `key`, recording `(node, index)` at each level. The
    /// index is the first element with key `>= key` (`len()` if none), and
    /// descent stops early when no child can contain the key.
    pub fn search(&self, key: &Key) -> SearchResult {
        let mut path = Vec::new();
        let mut node = self;
        loop {
            let i = node.lower_bound(key);
            path.push((node.id, i));
            match &node.body {
                Body::Leaf(values) => {
                    let value = (node.keys.get(i) == Some(key)).then(|| values[i]);
                    return SearchResult { found: value.is_some(), value, path };
                }
                Body::Internal(children) => match children.get(i) {
                    Some(child) => node = child,
                    None => return SearchResult { found: false, value: None, path },
                },
            }
        }
    }

    /// All `(key, value)` pairs with `lo <= key <= hi`, ascending.
    pub fn range(&self, lo: &Key, hi: &Key) -> Result<Vec<(Key, LeafValue)>> {
        if lo > hi {
            return Err(Error::InvalidRange);
        }
        let mut out = Vec::new();
        self.collect_range(lo, hi, &mut out);
        Ok(out)
    }

    fn collect_range(&self, lo: &Key, hi: &Key, out: &mut Vec<(Key, LeafValue)>) {
        let start = self.lower_bound(lo);
        match &self.body {
            Body::Leaf(values) => {
                for (k, v) in self.keys[start..].iter().zip(&values[start..]) {
                    if k > hi {
                        break;
                    }
                    out.push((k.clone(), *v));
                }
            }
            Body::Internal(children) => {
                for (i, child) in children.iter().enumerate().skip(start) {
                    child.collect_range(lo, hi, out);
                    if &self.keys[i] >= hi {
                        break;
                    }
                }
            }
        }
    }

    /// Number of leaf entries in this subtree.
    pub fn count_entries(&self) -> usize {
        match &self.body {
            Body::Leaf(values) => values.len(),
            Body::Internal(children) => children.iter().map(|c| c.count_entries()).sum(),
        }
    }

    pub fn entries(&self) -> Vec<(Key, LeafValue)> {
        let mut out = Vec::new();
        self.collect_entries(&mut out);
        out
    }

    fn collect_entries(&self, out: &mut Vec<(Key, LeafValue)>) {
        match &self.body {
            Body::Leaf(values) => {
                out.extend(self.keys.iter().cloned().zip(values.iter().copied()));
            }
            Body::Internal(children) => children.iter().for_each(|c| c.collect_entries(out)),
        }
    }

    /// Verifies ordering, occupancy, uniform leaf depth and that every
    /// internal key equals the largest key of its child.
    pub fn check_invariants(&self, q: usize) -> std::result::Result<(), String> {
        if let Body::Internal(children) = &self.body {
            if children.len() < 2 {
                return Err("internal root must have at least two children".into());
            }
        }
        self.check_node(q, true, None, None).map(|_| ())
    }

    fn check_node(
        &self,
        q: usize,
        is_root: bool,
        lower: Option<&Key>,
        upper: Option<&Key>,
    ) -> std::result::Result<usize, String> {
        let n = self.keys.len();
        if n > q - 1 {
            return Err(format!("node {:?} holds {n} > q-1 elements", self.id));
        }
        if !is_root && n < q / 2 {
            return Err(format!("node {:?} holds {n} < q/2 elements", self.id));
        }
        if self.keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("node {:?} keys are not strictly increasing", self.id));
        }
        if let (Some(lo), Some(first)) = (lower, self.keys.first()) {
            if first <= lo {
                return Err(format!("node {:?} key below its separator interval", self.id));
            }
        }
        if let Some(hi) = upper {
            if self.keys.last() != Some(hi) {
                return Err(format!("node {:?} max key differs from its parent key", self.id));
            }
        }
        match &self.body {
            Body::Leaf(values) => {
                if values.len() != n {
                    return Err("leaf keys and values differ in length".into());
                }
                Ok(1)
            }
            Body::Internal(children) => {
                if children.len() != n {
                    return Err("internal keys and children differ in length".into());
                }
                let mut depth = None;
                for (i, child) in children.iter().enumerate() {
                    let lo = if i == 0 { lower } else { Some(&self.keys[i - 1]) };
                    let d = child.check_node(q, false, lo, Some(&self.keys[i]))?;
                    if *depth.get_or_insert(d) != d {
                        return Err(format!("leaves under {:?} are at different depths", self.id));
                    }
                }
                Ok(depth.unwrap_or(0) + 1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    pub found: bool,
    pub value: Option<LeafValue>,
    pub path: Vec<(NodeId, usize)>,
}

/// Gives mutable access to the node in `slot`, copying it first if it is
/// shared with another version. Clears the annotation and records the id.
fn touch<'a, A: Clone>(slot: &'a mut Arc<Node<A>>, modified: &mut Vec<NodeId>) -> &'a mut Node<A> {
    if Arc::get_mut(slot).is_none() {
        let copy = Node {
            id: NodeId::fresh(),
            keys: slot.keys.clone(),
            body: slot.body.clone(),
            annotation: None,
        };
        *slot = Arc::new(copy);
    }
    let node = Arc::get_mut(slot).expect("node is uniquely owned after copy");
    node.annotation = None;
    modified.push(node.id);
    node
}

#[derive(Clone, Debug)]
pub struct BPlusTree<A> {
    q: usize,
    root: Arc<Node<A>>,
    len: usize,
}

impl<A: Clone> BPlusTree<A> {
    /// `q` is the branching factor: nodes overflow when they reach `q`
    /// elements and split into two halves of `q/2`. Element positions are
    /// 16-bit on the wire, which caps `q` at [`MAX_BRANCHING`].
    pub fn new(q: usize) -> Result<Self> {
        if q < 4 || !q.is_multiple_of(2) || q > MAX_BRANCHING {
            return Err(Error::BranchingFactor(q));
        }
        Ok(Self { q, root: Arc::new(Node::new_leaf(Vec::new(), Vec::new())), len: 0 })
    }

    /// Wraps an existing root, e.g. one loaded from storage.
    pub fn from_root(q: usize, root: Arc<Node<A>>) -> Result<Self> {
        let mut tree = Self::new(q)?;
        tree.len = root.count_entries();
        tree.root = root;
        Ok(tree)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn root(&self) -> &Arc<Node<A>> {
        &self.root
    }

    pub fn root_mut(&mut self) -> &mut Arc<Node<A>> {
        &mut self.root
    }

    pub fn height(&self) -> usize {
        self.root.height()
    }

    pub fn get(&self, key: &Key) -> Option<&LeafValue> {
        self.root.get(key)
    }

    pub fn search(&self, key: &Key) -> SearchResult {
        self.root.search(key)
    }

    pub fn range_scan(&self, lo: &Key, hi: &Key) -> Result<Vec<(Key, LeafValue)>> {
        self.root.range(lo, hi)
    }

    pub fn entries(&self) -> Vec<(Key, LeafValue)> {
        self.root.entries()
    }

    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        self.root.check_invariants(self.q)
    }

    /// Inserts or overwrites `key`. Returns the ids of every node whose
    /// contents changed, including newly created ones.
    pub fn insert(&mut self, key: Key, value: LeafValue) -> Result<Vec<NodeId>> {
        if key.len() > MAX_KEY_LEN {
            return Err(Error::KeyTooLong { len: key.len(), max: MAX_KEY_LEN });
        }
        let mut modified = Vec::new();
        let (split, added) = insert_rec(&mut self.root, key, value, self.q, &mut modified);
        if added {
            self.len += 1;
        }
        if let Some(right) = split {
            let left = self.root.clone();
            let keys = vec![
                left.max_key().expect("split halves are non-empty").clone(),
                right.max_key().expect("split halves are non-empty").clone(),
            ];
            let new_root = Node::new_internal(keys, vec![left, right]);
            modified.push(new_root.id);
            self.root = Arc::new(new_root);
        }
        modified.sort_unstable();
        modified.dedup();
        Ok(modified)
    }

    /// Removes `key`. Absent keys leave the tree untouched and return an
    /// empty list.
    pub fn delete(&mut self, key: &Key) -> Vec<NodeId> {
        if self.root.get(key).is_none() {
            return Vec::new();
        }
        let mut modified = Vec::new();
        delete_rec(&mut self.root, key, self.q, &mut modified);
        self.len -= 1;

        let collapse = match &self.root.body {
            Body::Internal(children) if children.len() == 1 => Some(children[0].clone()),
            _ => None,
        };
        if let Some(child) = collapse {
            self.root = child;
            // the promoted child changes role, so its annotation is stale
            touch(&mut self.root, &mut modified);
        }
        modified.sort_unstable();
        modified.dedup();
        modified
    }
}

fn insert_rec<A: Clone>(
    slot: &mut Arc<Node<A>>,
    key: Key,
    value: LeafValue,
    q: usize,
    modified: &mut Vec<NodeId>,
) -> (Option<Arc<Node<A>>>, bool) {
    let node = touch(slot, modified);
    let added = match &mut node.body {
        Body::Leaf(values) => match node.keys.binary_search(&key) {
            Ok(i) => {
                values[i] = value;
                false
            }
            Err(i) => {
                node.keys.insert(i, key);
                values.insert(i, value);
                true
            }
        },
        Body::Internal(children) => {
            let i = node.keys.partition_point(|k| k < &key).min(children.len() - 1);
            let (split, added) = insert_rec(&mut children[i], key, value, q, modified);
            node.keys[i] = children[i].max_key().expect("child is non-empty").clone();
            if let Some(right) = split {
                node.keys.insert(i + 1, right.max_key().expect("split half is non-empty").clone());
                children.insert(i + 1, right);
            }
            added
        }
    };
    if node.keys.len() >= q {
        let right = node.split_off(q / 2);
        modified.push(right.id);
        return (Some(Arc::new(right)), added);
    }
    (None, added)
}

fn delete_rec<A: Clone>(slot: &mut Arc<Node<A>>, key: &Key, q: usize, modified: &mut Vec<NodeId>) {
    let node = touch(slot, modified);
    let i = node.keys.partition_point(|k| k < key);
    match &mut node.body {
        Body::Leaf(values) => {
            node.keys.remove(i);
            values.remove(i);
        }
        Body::Internal(children) => {
            delete_rec(&mut children[i], key, q, modified);
            if children[i].len() < q / 2 {
                rebalance(&mut node.keys, children, i, q, modified);
            } else {
                node.keys[i] = children[i].max_key().expect("child is non-empty").clone();
            }
        }
    }
}

/// Repairs an underflowing `children[i]` by redistributing with, or merging
/// into, its left sibling (right sibling for the first child).
fn rebalance<A: Clone>(
    keys: &mut Vec<Key>,
    children: &mut Vec<Arc<Node<A>>>,
    i: usize,
    q: usize,
    modified: &mut Vec<NodeId>,
) {
    let l = if i > 0 { i - 1 } else { i };
    let r = l + 1;
    let (left_part, right_part) = children.split_at_mut(r);
    let left = touch(&mut left_part[l], modified);
    let right = touch(&mut right_part[0], modified);
    let total = left.len() + right.len();

    if total >= 2 * (q / 2) {
        let target_left = total.div_ceil(2);
        if left.len() < target_left {
            left.take_front(right, target_left - left.len());
        } else if left.len() > target_left {
            right.take_back(left, left.len() - target_left);
        }
        keys[l] = left.max_key().expect("non-empty").clone();
        keys[r] = right.max_key().expect("non-empty").clone();
    } else {
        left.append(right);
        keys[l] = left.max_key().expect("non-empty").clone();
        keys.remove(r);
        children.remove(r);
    }
}
