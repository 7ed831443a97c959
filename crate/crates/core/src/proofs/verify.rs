//! Proof verification. Every check returns `false` (or `None` internally)
//! on failure; nothing here panics on malformed input.

use super::{LevelProof, MembershipProof, NonMembershipProof, OpenedElement, RangeProof};
use crate::algebra::Digest;
use crate::authtree::{commit_elements, count_point, empty_root_hash, node_hash, salted_key, value_scalar, RootRecord};
use crate::btree::{Key, NodeType};
use crate::polycommit::{Commitment, PublicParams};

fn ensure(cond: bool) -> Option<()> {
    cond.then_some(())
}

/// Checks the batch opening of one level against `commitment`.
fn opens(params: &PublicParams, commitment: &Commitment, level: &LevelProof) -> Option<()> {
    let mut prev = 0;
    let mut points = Vec::with_capacity(level.opened.len() + 1);
    for e in &level.opened {
        ensure(e.index > prev)?;
        prev = e.index;
        points.push((salted_key(&e.key, e.index as usize), value_scalar(&e.digest)));
    }
    if let Some(count) = level.element_count {
        ensure(count >= prev)?;
        points.push((count_point(), count.into()));
    }
    ensure(!points.is_empty())?;
    ensure(params.verify_batch(commitment, &points, &level.witness).unwrap_or(false))
}

fn root_matches(root: &RootRecord) -> bool {
    node_hash(&root.root_commitment, NodeType::Root) == root.root_hash
}

fn is_genesis(root: &RootRecord) -> bool {
    root.element_count == 0
        && root.root_hash == empty_root_hash()
        && root.root_commitment == Commitment::identity()
}

/// Commitments and leaf flags for a root-to-leaf path of `h` levels whose
/// first level is the root. Non-root levels must carry their commitment.
fn path_shape(root: &RootRecord, levels: &[LevelProof], depth0: usize, h: usize) -> Option<Vec<(Commitment, bool)>> {
    let root_is_leaf = levels
        .first()
        .filter(|_| depth0 == 0)
        .and_then(|l| l.element_count)
        .is_some_and(|c| u64::from(c) == root.element_count);
    levels
        .iter()
        .enumerate()
        .map(|(i, level)| {
            let d = depth0 + i;
            let is_leaf = if d == 0 { root_is_leaf } else { d == h - 1 };
            if d == 0 {
                ensure(level.node_type == NodeType::Root && level.commitment.is_none())?;
                ensure(level.element_count.is_some())?;
                ensure(h == 1 || !root_is_leaf)?;
                Some((root.root_commitment, is_leaf))
            } else {
                let expected = if is_leaf { NodeType::Leaf } else { NodeType::Internal };
                ensure(level.node_type == expected)?;
                Some((level.commitment?, is_leaf))
            }
        })
        .collect()
}

pub fn verify_membership(
    params: &PublicParams,
    root: &RootRecord,
    key: &Key,
    value_digest: &Digest,
    proof: &MembershipProof,
) -> bool {
    membership(params, root, key, value_digest, proof).is_some()
}

fn membership(
    params: &PublicParams,
    root: &RootRecord,
    key: &Key,
    value_digest: &Digest,
    proof: &MembershipProof,
) -> Option<()> {
    let levels = &proof.levels;
    ensure(!levels.is_empty() && root.element_count > 0 && root_matches(root))?;
    let h = levels.len();
    let shape = path_shape(root, levels, 0, h)?;
    ensure(shape[h - 1].1)?;
    for (d, (level, (commitment, _))) in levels.iter().zip(&shape).enumerate() {
        ensure(level.opened.len() == 1)?;
        opens(params, commitment, level)?;
        let e = &level.opened[0];
        if d + 1 < h {
            ensure(e.key >= *key)?;
            ensure(e.digest == node_hash(&shape[d + 1].0, levels[d + 1].node_type))?;
        } else {
            ensure(e.key == *key && e.digest == *value_digest)?;
        }
    }
    Some(())
}

pub fn verify_nonmembership(params: &PublicParams, root: &RootRecord, key: &Key, proof: &NonMembershipProof) -> bool {
    let window = Window { lo: key, hi: key, left: &proof.levels, right: &[], bits: None, interior: &[] };
    window.verify(params, root).is_some_and(|depth| depth == proof.interval_depth.map(|d| d as usize))
}

pub fn verify_range(params: &PublicParams, root: &RootRecord, lo: &Key, hi: &Key, proof: &RangeProof) -> bool {
    if lo > hi {
        return false;
    }
    let window = Window {
        lo,
        hi,
        left: &proof.left,
        right: &proof.right,
        bits: Some(&proof.bit_vectors),
        interior: &proof.interior,
    };
    window.verify(params, root).is_some()
}

/// How the opened elements of one boundary node split up.
struct Run<'a> {
    left_guard: bool,
    touched: &'a [OpenedElement],
    right_guard: bool,
    /// 1-based index where the touched run starts (or would start).
    start: u32,
    last_index: u32,
    count: Option<u32>,
}

impl Run<'_> {
    fn ends_at_count(&self) -> bool {
        self.count == Some(self.last_index)
    }

    /// Nothing right of this node's run can intersect `[.., hi]`.
    fn closed_right(&self, hi: &Key, is_leaf: bool) -> bool {
        let reaches = self.touched.last().is_some_and(|e| if is_leaf { e.key == *hi } else { e.key >= *hi });
        reaches || self.right_guard || self.ends_at_count()
    }
}

fn classify<'a>(level: &'a LevelProof, lo: &Key, hi: &Key, is_leaf: bool) -> Option<Run<'a>> {
    let opened = &level.opened;
    ensure(!opened.is_empty())?;
    for w in opened.windows(2) {
        ensure(w[1].index == w[0].index + 1 && w[0].key < w[1].key)?;
    }
    let left_guard = opened[0].key < *lo;
    let from = usize::from(left_guard);
    let right_guard = is_leaf && opened.len() > from && opened[opened.len() - 1].key > *hi;
    let to = opened.len() - usize::from(right_guard);
    let touched = &opened[from..to];
    if is_leaf {
        ensure(touched.iter().all(|e| *lo <= e.key && e.key <= *hi))?;
    } else if let Some((_, init)) = touched.split_last() {
        // an element whose key reaches hi is the last one that can intersect
        ensure(init.iter().all(|e| e.key < *hi))?;
    }
    let start = if left_guard { opened[0].index + 1 } else { opened[0].index };
    Some(Run {
        left_guard,
        touched,
        right_guard,
        start,
        last_index: opened[opened.len() - 1].index,
        count: level.element_count,
    })
}

/// Hash and (for rebuilt nodes) largest key of a node at some depth.
struct NodeInfo {
    hash: Digest,
    max: Option<Key>,
}

struct Window<'a> {
    lo: &'a Key,
    hi: &'a Key,
    left: &'a [LevelProof],
    right: &'a [LevelProof],
    bits: Option<&'a [Vec<bool>]>,
    interior: &'a [(Key, Digest)],
}

impl Window<'_> {
    /// Returns the depth of the left-neighbour opening on success.
    fn verify(&self, params: &PublicParams, root: &RootRecord) -> Option<Option<usize>> {
        if root.element_count == 0 {
            ensure(is_genesis(root) && self.left.is_empty() && self.right.is_empty())?;
            ensure(self.interior.is_empty() && self.bits.is_none_or(|b| b.is_empty()))?;
            return Some(None);
        }
        ensure(!self.left.is_empty() && root_matches(root))?;
        let h = self.left.len();
        ensure(self.right.len() < h)?;
        let split = h - self.right.len();

        let left_shape = path_shape(root, self.left, 0, h)?;
        let right_shape = path_shape(root, self.right, split, h)?;
        for (level, (c, _)) in self.left.iter().zip(&left_shape).chain(self.right.iter().zip(&right_shape)) {
            opens(params, c, level)?;
        }

        let left_runs: Vec<Run> = self
            .left
            .iter()
            .zip(&left_shape)
            .map(|(l, (_, leaf))| classify(l, self.lo, self.hi, *leaf))
            .collect::<Option<_>>()?;
        let right_runs: Vec<Run> = self
            .right
            .iter()
            .zip(&right_shape)
            .map(|(l, (_, leaf))| classify(l, self.lo, self.hi, *leaf))
            .collect::<Option<_>>()?;

        // left side: below the deepest left neighbour every leftmost run
        // starts at the node's first element
        let interval = (0..h).rev().find(|&d| left_runs[d].left_guard);
        for (d, run) in left_runs.iter().enumerate() {
            if interval.is_none_or(|i| d > i) {
                ensure(run.start == 1)?;
            }
        }
        for run in &right_runs {
            ensure(!run.left_guard && run.start == 1)?;
        }

        // right side
        for d in 0..h {
            let is_leaf = left_shape[d].1;
            let l = &left_runs[d];
            if d >= split {
                ensure(!l.touched.is_empty() && !l.right_guard && l.ends_at_count())?;
                ensure(right_runs[d - split].closed_right(self.hi, is_leaf))?;
            } else {
                ensure(l.closed_right(self.hi, is_leaf))?;
            }
            if !is_leaf {
                let descends = if d + 1 == h {
                    // an internal node can end the proof only as a root
                    // whose elements all lie below the interval
                    d == 0 && l.touched.is_empty()
                } else if d + 1 < split {
                    l.touched.len() == 1
                } else if d + 1 == split {
                    l.touched.len() >= 2
                } else {
                    !l.touched.is_empty() && !right_runs[d - split].touched.is_empty()
                };
                ensure(descends)?;
            }
        }

        // rebuild bottom-up, linking each touched element to the node below
        let mut below: Vec<NodeInfo> = Vec::new();
        for d in (0..h).rev() {
            let (left_c, is_leaf) = left_shape[d];
            let l = &left_runs[d];
            let r = (d >= split).then(|| &right_runs[d - split]);
            let node_type = if is_leaf { NodeType::Leaf } else { NodeType::Internal };

            // touched elements of this level as (key, digest), in order
            let items: Vec<(Key, Digest)> = if is_leaf {
                ensure(d == h - 1)?;
                let outer = l.touched.len() + r.map_or(0, |r| r.touched.len());
                ensure(if r.is_some() { self.interior.len() >= outer } else { self.interior.len() == outer })?;
                ensure(self.interior.windows(2).all(|w| w[0].0 < w[1].0))?;
                ensure(self.interior.iter().all(|(k, _)| self.lo <= k && k <= self.hi))?;
                self.interior.to_vec()
            } else {
                let outer = l.touched.len() + r.map_or(0, |r| r.touched.len());
                ensure(if r.is_some() { below.len() >= outer } else { below.len() == outer })?;
                let mid = l.touched.len()..below.len() - r.map_or(0, |r| r.touched.len());
                let mut items = Vec::with_capacity(below.len());
                items.extend(l.touched.iter().map(|e| (e.key.clone(), e.digest)));
                for node in &below[mid] {
                    items.push((node.max.clone()?, node.hash));
                }
                if let Some(r) = r {
                    items.extend(r.touched.iter().map(|e| (e.key.clone(), e.digest)));
                }
                for ((key, digest), node) in items.iter().zip(&below) {
                    ensure(*digest == node.hash && node.max.as_ref().is_none_or(|m| m == key))?;
                }
                items
            };

            // the boundary runs must match the ends of the item list
            let (lt, rt) = (l.touched.len(), r.map_or(0, |r| r.touched.len()));
            let outer_match = |run: &[OpenedElement], slice: &[(Key, Digest)]| {
                run.iter().zip(slice).all(|(e, (k, dg))| e.key == *k && e.digest == *dg)
            };
            ensure(outer_match(l.touched, &items[..lt]))?;
            if let Some(r) = r {
                ensure(outer_match(r.touched, &items[items.len() - rt..]))?;
            }

            let middle = &items[lt..items.len() - rt];
            let groups = match self.bits {
                Some(bits) => {
                    ensure(bits.len() == h)?;
                    split_by_bits(&bits[h - 1 - d], lt, middle.len(), rt, r.is_some())?
                }
                None => {
                    ensure(middle.is_empty() && r.is_none())?;
                    Vec::new()
                }
            };

            let mut level_nodes = vec![NodeInfo { hash: node_hash(&left_c, self.left[d].node_type), max: None }];
            let mut offset = 0;
            for len in groups {
                let group = &middle[offset..offset + len];
                offset += len;
                ensure(len <= params.degree_bound())?;
                let (keys, digests): (Vec<Key>, Vec<Digest>) = group.iter().cloned().unzip();
                let auth = commit_elements(params, &keys, &digests, node_type).ok()?;
                level_nodes.push(NodeInfo { hash: auth.node_hash, max: keys.last().cloned() });
            }
            if let Some(r_level) = (d >= split).then(|| &self.right[d - split]) {
                let (c, _) = right_shape[d - split];
                level_nodes.push(NodeInfo { hash: node_hash(&c, r_level.node_type), max: None });
            }
            below = level_nodes;
        }
        ensure(below.len() == 1 && below[0].hash == root.root_hash)?;
        Some(interval)
    }
}

/// Checks a level's bit vector against the boundary run lengths and returns
/// the sizes of the middle groups it delimits.
fn split_by_bits(bits: &[bool], lt: usize, mid: usize, rt: usize, two_sided: bool) -> Option<Vec<usize>> {
    ensure(bits.len() == lt + mid + rt)?;
    let run_ok = |run: &[bool]| match run.split_last() {
        None => true,
        Some((last, init)) => *last && init.iter().all(|b| !b),
    };
    if !two_sided {
        ensure(mid == 0 && run_ok(bits))?;
        return Some(Vec::new());
    }
    ensure(run_ok(&bits[..lt]) && run_ok(&bits[lt + mid..]))?;
    let middle = &bits[lt..lt + mid];
    ensure(middle.last().is_none_or(|b| *b))?;
    let mut groups = Vec::new();
    let mut len = 0;
    for b in middle {
        len += 1;
        if *b {
            groups.push(len);
            len = 0;
        }
    }
    Some(groups)
}
