use super::{LevelProof, MembershipProof, NonMembershipProof, OpenedElement, RangeProof};
use crate::authtree::{count_point, element_digests, salted_key, AuthNode, Snapshot};
use crate::btree::Key;
use crate::error::{Error, Result};
use crate::polycommit::PublicParams;

/// Opens the elements at 0-based `indices` of `node`, plus its element
/// count when `with_count` is set, under one batch witness.
fn open(
    params: &PublicParams,
    node: &AuthNode,
    is_root: bool,
    indices: &[usize],
    with_count: bool,
) -> Result<LevelProof> {
    let auth = node.annotation().expect("published nodes are committed");
    let digests = element_digests(node);
    let mut points = Vec::with_capacity(indices.len() + 1);
    let mut opened = Vec::with_capacity(indices.len());
    for &i in indices {
        let key = &node.keys()[i];
        points.push(salted_key(key, i + 1));
        opened.push(OpenedElement { key: key.clone(), index: (i + 1) as u32, digest: digests[i] });
    }
    if with_count {
        points.push(count_point());
    }
    let witness = params.create_batch_witness(&auth.poly, &points)?;
    Ok(LevelProof {
        node_type: node.node_type(is_root),
        commitment: (!is_root).then_some(auth.commitment),
        opened,
        element_count: with_count.then_some(node.len() as u32),
        witness,
    })
}

/// A visited node and the 0-based run `[start, end)` of its elements whose
/// subtrees (or keys, in a leaf) intersect the queried interval.
struct Visit<'a> {
    node: &'a AuthNode,
    start: usize,
    end: usize,
}

fn collect<'a>(node: &'a AuthNode, depth: usize, lo: &Key, hi: &Key, levels: &mut Vec<Vec<Visit<'a>>>) {
    let keys = node.keys();
    let start = node.lower_bound(lo);
    let end = match node.children() {
        None => start + keys[start..].partition_point(|k| k <= hi),
        Some(_) => {
            let mut end = start;
            while end < keys.len() && (end == start || keys[end - 1] < *hi) {
                end += 1;
            }
            end
        }
    };
    if levels.len() == depth {
        levels.push(Vec::new());
    }
    levels[depth].push(Visit { node, start, end });
    if let Some(children) = node.children() {
        for child in &children[start..end] {
            collect(child, depth + 1, lo, hi, levels);
        }
    }
}

/// Elements that close the run of the rightmost node on its right: none if
/// the last touched key already reaches `hi`, otherwise the next leaf
/// element or the element count.
fn right_closure(v: &Visit, hi: &Key, indices: &mut Vec<usize>) -> bool {
    let keys = v.node.keys();
    let reaches = v.end > v.start
        && if v.node.is_leaf() { keys[v.end - 1] == *hi } else { keys[v.end - 1] >= *hi };
    if reaches {
        false
    } else if v.node.is_leaf() && v.end < keys.len() {
        indices.push(v.end);
        false
    } else {
        true
    }
}

struct Window {
    left: Vec<LevelProof>,
    right: Vec<LevelProof>,
    bit_vectors: Vec<Vec<bool>>,
    interior: Vec<(Key, crate::algebra::Digest)>,
    interval_depth: Option<u32>,
}

fn prove_window(snap: &Snapshot, lo: &Key, hi: &Key) -> Result<Window> {
    let mut w = Window {
        left: Vec::new(),
        right: Vec::new(),
        bit_vectors: Vec::new(),
        interior: Vec::new(),
        interval_depth: None,
    };
    if snap.is_empty() {
        return Ok(w);
    }
    let params = snap.params();
    let mut levels = Vec::new();
    collect(snap.root(), 0, lo, hi, &mut levels);
    let h = levels.len();
    let interval = (0..h).rev().find(|&d| levels[d][0].start > 0);
    w.interval_depth = interval.map(|d| d as u32);

    for (d, visits) in levels.iter().enumerate() {
        let is_root = d == 0;
        let first = &visits[0];
        let mut indices = Vec::new();
        if interval == Some(d) {
            indices.push(first.start - 1);
        }
        indices.extend(first.start..first.end);
        if visits.len() == 1 {
            let mut with_count = right_closure(first, hi, &mut indices);
            with_count |= is_root;
            w.left.push(open(params, first.node, is_root, &indices, with_count)?);
        } else {
            w.left.push(open(params, first.node, is_root, &indices, true)?);
            let last = visits.last().unwrap();
            let mut indices: Vec<usize> = (0..last.end).collect();
            let with_count = right_closure(last, hi, &mut indices);
            w.right.push(open(params, last.node, false, &indices, with_count)?);
        }
    }

    w.bit_vectors = levels
        .iter()
        .rev()
        .map(|visits| {
            visits
                .iter()
                .flat_map(|v| (v.start..v.end).map(move |i| i + 1 == v.end))
                .collect()
        })
        .collect();
    if let Some(leaves) = levels.last().filter(|l| l[0].node.is_leaf()) {
        for v in leaves {
            let digests = element_digests(v.node);
            w.interior.extend((v.start..v.end).map(|i| (v.node.keys()[i].clone(), digests[i])));
        }
    }
    Ok(w)
}

impl Snapshot {
    pub fn prove_membership(&self, key: &Key) -> Result<MembershipProof> {
        if self.is_empty() {
            return Err(Error::KeyAbsent);
        }
        let mut levels = Vec::new();
        let mut node = self.root().as_ref();
        let mut is_root = true;
        loop {
            let i = node.lower_bound(key);
            if i == node.len() || (node.is_leaf() && node.keys()[i] != *key) {
                return Err(Error::KeyAbsent);
            }
            levels.push(open(self.params(), node, is_root, &[i], is_root)?);
            match node.children() {
                Some(children) => node = &children[i],
                None => return Ok(MembershipProof { levels }),
            }
            is_root = false;
        }
    }

    pub fn prove_nonmembership(&self, key: &Key) -> Result<NonMembershipProof> {
        if self.get(key).is_some() {
            return Err(Error::KeyPresent);
        }
        let w = prove_window(self, key, key)?;
        debug_assert!(w.right.is_empty() && w.interior.is_empty());
        Ok(NonMembershipProof { levels: w.left, interval_depth: w.interval_depth })
    }

    pub fn prove_range(&self, lo: &Key, hi: &Key) -> Result<RangeProof> {
        if lo > hi {
            return Err(Error::InvalidRange);
        }
        let w = prove_window(self, lo, hi)?;
        Ok(RangeProof { left: w.left, right: w.right, bit_vectors: w.bit_vectors, interior: w.interior })
    }
}
