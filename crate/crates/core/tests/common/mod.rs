#![allow(dead_code)]

use std::sync::Arc;

use ark_ec::{AffineRepr, CurveGroup};
use kzg_bptree::algebra::{g1_generator, hash, Digest};
use kzg_bptree::authtree::{AuthTree, Op, RootRecord};
use kzg_bptree::btree::Key;
use kzg_bptree::polycommit::{PublicParams, Witness};
use kzg_bptree::proofs::{verify_membership, verify_nonmembership, verify_range, Proof};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn params(t: usize) -> Arc<PublicParams> {
    Arc::new(PublicParams::test_mode(t, 42).unwrap())
}

pub fn value_of(k: u64) -> Vec<u8> {
    format!("value-{k}").into_bytes()
}

pub fn digest_of(k: u64) -> Digest {
    hash(&value_of(k))
}

pub fn build(q: usize, keys: impl IntoIterator<Item = u64>) -> AuthTree {
    let mut tree = AuthTree::new(params(q), q).unwrap();
    let ops: Vec<Op> = keys.into_iter().map(|k| Op::insert(Key::from(k), &value_of(k))).collect();
    tree.apply_updates(&ops).unwrap();
    tree
}

#[derive(Clone, Debug)]
pub enum Query {
    Member(Key, Digest),
    Absent(Key),
    Range(Key, Key),
}

pub fn verify(params: &PublicParams, root: &RootRecord, query: &Query, proof: &Proof) -> bool {
    match (query, proof) {
        (Query::Member(k, d), Proof::Membership(p)) => verify_membership(params, root, k, d, p),
        (Query::Absent(k), Proof::NonMembership(p)) => verify_nonmembership(params, root, k, p),
        (Query::Range(lo, hi), Proof::Range(p)) => verify_range(params, root, lo, hi, p),
        _ => false,
    }
}

fn flip(d: &mut Digest, rng: &mut impl Rng) {
    let bit = rng.gen_range(0..256);
    d[bit / 8] ^= 1 << (bit % 8);
}

fn bump_key(key: &Key, rng: &mut impl Rng) -> Key {
    let mut bytes = key.as_bytes().to_vec();
    if bytes.is_empty() || rng.gen_bool(0.3) {
        bytes.push(rng.gen());
    } else {
        let i = rng.gen_range(0..bytes.len());
        bytes[i] ^= 1 << rng.gen_range(0..8);
    }
    Key::new(bytes).unwrap()
}

fn shift_witness(w: &mut Witness) {
    w.0 = (w.0.into_group() + g1_generator()).into_affine();
}

/// Changes exactly one field of `proof`. Returns `None` if the proof has no
/// field of the randomly chosen kind.
pub fn tamper(proof: &Proof, rng: &mut impl Rng) -> Option<Proof> {
    let mut p = proof.clone();
    let levels: Vec<&mut kzg_bptree::proofs::LevelProof> = match &mut p {
        Proof::Membership(m) => m.levels.iter_mut().collect(),
        Proof::NonMembership(n) => n.levels.iter_mut().collect(),
        Proof::Range(r) => r.left.iter_mut().chain(r.right.iter_mut()).collect(),
    };
    let n_levels = levels.len();
    let choice = rng.gen_range(0..12);
    if choice < 8 {
        if n_levels == 0 {
            return None;
        }
        let level = levels.into_iter().nth(rng.gen_range(0..n_levels)).unwrap();
        let n_open = level.opened.len();
        match choice {
            0 if n_open > 0 => flip(&mut level.opened[rng.gen_range(0..n_open)].digest, rng),
            1 if n_open > 0 => {
                let e = &mut level.opened[rng.gen_range(0..n_open)];
                e.key = bump_key(&e.key, rng);
            }
            2 if n_open > 0 => {
                let e = &mut level.opened[rng.gen_range(0..n_open)];
                e.index = if e.index > 1 && rng.gen_bool(0.5) { e.index - 1 } else { e.index + 1 };
            }
            3 if n_open > 0 => {
                level.opened.remove(rng.gen_range(0..n_open));
            }
            4 => shift_witness(&mut level.witness),
            5 => {
                let c = level.commitment.as_mut()?;
                c.0 = (c.0.into_group() + g1_generator()).into_affine();
            }
            6 => {
                level.element_count = match level.element_count {
                    Some(c) if c > 0 && rng.gen_bool(0.5) => Some(c - 1),
                    Some(c) => Some(c + 1),
                    None => Some(level.opened.last().map_or(1, |e| e.index) + 7),
                }
            }
            7 => level.node_type = match level.node_type {
                kzg_bptree::btree::NodeType::Leaf => kzg_bptree::btree::NodeType::Internal,
                _ => kzg_bptree::btree::NodeType::Leaf,
            },
            _ => return None,
        }
        return Some(p);
    }
    match (&mut p, choice) {
        (Proof::Membership(m), 8) if m.levels.len() > 1 => {
            let i = rng.gen_range(0..m.levels.len() - 1);
            let w = m.levels[i].witness;
            m.levels[i].witness = m.levels[i + 1].witness;
            m.levels[i + 1].witness = w;
        }
        (Proof::Membership(m), 9) if !m.levels.is_empty() => {
            m.levels.pop();
        }
        (Proof::NonMembership(n), 8) => {
            n.interval_depth = match n.interval_depth {
                Some(0) => None,
                Some(d) => Some(d - 1),
                None => Some(0),
            }
        }
        (Proof::NonMembership(n), 9) if !n.levels.is_empty() => {
            n.levels.pop();
        }
        (Proof::Range(r), 8) if !r.interior.is_empty() => {
            r.interior.remove(rng.gen_range(0..r.interior.len()));
        }
        (Proof::Range(r), 9) if r.interior.len() > 1 => {
            let i = rng.gen_range(0..r.interior.len() - 1);
            r.interior.swap(i, i + 1);
        }
        (Proof::Range(r), 10) if !r.interior.is_empty() => {
            let i = rng.gen_range(0..r.interior.len());
            flip(&mut r.interior[i].1, rng);
        }
        (Proof::Range(r), 11) => {
            let nonempty: Vec<usize> = (0..r.bit_vectors.len()).filter(|j| !r.bit_vectors[*j].is_empty()).collect();
            let j = *nonempty.choose(rng)?;
            let bits = &mut r.bit_vectors[j];
            let i = rng.gen_range(0..bits.len());
            bits[i] = !bits[i];
        }
        _ => return None,
    }
    Some(p)
}

/// Brute-force ordered map: a sorted association list with linear scans.
pub struct SortedList<V> {
    items: Vec<(Key, V)>,
}

impl<V> Default for SortedList<V> {
    fn default() -> Self {
        Self { items: Vec::new() }
    }
}

impl<V: Clone> SortedList<V> {
    pub fn insert(&mut self, key: Key, value: V) {
        for item in self.items.iter_mut() {
            if item.0 == key {
                item.1 = value;
                return;
            }
        }
        let at = self.items.iter().take_while(|(k, _)| *k < key).count();
        self.items.insert(at, (key, value));
    }

    pub fn delete(&mut self, key: &Key) -> bool {
        let before = self.items.len();
        self.items.retain(|(k, _)| k != key);
        before != self.items.len()
    }

    pub fn get(&self, key: &Key) -> Option<&V> {
        self.items.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn range(&self, lo: &Key, hi: &Key) -> Vec<(Key, V)> {
        self.items.iter().filter(|(k, _)| lo <= k && k <= hi).cloned().collect()
    }

    pub fn items(&self) -> &[(Key, V)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }
}
