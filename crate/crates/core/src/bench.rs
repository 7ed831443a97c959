//! Proof-size sweep: measured B+ tree proof sizes next to the size models
//! of an IAVL tree, an RSA accumulator and a q-ary prefix tree.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::authtree::{AuthTree, Op, Snapshot};
use crate::btree::Key;
use crate::error::{Error, Result};
use crate::polycommit::PublicParams;
use crate::proofs::{proof_size, Proof};

pub const DEFAULT_SIZES: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];
pub const DEFAULT_EXTRAPOLATED: [u64; 1] = [1_000_000_000];
pub const KEY_LEN: usize = 32;
pub const RSA_MODEL_BYTES: f64 = 1500.0;
pub const QARY_MODEL_BYTES: f64 = 1000.0;

/// Plotted B+ tree model: `log_200(n) * 96` bytes.
pub fn bplus_model_bytes(n: u64) -> f64 {
    (n as f64).log10() / 200f64.log10() * 96.0
}

/// Balanced binary Merkle tree: 34 bytes per level.
pub fn iavl_model_bytes(n: u64) -> f64 {
    (n as f64).log2() * 34.0
}

/// Smallest `h` with `q^h >= n`.
pub fn levels_for(q: usize, n: u64) -> usize {
    let mut h = 1;
    let mut cap = q as u128;
    while cap < n as u128 {
        cap *= q as u128;
        h += 1;
    }
    h
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: u64,
    pub levels: usize,
    pub membership_bytes: f64,
    pub nonmembership_bytes: f64,
    pub bplus_model_bytes: f64,
    pub iavl_model_bytes: f64,
    pub rsa_model_bytes: f64,
    pub qary_model_bytes: f64,
    pub extrapolated: bool,
}

impl BenchRow {
    fn new(n: u64, levels: usize, membership_bytes: f64, nonmembership_bytes: f64, extrapolated: bool) -> Self {
        Self {
            n,
            levels,
            membership_bytes,
            nonmembership_bytes,
            bplus_model_bytes: bplus_model_bytes(n),
            iavl_model_bytes: iavl_model_bytes(n),
            rsa_model_bytes: RSA_MODEL_BYTES,
            qary_model_bytes: QARY_MODEL_BYTES,
            extrapolated,
        }
    }
}

fn random_key(rng: &mut impl Rng) -> Key {
    let mut bytes = vec![0u8; KEY_LEN];
    rng.fill(&mut bytes[..]);
    Key::new(bytes).expect("short key")
}

/// Builds a tree of `n` random 32-byte keys in a single batch. Returns the
/// tree and its keys.
pub fn random_tree(params: Arc<PublicParams>, q: usize, n: u64, seed: u64) -> Result<(AuthTree, Vec<Key>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tree = AuthTree::new(params, q)?;
    let keys: Vec<Key> = (0..n).map(|_| random_key(&mut rng)).collect();
    let ops: Vec<Op> = keys.iter().enumerate().map(|(i, k)| Op::insert(k.clone(), &(i as u64).to_le_bytes())).collect();
    tree.apply_updates(&ops)?;
    Ok((tree, keys))
}

/// Mean serialized membership and non-membership proof sizes over `samples`
/// random present and absent keys.
pub fn measure(snap: &Snapshot, keys: &[Key], samples: usize, seed: u64) -> Result<BenchRow> {
    if keys.is_empty() || samples == 0 {
        return Err(Error::InvalidRange);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut member = 0usize;
    let mut absent = 0usize;
    let mut levels = 0;
    for _ in 0..samples {
        let key = &keys[rng.gen_range(0..keys.len())];
        let p = snap.prove_membership(key)?;
        levels = p.levels.len();
        member += proof_size(&Proof::Membership(p));
        let missing = loop {
            let k = random_key(&mut rng);
            if snap.get(&k).is_none() {
                break k;
            }
        };
        absent += proof_size(&Proof::NonMembership(snap.prove_nonmembership(&missing)?));
    }
    let s = samples as f64;
    Ok(BenchRow::new(keys.len() as u64, levels, member as f64 / s, absent as f64 / s, false))
}

/// Scales a measured row to `n` elements: the root level is kept and every
/// additional level costs the mean size of a non-root level.
pub fn extrapolate(measured: &BenchRow, q: usize, n: u64) -> BenchRow {
    let levels = levels_for(q, n).max(measured.levels);
    let added = (levels - measured.levels) as f64;
    let per_level = |total: f64| {
        if measured.levels > 1 {
            total / measured.levels as f64
        } else {
            total
        }
    };
    BenchRow::new(
        n,
        levels,
        measured.membership_bytes + added * per_level(measured.membership_bytes),
        measured.nonmembership_bytes + added * per_level(measured.nonmembership_bytes),
        true,
    )
}

/// Measures each size in `sizes` and appends model-only rows for
/// `extrapolated`, scaled from the largest measured tree.
pub fn run(
    params: Arc<PublicParams>,
    q: usize,
    sizes: &[u64],
    extrapolated: &[u64],
    samples: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        let (tree, keys) = random_tree(params.clone(), q, n, seed ^ n)?;
        rows.push(measure(&tree.snapshot(), &keys, samples, seed)?);
    }
    if let Some(last) = rows.iter().max_by_key(|r| r.n).cloned() {
        rows.extend(extrapolated.iter().map(|&n| extrapolate(&last, q, n)));
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| Error::Io(e.into());
    w.write_record([
        "n",
        "levels",
        "bplus_membership_bytes",
        "bplus_nonmembership_bytes",
        "bplus_model_bytes",
        "iavl_model_bytes",
        "rsa_model_bytes",
        "qary_model_bytes",
        "extrapolated",
    ])
    .map_err(to_io)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.levels.to_string(),
            format!("{:.1}", r.membership_bytes),
            format!("{:.1}", r.nonmembership_bytes),
            format!("{:.1}", r.bplus_model_bytes),
            format!("{:.1}", r.iavl_model_bytes),
            format!("{:.0}", r.rsa_model_bytes),
            format!("{:.0}", r.qary_model_bytes),
            u8::from(r.extrapolated).to_string(),
        ])
        .map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
