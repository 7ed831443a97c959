//! Binary proof encoding.
//!
//! ```text
//! proof   = version:u8 kind:u8 varint(#levels) level* tail
//! level   = type:u8 varint(#opened) element* count witness:48 [commitment:48]
//! element = varint(len) key u16le(index) digest:32
//! count   = 0x00 | 0x01 u16le(count)
//! ```
//! The commitment is present on every non-root level. Non-membership tails
//! hold `varint(depth + 1)` or `0`; range tails hold the right path,
//! length-prefixed packed bit vectors and the interior `(key, digest)` list.
//! Fixed-width integers are little-endian.

use integer_encoding::VarInt;

use super::{LevelProof, MembershipProof, NonMembershipProof, OpenedElement, Proof, RangeProof};
use crate::algebra::{Digest, G1_BYTES};
use crate::btree::{Key, NodeType, MAX_KEY_LEN};
use crate::error::{Error, Result};
use crate::polycommit::{Commitment, Witness};

pub const VERSION: u8 = 1;

const KIND_MEMBERSHIP: u8 = 1;
const KIND_NON_MEMBERSHIP: u8 = 2;
const KIND_RANGE: u8 = 3;

fn put_varint(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u64).encode_var_vec());
}

fn put_key(out: &mut Vec<u8>, key: &Key) {
    put_varint(out, key.len());
    out.extend_from_slice(key.as_bytes());
}

pub(super) fn encode_level(out: &mut Vec<u8>, level: &LevelProof) {
    out.push(level.node_type.to_byte());
    put_varint(out, level.opened.len());
    for e in &level.opened {
        put_key(out, &e.key);
        let index = u16::try_from(e.index).expect("element index fits in u16");
        out.extend_from_slice(&index.to_le_bytes());
        out.extend_from_slice(&e.digest);
    }
    match level.element_count {
        None => out.push(0),
        Some(c) => {
            out.push(1);
            let c = u16::try_from(c).expect("element count fits in u16");
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out.extend_from_slice(&level.witness.to_bytes());
    if let Some(c) = &level.commitment {
        out.extend_from_slice(&c.to_bytes());
    }
}

fn encode_levels(out: &mut Vec<u8>, levels: &[LevelProof]) {
    put_varint(out, levels.len());
    for level in levels {
        encode_level(out, level);
    }
}

pub fn encode(proof: &Proof) -> Vec<u8> {
    let mut out = vec![VERSION];
    match proof {
        Proof::Membership(p) => {
            out.push(KIND_MEMBERSHIP);
            encode_levels(&mut out, &p.levels);
        }
        Proof::NonMembership(p) => {
            out.push(KIND_NON_MEMBERSHIP);
            encode_levels(&mut out, &p.levels);
            put_varint(&mut out, p.interval_depth.map_or(0, |d| d as usize + 1));
        }
        Proof::Range(p) => {
            out.push(KIND_RANGE);
            encode_levels(&mut out, &p.left);
            encode_levels(&mut out, &p.right);
            put_varint(&mut out, p.bit_vectors.len());
            for bits in &p.bit_vectors {
                put_varint(&mut out, bits.len());
                let mut packed = vec![0u8; bits.len().div_ceil(8)];
                for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
                    packed[i / 8] |= 1 << (i % 8);
                }
                out.extend_from_slice(&packed);
            }
            put_varint(&mut out, p.interior.len());
            for (key, digest) in &p.interior {
                put_key(&mut out, key);
                out.extend_from_slice(digest);
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

fn err(msg: &str) -> Error {
    Error::Decode(format!("proof: {msg}"))
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.bytes.len() {
            return Err(err("truncated"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn byte(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn varint(&mut self) -> Result<usize> {
        let (v, n) = u64::decode_var(self.bytes).ok_or_else(|| err("bad varint"))?;
        self.bytes = &self.bytes[n..];
        usize::try_from(v).map_err(|_| err("varint out of range"))
    }

    /// A length prefix for `count` items of at least `min_item` bytes each.
    fn count(&mut self, min_item: usize) -> Result<usize> {
        let n = self.varint()?;
        if n.saturating_mul(min_item) > self.bytes.len() {
            return Err(err("length prefix exceeds input"));
        }
        Ok(n)
    }

    fn digest(&mut self) -> Result<Digest> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    fn key(&mut self) -> Result<Key> {
        let len = self.varint()?;
        if len > MAX_KEY_LEN {
            return Err(err("key too long"));
        }
        Key::new(self.take(len)?.to_vec())
    }

    fn level(&mut self) -> Result<LevelProof> {
        let node_type = NodeType::from_byte(self.byte()?).ok_or_else(|| err("bad node type"))?;
        let n = self.count(1 + 2 + 32)?;
        let mut opened = Vec::with_capacity(n);
        for _ in 0..n {
            let key = self.key()?;
            let index = u32::from(self.u16()?);
            let digest = self.digest()?;
            opened.push(OpenedElement { key, index, digest });
        }
        let element_count = match self.byte()? {
            0 => None,
            1 => Some(u32::from(self.u16()?)),
            _ => return Err(err("bad count flag")),
        };
        let witness = Witness::from_bytes(self.take(G1_BYTES)?)?;
        let commitment = match node_type {
            NodeType::Root => None,
            _ => Some(Commitment::from_bytes(self.take(G1_BYTES)?)?),
        };
        Ok(LevelProof { node_type, commitment, opened, element_count, witness })
    }

    fn levels(&mut self) -> Result<Vec<LevelProof>> {
        let n = self.count(1 + 1 + 1 + G1_BYTES)?;
        (0..n).map(|_| self.level()).collect()
    }

    fn bits(&mut self) -> Result<Vec<bool>> {
        let len = self.varint()?;
        let packed = self.take(len.div_ceil(8))?;
        if len % 8 != 0 && packed[len / 8] >> (len % 8) != 0 {
            return Err(err("nonzero bit-vector padding"));
        }
        Ok((0..len).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<Proof> {
    let mut r = Reader { bytes };
    if r.byte()? != VERSION {
        return Err(err("unsupported version"));
    }
    let proof = match r.byte()? {
        KIND_MEMBERSHIP => Proof::Membership(MembershipProof { levels: r.levels()? }),
        KIND_NON_MEMBERSHIP => {
            let levels = r.levels()?;
            let interval_depth = match r.varint()? {
                0 => None,
                d => Some(u32::try_from(d - 1).map_err(|_| err("interval depth out of range"))?),
            };
            Proof::NonMembership(NonMembershipProof { levels, interval_depth })
        }
        KIND_RANGE => {
            let left = r.levels()?;
            let right = r.levels()?;
            let n = r.count(1)?;
            let bit_vectors = (0..n).map(|_| r.bits()).collect::<Result<_>>()?;
            let n = r.count(1 + 32)?;
            let mut interior = Vec::with_capacity(n);
            for _ in 0..n {
                let key = r.key()?;
                interior.push((key, r.digest()?));
            }
            Proof::Range(RangeProof { left, right, bit_vectors, interior })
        }
        _ => return Err(err("unknown proof kind")),
    };
    if !r.bytes.is_empty() {
        return Err(err("trailing bytes"));
    }
    Ok(proof)
}
