//! Curve adapter: BLS12-381 scalars, the two source groups, the pairing and
//! the single hash function used throughout the crate.
//!
//! Commitments and witnesses live in G1 (48-byte compressed encoding); the
//! verification key and the batch-opening powers live in G2.

use ark_bls12_381::{Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{AffineRepr, CurveGroup, VariableBaseMSM};
use ark_ff::{PrimeField, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};

pub type Scalar = Fr;
pub type G1 = G1Affine;
pub type G2 = G2Affine;
pub type Gt = PairingOutput<Bls12_381>;

/// SHA-256 output.
pub type Digest = [u8; 32];

pub const G1_BYTES: usize = 48;
pub const G2_BYTES: usize = 96;

pub fn hash(bytes: &[u8]) -> Digest {
    Sha256::digest(bytes).into()
}

pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}

/// Hashes `bytes` and reduces the big-endian digest modulo the group order.
pub fn hash_to_scalar(bytes: &[u8]) -> Scalar {
    Scalar::from_be_bytes_mod_order(&hash(bytes))
}

pub fn digest_to_scalar(digest: &Digest) -> Scalar {
    Scalar::from_be_bytes_mod_order(digest)
}

pub fn g1_generator() -> G1 {
    G1::generator()
}

pub fn g2_generator() -> G2 {
    G2::generator()
}

/// Computes `Π bases[j]^{scalars[j]}` (additively, `Σ scalars[j]·bases[j]`).
/// An empty input yields the identity.
pub fn multi_scalar_mul<G>(bases: &[G::MulBase], scalars: &[Scalar]) -> Result<G>
where
    G: VariableBaseMSM<ScalarField = Scalar>,
{
    if bases.len() != scalars.len() {
        return Err(Error::LengthMismatch { bases: bases.len(), scalars: scalars.len() });
    }
    if bases.is_empty() {
        return Ok(G::zero());
    }
    G::msm(bases, scalars).map_err(|_| Error::LengthMismatch {
        bases: bases.len(),
        scalars: scalars.len(),
    })
}

pub fn msm_g1(bases: &[G1], scalars: &[Scalar]) -> Result<G1> {
    multi_scalar_mul::<G1Projective>(bases, scalars).map(|p| p.into_affine())
}

pub fn msm_g2(bases: &[G2], scalars: &[Scalar]) -> Result<G2> {
    multi_scalar_mul::<G2Projective>(bases, scalars).map(|p| p.into_affine())
}

pub fn pairing(a: G1, b: G2) -> Gt {
    Bls12_381::pairing(a, b)
}

/// True iff `Π e(a_i, b_i)` is the identity of the target group.
pub fn pairing_product_is_identity(pairs: &[(G1, G2)]) -> bool {
    let (left, right): (Vec<G1>, Vec<G2>) = pairs.iter().copied().unzip();
    Bls12_381::multi_pairing(left, right).is_zero()
}

pub fn encode_g1(point: &G1) -> [u8; G1_BYTES] {
    let mut out = [0u8; G1_BYTES];
    point
        .serialize_compressed(&mut out[..])
        .expect("compressed G1 encoding is 48 bytes");
    out
}

pub fn decode_g1(bytes: &[u8]) -> Result<G1> {
    if bytes.len() != G1_BYTES {
        return Err(Error::Decode(format!("G1 point must be {G1_BYTES} bytes")));
    }
    G1::deserialize_compressed(bytes).map_err(|e| Error::Decode(format!("G1 point: {e}")))
}

pub fn encode_g2(point: &G2) -> [u8; G2_BYTES] {
    let mut out = [0u8; G2_BYTES];
    point
        .serialize_compressed(&mut out[..])
        .expect("compressed G2 encoding is 96 bytes");
    out
}

pub fn decode_g2(bytes: &[u8]) -> Result<G2> {
    if bytes.len() != G2_BYTES {
        return Err(Error::Decode(format!("G2 point must be {G2_BYTES} bytes")));
    }
    G2::deserialize_compressed(bytes).map_err(|e| Error::Decode(format!("G2 point: {e}")))
}

pub fn scalar_to_be_bytes(s: &Scalar) -> [u8; 32] {
    let mut out = [0u8; 32];
    let bytes = ark_ff::BigInteger::to_bytes_be(&s.into_bigint());
    out[32 - bytes.len()..].copy_from_slice(&bytes);
    out
}
