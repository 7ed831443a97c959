//! Constant-size polynomial commitments over a pairing (Kate-Zaverucha-
//! Goldberg style), with single and batch evaluation witnesses.
//!
//! The public parameters carry `g^{α^j}` in G1 for `j = 0..=t` and `h^{α^j}`
//! in G2 for the same range. `h` and `h^α` form the verification key; the
//! higher G2 powers let a verifier commit to the vanishing polynomial of a
//! batch of opened points.

mod poly;

use std::fs;
use std::path::{Path, PathBuf};

use ark_ec::{AffineRepr, CurveGroup};
use ark_ff::{UniformRand, Zero};

use crate::algebra::{
    decode_g1, decode_g2, encode_g1, encode_g2, g1_generator, g2_generator, hash_to_scalar,
    msm_g1, msm_g2, pairing_product_is_identity, Scalar, G1, G1_BYTES, G2, G2_BYTES,
};
use crate::error::{Error, Result};

pub use poly::Polynomial;

const PARAMS_MAGIC: &[u8; 8] = b"KBPTPRM1";

/// How `setup` obtains the trapdoor powers.
#[derive(Clone, Debug)]
pub enum SetupMode {
    /// Derive α from the seed and keep it. Only for tests and local runs:
    /// anyone holding the seed can forge openings.
    Test { seed: u64 },
    /// Load and validate a parameter file produced elsewhere.
    External(PathBuf),
}

#[derive(Clone, Debug)]
pub struct PublicParams {
    degree_bound: usize,
    g1_powers: Vec<G1>,
    g2_powers: Vec<G2>,
    trapdoor: Option<Scalar>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Commitment(pub G1);

/// A single group element attesting to one or many evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Witness(pub G1);

impl Commitment {
    pub fn identity() -> Self {
        Self(G1::zero())
    }

    pub fn to_bytes(&self) -> [u8; G1_BYTES] {
        encode_g1(&self.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        decode_g1(bytes).map(Self)
    }
}

impl Witness {
    pub fn to_bytes(&self) -> [u8; G1_BYTES] {
        encode_g1(&self.0)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        decode_g1(bytes).map(Self)
    }
}

fn powers_of(alpha: Scalar, count: usize) -> Vec<Scalar> {
    std::iter::successors(Some(Scalar::from(1u64)), |p| Some(*p * alpha)).take(count).collect()
}

impl PublicParams {
    pub fn setup(t: usize, mode: SetupMode) -> Result<Self> {
        match mode {
            SetupMode::Test { seed } => Self::test_mode(t, seed),
            SetupMode::External(path) => {
                let params = Self::read_file(&path)?;
                if params.degree_bound < t {
                    return Err(Error::MalformedParams(format!(
                        "file supports degree {} but {t} was requested",
                        params.degree_bound
                    )));
                }
                Ok(params)
            }
        }
    }

    /// Deterministic parameters with α = hash_to_scalar(seed as 8 LE bytes).
    pub fn test_mode(t: usize, seed: u64) -> Result<Self> {
        if t == 0 {
            return Err(Error::ZeroDegreeBound);
        }
        let alpha = hash_to_scalar(&seed.to_le_bytes());
        if alpha.is_zero() {
            return Err(Error::ZeroTrapdoor(seed));
        }
        let exps = powers_of(alpha, t + 1);
        let g = g1_generator().into_group();
        let h = g2_generator().into_group();
        let g1_powers = <G1 as AffineRepr>::Group::normalize_batch(&exps.iter().map(|e| g * e).collect::<Vec<_>>());
        let g2_powers = <G2 as AffineRepr>::Group::normalize_batch(&exps.iter().map(|e| h * e).collect::<Vec<_>>());
        Ok(Self { degree_bound: t, g1_powers, g2_powers, trapdoor: Some(alpha) })
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn g1_powers(&self) -> &[G1] {
        &self.g1_powers
    }

    pub fn g2_powers(&self) -> &[G2] {
        &self.g2_powers
    }

    /// `(h, h^α)`.
    pub fn verification_key(&self) -> (G2, G2) {
        (self.g2_powers[0], self.g2_powers[1])
    }

    /// Known only for test-mode parameters.
    pub fn trapdoor(&self) -> Option<Scalar> {
        self.trapdoor
    }

    /// Largest number of points a single batch witness can be verified for.
    pub fn max_batch(&self) -> usize {
        self.g2_powers.len() - 1
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            20 + self.g1_powers.len() * G1_BYTES + self.g2_powers.len() * G2_BYTES,
        );
        out.extend_from_slice(PARAMS_MAGIC);
        out.extend_from_slice(&(self.degree_bound as u32).to_le_bytes());
        out.extend_from_slice(&(self.g1_powers.len() as u32).to_le_bytes());
        for p in &self.g1_powers {
            out.extend_from_slice(&encode_g1(p));
        }
        out.extend_from_slice(&(self.g2_powers.len() as u32).to_le_bytes());
        for p in &self.g2_powers {
            out.extend_from_slice(&encode_g2(p));
        }
        out
    }

    /// Parses and validates a parameter file. The trapdoor is never stored,
    /// so the result is always external-mode parameters.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let malformed = |m: &str| Error::MalformedParams(m.to_string());
        let mut rest = bytes
            .strip_prefix(PARAMS_MAGIC.as_slice())
            .ok_or_else(|| malformed("bad magic"))?;
        let mut take = |n: usize| -> Result<&[u8]> {
            if rest.len() < n {
                return Err(malformed("truncated"));
            }
            let (head, tail) = rest.split_at(n);
            rest = tail;
            Ok(head)
        };
        let read_u32 =
            |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;

        let t = read_u32(take(4)?);
        if t == 0 {
            return Err(Error::ZeroDegreeBound);
        }
        let n1 = read_u32(take(4)?);
        if n1 != t + 1 {
            return Err(malformed("commitment-group power count must be t + 1"));
        }
        let g1_powers = (0..n1)
            .map(|_| take(G1_BYTES).and_then(decode_g1))
            .collect::<Result<Vec<_>>>()?;
        let n2 = read_u32(take(4)?);
        if n2 < 2 || n2 > t + 1 {
            return Err(malformed("verification-group power count must be in 2..=t+1"));
        }
        let g2_powers = (0..n2)
            .map(|_| take(G2_BYTES).and_then(decode_g2))
            .collect::<Result<Vec<_>>>()?;
        if !rest.is_empty() {
            return Err(malformed("trailing bytes"));
        }
        if g1_powers[0].is_zero() || g2_powers[0].is_zero() {
            return Err(Error::InconsistentParams(0));
        }
        let params = Self { degree_bound: t, g1_powers, g2_powers, trapdoor: None };
        params.check_consistency()?;
        Ok(params)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Checks `e(P_j, h) = e(P_{j-1}, h^α)` for every G1 power and
    /// `e(g, H_j) = e(g^α, H_{j-1})` for every G2 power.
    ///
    /// Runs one randomized aggregate check first and falls back to the
    /// per-index loop only to locate a failure.
    pub fn check_consistency(&self) -> Result<()> {
        let mut rng = rand::thread_rng();
        let (g, g_alpha) = (self.g1_powers[0], self.g1_powers[1]);
        let (h, h_alpha) = (self.g2_powers[0], self.g2_powers[1]);

        let r1: Vec<Scalar> = (1..self.g1_powers.len()).map(|_| Scalar::rand(&mut rng)).collect();
        let upper = msm_g1(&self.g1_powers[1..], &r1)?;
        let lower = msm_g1(&self.g1_powers[..self.g1_powers.len() - 1], &r1)?;
        let r2: Vec<Scalar> = (1..self.g2_powers.len()).map(|_| Scalar::rand(&mut rng)).collect();
        let upper2 = msm_g2(&self.g2_powers[1..], &r2)?;
        let lower2 = msm_g2(&self.g2_powers[..self.g2_powers.len() - 1], &r2)?;
        let aggregate_ok = pairing_product_is_identity(&[(upper, h), (-lower, h_alpha)])
            && pairing_product_is_identity(&[(g, upper2), (-g_alpha, lower2)]);
        if aggregate_ok {
            return Ok(());
        }

        for j in 1..self.g1_powers.len() {
            if !pairing_product_is_identity(&[
                (self.g1_powers[j], h),
                (-self.g1_powers[j - 1], h_alpha),
            ]) {
                return Err(Error::InconsistentParams(j));
            }
        }
        for j in 1..self.g2_powers.len() {
            if !pairing_product_is_identity(&[
                (g, self.g2_powers[j]),
                (-g_alpha, self.g2_powers[j - 1]),
            ]) {
                return Err(Error::InconsistentParams(j));
            }
        }
        Err(Error::InconsistentParams(0))
    }

    fn check_degree(&self, poly: &Polynomial) -> Result<()> {
        match poly.degree() {
            Some(d) if d > self.degree_bound => {
                Err(Error::DegreeBound { degree: d, bound: self.degree_bound })
            }
            _ => Ok(()),
        }
    }

    fn commit_unchecked(&self, poly: &Polynomial) -> Result<G1> {
        let coeffs = poly.coeffs();
        msm_g1(&self.g1_powers[..coeffs.len()], coeffs)
    }

    /// `C = Π (g^{α^j})^{φ_j}`.
    pub fn commit(&self, poly: &Polynomial) -> Result<Commitment> {
        self.check_degree(poly)?;
        self.commit_unchecked(poly).map(Commitment)
    }

    pub fn verify_poly(&self, c: &Commitment, poly: &Polynomial) -> bool {
        self.commit(poly).is_ok_and(|recomputed| recomputed == *c)
    }

    /// Returns `(φ(i), w)` with `w = g^{ψ(α)}`, `ψ(x) = (φ(x) − φ(i)) / (x − i)`.
    pub fn create_witness(&self, poly: &Polynomial, i: &Scalar) -> Result<(Scalar, Witness)> {
        self.check_degree(poly)?;
        let value = poly.evaluate(i);
        let (quotient, remainder) = poly.divide_by_linear(i);
        assert_eq!(remainder, value, "synthetic division remainder must equal φ(i)");
        Ok((value, Witness(self.commit_unchecked(&quotient)?)))
    }

    /// Checks `e(C, h) = e(w, h^α / h^i) · e(g, h)^{φ(i)}`.
    pub fn verify_eval(&self, c: &Commitment, i: &Scalar, value: &Scalar, w: &Witness) -> bool {
        let (h, h_alpha) = self.verification_key();
        let g = self.g1_powers[0];
        let shifted = (h_alpha.into_group() - h * i).into_affine();
        let lhs = (c.0.into_group() - g * value).into_affine();
        pairing_product_is_identity(&[(lhs, h), (-w.0, shifted)])
    }

    /// Witness for all of `points` at once: commits to
    /// `ψ(x) = (φ(x) − r(x)) / Π (x − m)` where `r` interpolates φ over the points.
    pub fn create_batch_witness(&self, poly: &Polynomial, points: &[Scalar]) -> Result<Witness> {
        self.check_degree(poly)?;
        let opened: Vec<(Scalar, Scalar)> = points.iter().map(|x| (*x, poly.evaluate(x))).collect();
        let remainder_poly = Polynomial::interpolate(&opened)?;
        let vanishing = Polynomial::vanishing(points);
        let (quotient, rest) = (poly - &remainder_poly).div_rem(&vanishing);
        assert!(rest.is_zero(), "batch opening division left a nonzero remainder");
        Ok(Witness(self.commit_unchecked(&quotient)?))
    }

    /// Checks `e(C − g^{r(α)}, h) = e(w, h^{Z(α)})` where `r` interpolates the
    /// opened pairs and `Z` vanishes on the opened points.
    pub fn verify_batch(&self, c: &Commitment, opened: &[(Scalar, Scalar)], w: &Witness) -> Result<bool> {
        if opened.len() > self.max_batch() {
            return Err(Error::BatchCapability {
                requested: opened.len(),
                supported: self.max_batch(),
            });
        }
        let remainder_poly = Polynomial::interpolate(opened)?;
        let xs: Vec<Scalar> = opened.iter().map(|(x, _)| *x).collect();
        let vanishing = Polynomial::vanishing(&xs);
        let r_commit = self.commit_unchecked(&remainder_poly)?;
        let z_coeffs = vanishing.coeffs();
        let z_commit = msm_g2(&self.g2_powers[..z_coeffs.len()], z_coeffs)?;
        let lhs = (c.0.into_group() - r_commit).into_affine();
        Ok(pairing_product_is_identity(&[(lhs, self.g2_powers[0]), (-w.0, z_commit)]))
    }

    /// Test-mode oracle: `g^{φ(α)}` by direct evaluation at the trapdoor.
    pub fn commit_with_trapdoor(&self, poly: &Polynomial) -> Option<G1> {
        let alpha = self.trapdoor?;
        Some((g1_generator() * poly.evaluate(&alpha)).into_affine())
    }
}
