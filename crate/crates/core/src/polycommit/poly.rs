use std::ops::{Add, Mul, Sub};

use ark_ff::{batch_inversion, Field, Zero};

use crate::algebra::Scalar;
use crate::error::{Error, Result};

/// Dense polynomial over the scalar field, lowest-degree coefficient first.
///
/// Trailing zero coefficients are always trimmed, so the zero polynomial has
/// no coefficients and `degree()` returns `None` for it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<Scalar>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Scalar) -> Self {
        Self::from_coeffs(vec![c])
    }

    pub fn from_coeffs(coeffs: Vec<Scalar>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
    }

    /// Horner evaluation.
    pub fn evaluate(&self, x: &Scalar) -> Scalar {
        self.coeffs.iter().rev().fold(Scalar::zero(), |acc, c| acc * x + c)
    }

    /// `Π (x - root)` over `roots`.
    pub fn vanishing(roots: &[Scalar]) -> Self {
        let mut coeffs = vec![Scalar::from(1u64)];
        for root in roots {
            let mut next = vec![Scalar::zero(); coeffs.len() + 1];
            for (j, c) in coeffs.iter().enumerate() {
                next[j + 1] += c;
                next[j] -= *c * root;
            }
            coeffs = next;
        }
        Self::from_coeffs(coeffs)
    }

    /// Divides by `(x - root)` with synthetic division, returning the
    /// quotient and the remainder (which equals the evaluation at `root`).
    pub fn divide_by_linear(&self, root: &Scalar) -> (Self, Scalar) {
        if self.coeffs.is_empty() {
            return (Self::zero(), Scalar::zero());
        }
        let n = self.coeffs.len();
        let mut quotient = vec![Scalar::zero(); n - 1];
        let mut carry = Scalar::zero();
        for i in (0..n).rev() {
            let value = self.coeffs[i] + carry * root;
            if i == 0 {
                return (Self::from_coeffs(quotient), value);
            }
            quotient[i - 1] = value;
            carry = value;
        }
        unreachable!()
    }

    /// Long division, returning `(quotient, remainder)`.
    ///
    /// Panics if `divisor` is the zero polynomial.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        let d = divisor.degree().expect("division by the zero polynomial");
        let Some(n) = self.degree() else {
            return (Self::zero(), Self::zero());
        };
        if n < d {
            return (Self::zero(), self.clone());
        }
        let lead_inv = divisor.coeffs[d].inverse().expect("leading coefficient is nonzero");
        let mut rem = self.coeffs.clone();
        let mut quotient = vec![Scalar::zero(); n - d + 1];
        for k in (0..=n - d).rev() {
            let c = rem[k + d] * lead_inv;
            quotient[k] = c;
            if c.is_zero() {
                continue;
            }
            for (j, dc) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= c * dc;
            }
        }
        rem.truncate(d);
        (Self::from_coeffs(quotient), Self::from_coeffs(rem))
    }

    /// Lagrange interpolation through `points` in O(n²).
    ///
    /// Returns a polynomial of degree below `points.len()`.
    pub fn interpolate(points: &[(Scalar, Scalar)]) -> Result<Self> {
        let xs: Vec<Scalar> = points.iter().map(|(x, _)| *x).collect();
        let mut sorted = xs.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePoint);
        }
        if points.is_empty() {
            return Ok(Self::zero());
        }

        let master = Self::vanishing(&xs);
        let basis: Vec<Self> = xs.iter().map(|x| master.divide_by_linear(x).0).collect();
        let mut denominators: Vec<Scalar> =
            basis.iter().zip(&xs).map(|(b, x)| b.evaluate(x)).collect();
        batch_inversion(&mut denominators);

        let mut coeffs = vec![Scalar::zero(); points.len()];
        for ((b, inv), (_, y)) in basis.iter().zip(&denominators).zip(points) {
            let scale = *y * inv;
            if scale.is_zero() {
                continue;
            }
            for (acc, c) in coeffs.iter_mut().zip(&b.coeffs) {
                *acc += scale * c;
            }
        }
        Ok(Self::from_coeffs(coeffs))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: Self) -> Polynomial {
        let (long, short) =
            if self.coeffs.len() >= rhs.coeffs.len() { (self, rhs) } else { (rhs, self) };
        let mut coeffs = long.coeffs.clone();
        for (a, b) in coeffs.iter_mut().zip(&short.coeffs) {
            *a += b;
        }
        Polynomial::from_coeffs(coeffs)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: Self) -> Polynomial {
        let len = self.coeffs.len().max(rhs.coeffs.len());
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(len, Scalar::zero());
        for (a, b) in coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        Polynomial::from_coeffs(coeffs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: Self) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut coeffs = vec![Scalar::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += *a * b;
            }
        }
        Polynomial::from_coeffs(coeffs)
    }
}
