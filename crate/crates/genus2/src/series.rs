//! Truncated Laurent/Taylor series with explicit truncation tracking.
//!
//! A `TruncatedSeries<C>` stores coefficients for exponents in
//! `lowest..trunc` (exclusive upper bound) and represents
//! `sum c_n x^n + O(x^trunc)`. Arithmetic never reports coefficients at or
//! beyond the truncation order; multiplication narrows the window to
//! `min(l1 + t2, l2 + t1)` instead of silently extending it.
//!
//! The coefficient ring is a type parameter: `Complex64` for numeric work,
//! `BigRational` for exact identities.

use num::complex::Complex64;
use num::{BigInt, BigRational, One, Zero};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// Coefficient ring for series arithmetic.
pub trait Coeff:
    Clone
    + PartialEq
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Multiplicative inverse, `None` for zero (or non-invertible) elements.
    fn try_recip(&self) -> Option<Self>;
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }
    fn try_recip(&self) -> Option<Self> {
        if Coeff::is_zero(self) {
            None
        } else {
            Some(Complex64::new(1.0, 0.0) / self)
        }
    }
}

impl Coeff for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn one() -> Self {
        <BigRational as One>::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn try_recip(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(self.recip())
        }
    }
}

/// Render an exact rational as `p/q` (the JSON wire form for exact mode).
pub fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[derive(Clone, PartialEq)]
pub struct TruncatedSeries<C> {
    lowest: i64,
    trunc: i64,
    coeffs: Vec<C>,
}

impl<C: Coeff> TruncatedSeries<C> {
    /// Series from explicit coefficients starting at exponent `lowest`.
    pub fn new(lowest: i64, coeffs: Vec<C>) -> Self {
        let trunc = lowest + coeffs.len() as i64;
        TruncatedSeries { lowest, trunc, coeffs }
    }

    /// The zero series known through `O(x^trunc)`.
    pub fn zero(trunc: i64) -> Self {
        TruncatedSeries { lowest: trunc, trunc, coeffs: Vec::new() }
    }

    pub fn constant(c: C, trunc: i64) -> Self {
        Self::monomial(c, 0, trunc)
    }

    pub fn one(trunc: i64) -> Self {
        Self::constant(C::one(), trunc)
    }

    /// `c * x^k` known through `O(x^trunc)`.
    pub fn monomial(c: C, k: i64, trunc: i64) -> Self {
        if k >= trunc {
            return Self::zero(trunc);
        }
        let mut coeffs = vec![C::zero(); (trunc - k) as usize];
        coeffs[0] = c;
        TruncatedSeries { lowest: k, trunc, coeffs }
    }

    pub fn lowest_exponent(&self) -> i64 {
        self.lowest
    }

    pub fn truncation_order(&self) -> i64 {
        self.trunc
    }

    /// Coefficient of `x^n`. Exponents below `lowest` are exactly zero;
    /// asking at or beyond the truncation order is a caller bug.
    pub fn coeff(&self, n: i64) -> C {
        assert!(n < self.trunc, "coefficient at {} is beyond truncation {}", n, self.trunc);
        if n < self.lowest {
            C::zero()
        } else {
            self.coeffs[(n - self.lowest) as usize].clone()
        }
    }

    /// Smallest exponent with a nonzero stored coefficient, if any.
    pub fn valuation(&self) -> Option<i64> {
        self.coeffs
            .iter()
            .position(|c| !c.is_zero())
            .map(|i| self.lowest + i as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.valuation().is_none()
    }

    pub fn truncate(&self, new_trunc: i64) -> Self {
        assert!(new_trunc <= self.trunc, "cannot extend a truncated series");
        let lowest = self.lowest.min(new_trunc);
        let keep = (new_trunc - lowest) as usize;
        TruncatedSeries {
            lowest,
            trunc: new_trunc,
            coeffs: self.coeffs[..keep.min(self.coeffs.len())].to_vec(),
        }
    }

    pub fn neg(&self) -> Self {
        TruncatedSeries {
            lowest: self.lowest,
            trunc: self.trunc,
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let trunc = self.trunc.min(other.trunc);
        let lowest = self.lowest.min(other.lowest).min(trunc);
        let mut coeffs = vec![C::zero(); (trunc - lowest) as usize];
        for (series, _) in [(self, 0), (other, 1)] {
            for (i, c) in series.coeffs.iter().enumerate() {
                let n = series.lowest + i as i64;
                if n < trunc {
                    let slot = &mut coeffs[(n - lowest) as usize];
                    *slot = slot.clone() + c.clone();
                }
            }
        }
        TruncatedSeries { lowest, trunc, coeffs }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &C) -> Self {
        TruncatedSeries {
            lowest: self.lowest,
            trunc: self.trunc,
            coeffs: self.coeffs.iter().map(|a| a.clone() * c.clone()).collect(),
        }
    }

    /// Multiply by `x^k` (exact shift; truncation window shifts with it).
    pub fn shift(&self, k: i64) -> Self {
        TruncatedSeries {
            lowest: self.lowest + k,
            trunc: self.trunc + k,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        // Valid window: a factor known mod x^t contributes products from its
        // lowest term against the other's unknown tail at l_other + t.
        let trunc = (self.lowest + other.trunc).min(other.lowest + self.trunc);
        let lowest = (self.lowest + other.lowest).min(trunc);
        let mut coeffs = vec![C::zero(); (trunc - lowest) as usize];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let na = self.lowest + i as i64;
            for (j, b) in other.coeffs.iter().enumerate() {
                let n = na + other.lowest + j as i64;
                if n >= trunc {
                    break;
                }
                let slot = &mut coeffs[(n - lowest) as usize];
                *slot = slot.clone() + a.clone() * b.clone();
            }
        }
        TruncatedSeries { lowest, trunc, coeffs }
    }

    /// Multiplicative inverse. The leading stored coefficient must be
    /// invertible: for `f = c x^v (1 + u)` this returns
    /// `c^{-1} x^{-v} (1 - u + u^2 - ...)`, known through `O(x^{t - 2v})`.
    pub fn inverse(&self) -> Option<Self> {
        let v = self.valuation()?;
        let c = self.coeff(v);
        let cinv = c.try_recip()?;
        let unit_len = (self.trunc - v) as usize;
        // g = f / (c x^v), constant term 1
        let mut g = Vec::with_capacity(unit_len);
        for n in v..self.trunc {
            g.push(self.coeff(n) * cinv.clone());
        }
        // Newton-free direct recurrence: h * g = 1
        let mut h = vec![C::zero(); unit_len];
        h[0] = C::one();
        for n in 1..unit_len {
            let mut acc = C::zero();
            for j in 1..=n {
                if !g[j].is_zero() {
                    acc = acc + g[j].clone() * h[n - j].clone();
                }
            }
            h[n] = -acc;
        }
        let coeffs: Vec<C> = h.into_iter().map(|c| c * cinv.clone()).collect();
        Some(TruncatedSeries::new(-v, coeffs).truncate(self.trunc - 2 * v))
    }

    pub fn div(&self, other: &Self) -> Option<Self> {
        Some(self.mul(&other.inverse()?))
    }

    /// `exp(f)` for series with valuation >= 1. Each Taylor term divides by
    /// `j` incrementally, so no factorial is ever materialized.
    pub fn exp(&self) -> Self {
        let trunc = self.trunc;
        match self.valuation() {
            None => return TruncatedSeries::one(trunc),
            Some(v) => assert!(v >= 1, "exp requires positive valuation, got {}", v),
        }
        let mut acc = TruncatedSeries::one(trunc);
        let mut term = TruncatedSeries::one(trunc);
        for j in 1..=trunc.max(1) {
            term = term.mul(self).truncate(trunc).scale(&C::from_ratio(1, j));
            if term.is_zero() {
                break;
            }
            acc = acc.add(&term);
        }
        acc
    }

    /// `log(f)` for series with constant term 1 (valuation 0, `f(0) = 1`).
    pub fn log(&self) -> Self {
        assert_eq!(self.valuation(), Some(0), "log requires unit constant term");
        assert!(
            (self.coeff(0) - C::one()).is_zero(),
            "log requires constant term exactly 1"
        );
        let u = self.sub(&TruncatedSeries::one(self.trunc));
        let trunc = self.trunc;
        let mut acc = TruncatedSeries::zero(trunc);
        let mut pow = TruncatedSeries::one(trunc);
        for j in 1..=trunc.max(1) {
            pow = pow.mul(&u).truncate(trunc);
            if pow.is_zero() {
                break;
            }
            let sign = if j % 2 == 1 { 1 } else { -1 };
            acc = acc.add(&pow.scale(&C::from_ratio(sign, j)));
        }
        acc
    }

    pub fn powi(&self, mut n: u64) -> Self {
        let mut base = self.clone();
        let mut acc = TruncatedSeries::one(self.trunc);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let coeffs: Vec<C> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let n = self.lowest + i as i64;
                c.clone() * C::from_ratio(n, 1)
            })
            .collect();
        TruncatedSeries { lowest: self.lowest - 1, trunc: self.trunc - 1, coeffs }
    }

    /// `x d/dx`, the weighted derivative that keeps exponents in place.
    pub fn x_d_dx(&self) -> Self {
        self.derivative().shift(1)
    }

    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> TruncatedSeries<D> {
        TruncatedSeries {
            lowest: self.lowest,
            trunc: self.trunc,
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (i64, &C)> {
        self.coeffs.iter().enumerate().map(|(i, c)| (self.lowest + i as i64, c))
    }
}

impl<C: Coeff> TruncatedSeries<C> {
    /// Evaluate at a point; negative exponents require invertible `x`.
    pub fn evaluate(&self, x: &C) -> C {
        let mut acc = C::zero();
        // Horner over the stored window, highest exponent first.
        for c in self.coeffs.iter().rev() {
            acc = acc * x.clone() + c.clone();
        }
        // acc now equals sum c_n x^(n - lowest); scale by x^lowest.
        if self.lowest == 0 {
            return acc;
        }
        let mut scale = C::one();
        if self.lowest > 0 {
            for _ in 0..self.lowest {
                scale = scale * x.clone();
            }
        } else {
            let xinv = x.try_recip().expect("negative exponents need invertible point");
            for _ in 0..(-self.lowest) {
                scale = scale * xinv.clone();
            }
        }
        acc * scale
    }
}

impl<C: Coeff> fmt::Debug for TruncatedSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (n, c) in self.iter() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:?})x^{}", c, n)?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(x^{})", self.trunc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn mul_narrows_truncation_window() {
        // (1/x + 1 + O(x^3)) * (x + O(x^4)): window = min(-1+4, 1+3) = 3
        let a = TruncatedSeries::new(-1, vec![rat(1, 1), rat(1, 1), rat(0, 1), rat(0, 1)]);
        let b = TruncatedSeries::monomial(rat(1, 1), 1, 4);
        let p = a.mul(&b);
        assert_eq!(p.truncation_order(), 3);
        assert_eq!(p.coeff(0), rat(1, 1));
        assert_eq!(p.coeff(1), rat(1, 1));
    }

    #[test]
    fn inverse_of_geometric_unit() {
        // 1/(1 - x) = 1 + x + x^2 + ...
        let one_minus_x =
            TruncatedSeries::new(0, vec![rat(1, 1), rat(-1, 1), rat(0, 1), rat(0, 1), rat(0, 1)]);
        let inv = one_minus_x.inverse().unwrap();
        for n in 0..5 {
            assert_eq!(inv.coeff(n), rat(1, 1));
        }
    }

    #[test]
    fn inverse_handles_poles() {
        // 1/(x^2 (1 + x)) = x^-2 - x^-1 + 1 - x ...
        let f = TruncatedSeries::new(2, vec![rat(1, 1), rat(1, 1), rat(0, 1), rat(0, 1)]);
        let inv = f.inverse().unwrap();
        assert_eq!(inv.lowest_exponent(), -2);
        assert_eq!(inv.coeff(-2), rat(1, 1));
        assert_eq!(inv.coeff(-1), rat(-1, 1));
        assert_eq!(inv.coeff(0), rat(1, 1));
        assert_eq!(inv.truncation_order(), 2);
    }

    #[test]
    fn exp_log_round_trip() {
        let f = TruncatedSeries::new(
            1,
            vec![rat(1, 2), rat(-1, 3), rat(1, 5), rat(2, 7), rat(-3, 11), rat(1, 13)],
        );
        let g = f.exp();
        let back = g.log();
        for n in 1..7 {
            assert_eq!(back.coeff(n), f.coeff(n), "coefficient {}", n);
        }
    }

    #[test]
    fn derivative_and_shift() {
        let f = TruncatedSeries::new(-1, vec![rat(3, 1), rat(0, 1), rat(5, 1)]);
        let df = f.derivative();
        assert_eq!(df.coeff(-2), rat(-3, 1));
        assert_eq!(df.coeff(0), rat(5, 1));
        let xf = f.shift(1);
        assert_eq!(xf.coeff(0), rat(3, 1));
    }

    #[test]
    fn evaluate_laurent_numeric() {
        use num::complex::Complex64;
        // 1/z + z at z = 2i: -i/2 + 2i = 1.5i
        let f = TruncatedSeries::new(
            -1,
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        );
        let v = f.evaluate(&Complex64::new(0.0, 2.0));
        assert!((v - Complex64::new(0.0, 1.5)).norm() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn add_mul_distribute(
            a in proptest::collection::vec(-9i64..10, 1..6),
            b in proptest::collection::vec(-9i64..10, 1..6),
            c in proptest::collection::vec(-9i64..10, 1..6),
        ) {
            let s = |v: &Vec<i64>| TruncatedSeries::new(
                0, v.iter().map(|&n| rat(n, 1)).collect());
            let (a, b, c) = (s(&a), s(&b), s(&c));
            let lhs = a.mul(&b.add(&c));
            let rhs = a.mul(&b).add(&a.mul(&c));
            proptest::prop_assert_eq!(lhs.truncation_order(), rhs.truncation_order());
            for n in 0..lhs.truncation_order() {
                proptest::prop_assert_eq!(lhs.coeff(n), rhs.coeff(n));
            }
        }

        #[test]
        fn mul_window_never_extends(
            la in -3i64..3, ta in 1i64..6,
            lb in -3i64..3, tb in 1i64..6,
        ) {
            let a = TruncatedSeries::new(la, vec![rat(1,1); ta as usize]);
            let b = TruncatedSeries::new(lb, vec![rat(1,1); tb as usize]);
            let p = a.mul(&b);
            let expect = (a.lowest_exponent() + b.truncation_order())
                .min(b.lowest_exponent() + a.truncation_order());
            proptest::prop_assert_eq!(p.truncation_order(), expect);
        }
    }
}
