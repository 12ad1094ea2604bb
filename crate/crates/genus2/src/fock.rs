//! Exact combinatorial engine over the rank-one Heisenberg Fock space.
//!
//! Basis states are unrestricted partitions lambda = {1^e1 ... p^ep}; the
//! invariant-metric norm of the corresponding Fock vector is
//! prod_i (-i)^{e_i} e_i!. Genus-one 2-point weights are sums over
//! fixed-point-free involutions of the doubled label set, with pair weights
//! C(r,s) inside a copy and D(r,s,+-w) across copies. Summing over all
//! partitions gives a rho-series for the genus-two partition function that is
//! completely independent of the determinant formula, which is exactly what
//! makes it useful as an oracle.
//!
//! The Catalan series f(chi), its powers, and the quasi-primary trace
//! identity for a self-sewn sphere live here too, all in exact rational
//! arithmetic.

use crate::elliptic::EllipticContext;
use crate::series::TruncatedSeries;
use crate::{Error, Result};
use num::complex::Complex64;
use num::{BigInt, BigRational, BigUint, One, Zero};
use std::collections::BTreeMap;

/// An unrestricted partition as part -> multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockPartition {
    multiplicities: BTreeMap<u32, u32>,
}

impl FockPartition {
    pub fn new(multiplicities: BTreeMap<u32, u32>) -> Self {
        let mut m = multiplicities;
        m.retain(|_, &mut e| e > 0);
        FockPartition { multiplicities: m }
    }

    pub fn from_pairs(pairs: &[(u32, u32)]) -> Self {
        Self::new(pairs.iter().copied().collect())
    }

    pub fn empty() -> Self {
        FockPartition { multiplicities: BTreeMap::new() }
    }

    pub fn weight(&self) -> u32 {
        self.multiplicities.iter().map(|(i, e)| i * e).sum()
    }

    /// prod_i (-i)^{e_i} e_i!, the squared norm of the Fock vector.
    pub fn liz_norm(&self) -> BigRational {
        let mut acc = BigInt::one();
        for (&i, &e) in &self.multiplicities {
            let base = -BigInt::from(i);
            for _ in 0..e {
                acc *= &base;
            }
            for j in 1..=e {
                acc *= BigInt::from(j);
            }
        }
        BigRational::from(acc)
    }

    /// The label multiset {i repeated e_i times}.
    pub fn labels(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for (&i, &e) in &self.multiplicities {
            for _ in 0..e {
                out.push(i);
            }
        }
        out
    }

    pub fn multiplicities(&self) -> &BTreeMap<u32, u32> {
        &self.multiplicities
    }
}

/// All partitions of exactly `n` (largest part listed first internally).
pub fn partitions_of(n: u32) -> Vec<FockPartition> {
    fn rec(remaining: u32, max_part: u32, current: &mut Vec<u32>, out: &mut Vec<FockPartition>) {
        if remaining == 0 {
            let mut m = BTreeMap::new();
            for &p in current.iter() {
                *m.entry(p).or_insert(0) += 1;
            }
            out.push(FockPartition::new(m));
            return;
        }
        for p in (1..=max_part.min(remaining)).rev() {
            current.push(p);
            rec(remaining - p, p, current, out);
            current.pop();
        }
    }
    if n == 0 {
        return vec![FockPartition::empty()];
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// p(n) by the pentagonal-number recurrence.
pub fn partition_count(n: u64) -> BigUint {
    let mut p: Vec<BigInt> = vec![BigInt::one()];
    for i in 1..=n as i64 {
        let mut acc = BigInt::zero();
        let mut k = 1i64;
        loop {
            let g1 = k * (3 * k - 1) / 2;
            let g2 = k * (3 * k + 1) / 2;
            if g1 > i && g2 > i {
                break;
            }
            let sign = if k % 2 == 0 { -1 } else { 1 };
            for g in [g1, g2] {
                if g <= i {
                    acc += sign * &p[(i - g) as usize];
                }
            }
            k += 1;
        }
        p.push(acc);
    }
    p[n as usize].to_biguint().expect("partition counts are positive")
}

/// Visit every fixed-point-free involution (perfect matching) of
/// `0..n_elements`, passing the pair list to `f`. Visits exactly
/// (n_elements - 1)!! matchings.
pub fn for_each_perfect_matching(n_elements: usize, mut f: impl FnMut(&[(usize, usize)])) {
    assert!(n_elements % 2 == 0, "need an even number of elements");
    fn rec(
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        f: &mut impl FnMut(&[(usize, usize)]),
    ) {
        let first = match used.iter().position(|u| !u) {
            None => {
                f(pairs);
                return;
            }
            Some(i) => i,
        };
        used[first] = true;
        for j in first + 1..used.len() {
            if used[j] {
                continue;
            }
            used[j] = true;
            pairs.push((first, j));
            rec(used, pairs, f);
            pairs.pop();
            used[j] = false;
        }
        used[first] = false;
    }
    let mut used = vec![false; n_elements];
    let mut pairs = Vec::with_capacity(n_elements / 2);
    rec(&mut used, &mut pairs, &mut f);
}

/// (2n-1)!!, the number of perfect matchings of 2n elements.
pub fn double_factorial_odd(n: u64) -> u64 {
    (0..n).map(|i| 2 * i + 1).product::<u64>().max(1)
}

/// Doubled label set for a partition: (value, copy) with copy in {1, 2}.
pub fn doubled_labels(lambda: &FockPartition) -> Vec<(u32, u8)> {
    let one = lambda.labels();
    let mut out: Vec<(u32, u8)> = one.iter().map(|&i| (i, 1)).collect();
    out.extend(one.iter().map(|&i| (i, 2)));
    out
}

/// Pair weight xi(r, s): C(r,s) within a copy, D(r,s, w_ab) across copies
/// with w_12 = w, w_21 = -w. Well-defined because D(r,s,z) = D(s,r,-z).
fn xi(ctx: &EllipticContext, w: Complex64, r: (u32, u8), s: (u32, u8)) -> Result<Complex64> {
    let (ri, ra) = (r.0 as usize, r.1);
    let (si, sa) = (s.0 as usize, s.1);
    if ra == sa {
        Ok(ctx.c_cd(ri, si))
    } else if ra == 1 {
        ctx.d_cd(ri, si, w)
    } else {
        ctx.d_cd(ri, si, -w)
    }
}

/// E(lambda): the genus-one 2-point weight of the state paired with itself,
/// i.e. the sum over fixed-point-free involutions of the doubled label set of
/// the product of pair weights.
pub fn two_point_weight(
    lambda: &FockPartition,
    ctx: &EllipticContext,
    w: Complex64,
) -> Result<Complex64> {
    let labels = doubled_labels(lambda);
    if labels.len() > 14 {
        return Err(Error::OracleTooLarge(format!(
            "doubled label set has {} elements (cap 14)",
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let m = labels.len();
    let mut table = vec![Complex64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                table[i * m + j] = xi(ctx, w, labels[i], labels[j])?;
            }
        }
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for_each_perfect_matching(m, |pairs| {
        let mut prod = Complex64::new(1.0, 0.0);
        for &(i, j) in pairs {
            prod *= table[i * m + j];
        }
        acc += prod;
    });
    Ok(acc)
}

/// The rho-series sum over all partitions of weight <= max_weight of
/// E(lambda)/liz(lambda) * rho^{weight}. This equals eta(tau) times the
/// genus-two partition function, expanded in rho, and is the independent
/// oracle for the determinant formula.
pub fn eta_z2_series_oracle(
    ctx: &EllipticContext,
    w: Complex64,
    max_weight: u32,
) -> Result<TruncatedSeries<Complex64>> {
    if max_weight > 7 {
        return Err(Error::OracleTooLarge(format!(
            "oracle capped at rho-order 7, requested {}",
            max_weight
        )));
    }
    let trunc = max_weight as i64 + 1;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); trunc as usize];
    for n in 0..=max_weight {
        for lambda in partitions_of(n) {
            let e = two_point_weight(&lambda, ctx, w)?;
            let norm = rational_to_c64(&lambda.liz_norm());
            coeffs[n as usize] += e / norm;
        }
    }
    Ok(TruncatedSeries::new(0, coeffs))
}

pub fn rational_to_c64(r: &BigRational) -> Complex64 {
    use num::ToPrimitive;
    Complex64::new(r.to_f64().expect("rational fits f64"), 0.0)
}

/// The Catalan series f(chi) = sum_{n>=1} (1/n) C(2n, n+1) chi^n, exact.
pub fn catalan_series(order: i64) -> TruncatedSeries<BigRational> {
    let mut coeffs = vec![BigRational::zero(); order.max(0) as usize];
    for n in 1..order {
        let c = binomial_exact(2 * n as u64, n as u64 + 1);
        coeffs[n as usize] = BigRational::new(BigInt::from(c), BigInt::from(n));
    }
    TruncatedSeries::new(0, coeffs)
}

/// f(chi)^m = sum_{n>=m} (m/n) C(2n, n+m) chi^n, exact closed form.
pub fn catalan_power(m: u64, order: i64) -> TruncatedSeries<BigRational> {
    assert!(m >= 1);
    let mut coeffs = vec![BigRational::zero(); order.max(0) as usize];
    for n in (m as i64)..order {
        let c = binomial_exact(2 * n as u64, n as u64 + m);
        coeffs[n as usize] = BigRational::new(BigInt::from(c) * BigInt::from(m), BigInt::from(n));
    }
    TruncatedSeries::new(0, coeffs)
}

pub fn binomial_exact(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Numeric f(chi) on the series branch for |chi| < 1/4. The closed form
/// (1 - sqrt(1 - 4 chi))/(2 chi) - 1 cancels catastrophically for small
/// |chi| (the relative error blows up like eps/|chi|), so below 0.02 the
/// exact series is evaluated instead; 4|chi| < 0.08 makes 40 terms plenty.
pub fn catalan_value(chi: Complex64) -> Complex64 {
    if chi.norm() < 0.02 {
        use num::ToPrimitive;
        return catalan_series(40)
            .map(|r| Complex64::new(r.to_f64().unwrap(), 0.0))
            .evaluate(&chi);
    }
    let one = Complex64::new(1.0, 0.0);
    (one - (one - chi * 4.0).sqrt()) / (chi * 2.0) - one
}

/// Both sides of the self-sewn-sphere trace identity, exactly:
/// the quasi-primary route sum_n chi^n sum_m (p_m - p_{m-1}) C(2n-1, n-m)
/// and the Catalan route 1 + sum_m p_m f(chi)^m, given the weight-space
/// dimensions p_m.
pub struct SphereTrace {
    pub quasi_primary: TruncatedSeries<BigRational>,
    pub catalan: TruncatedSeries<BigRational>,
    pub difference: TruncatedSeries<BigRational>,
}

pub fn sphere_selfsew_trace(order: i64, dims: &[BigUint]) -> SphereTrace {
    assert!(dims.len() as i64 > order, "need dimensions p_0..p_order");
    let mut qp = vec![BigRational::zero(); order.max(0) as usize + 1];
    qp[0] = BigRational::one();
    for n in 1..=order as u64 {
        let mut acc = BigInt::zero();
        for m in 1..=n {
            // dim Q_m = p_m - p_{m-1}, except that the vacuum tower has no
            // descendants (L(-1) kills the vacuum), so dim Q_1 = p_1.
            let pm = BigInt::from(dims[m as usize].clone());
            let pm1 =
                if m == 1 { BigInt::zero() } else { BigInt::from(dims[m as usize - 1].clone()) };
            acc += (pm - pm1) * BigInt::from(binomial_exact(2 * n - 1, n - m));
        }
        qp[n as usize] = BigRational::from(acc);
    }
    let quasi_primary = TruncatedSeries::new(0, qp);
    let mut cat = TruncatedSeries::constant(BigRational::one(), order + 1);
    for m in 1..=order as u64 {
        let fm = catalan_power(m, order + 1);
        let pm = BigRational::from(BigInt::from(dims[m as usize].clone()));
        cat = cat.add(&fm.scale(&pm));
    }
    let difference = quasi_primary.sub(&cat);
    SphereTrace { quasi_primary, catalan: cat, difference }
}

/// Weight-space dimensions of the rank-one free boson: p_m = p(m).
pub fn heisenberg_dims(order: usize) -> Vec<BigUint> {
    (0..=order as u64).map(partition_count).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::complex::Complex64;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn liz_norm_examples() {
        assert_eq!(FockPartition::empty().liz_norm(), rat(1, 1));
        assert_eq!(FockPartition::from_pairs(&[(1, 1)]).liz_norm(), rat(-1, 1));
        // {1^2, 2^1}: ((-1)^2 2!) * ((-2)^1 1!) = -4
        assert_eq!(FockPartition::from_pairs(&[(1, 2), (2, 1)]).liz_norm(), rat(-4, 1));
    }

    #[test]
    fn partition_enumeration_counts() {
        let expect = [1usize, 1, 2, 3, 5, 7, 11, 15];
        for (n, &e) in expect.iter().enumerate() {
            assert_eq!(partitions_of(n as u32).len(), e, "p({})", n);
            assert_eq!(partition_count(n as u64), BigUint::from(e), "p({})", n);
        }
        assert_eq!(partition_count(100).to_string(), "190569292");
    }

    #[test]
    fn matching_enumeration_counts() {
        for n in 1..=5usize {
            let mut count = 0u64;
            for_each_perfect_matching(2 * n, |_| count += 1);
            assert_eq!(count, double_factorial_odd(n as u64), "2n = {}", 2 * n);
        }
        let mut count = 0;
        for_each_perfect_matching(4, |_| count += 1);
        assert_eq!(count, 3);
    }

    fn ctx() -> EllipticContext {
        EllipticContext::with_defaults(c64(0.0, 1.2)).unwrap()
    }

    #[test]
    fn two_point_weight_small_partitions() {
        let c = ctx();
        let w = c64(0.7, 0.4);
        // {1}: single cross pairing, E = D(1,1,w) = P_2(w)
        let e1 = two_point_weight(&FockPartition::from_pairs(&[(1, 1)]), &c, w).unwrap();
        let p2 = c.p(2, w).unwrap();
        assert!((e1 - p2).norm() < 1e-13);
        // {2}: E = D(2,2,w) = -6 P_4(w), validated against the explicit
        // binomial (-1)^{2+1} (3!/1!1!) P_4
        let e2 = two_point_weight(&FockPartition::from_pairs(&[(2, 1)]), &c, w).unwrap();
        let p4 = c.p(4, w).unwrap();
        assert!((e2 + p4 * 6.0).norm() < 1e-12);
        // {1^2}: E = E_2^2 + 2 P_2^2 (one within-copy pairing, two cross)
        let e11 = two_point_weight(&FockPartition::from_pairs(&[(1, 2)]), &c, w).unwrap();
        let expect = c.e(2) * c.e(2) + p2 * p2 * 2.0;
        assert!((e11 - expect).norm() < 1e-12);
    }

    #[test]
    fn oracle_series_low_orders() {
        let c = ctx();
        let w = c64(0.7, 0.4);
        let s = eta_z2_series_oracle(&c, w, 4).unwrap();
        assert!((s.coeff(0) - c64(1.0, 0.0)).norm() < 1e-15);
        // rho^1: E({1})/(-1) = -P_2(w)
        let p2 = c.p(2, w).unwrap();
        assert!((s.coeff(1) + p2).norm() < 1e-13);
        // rho^2: E_2^2/2 + P_2^2 + 3 P_4
        let p4 = c.p(4, w).unwrap();
        let expect = c.e(2) * c.e(2) * 0.5 + p2 * p2 + p4 * 3.0;
        assert!((s.coeff(2) - expect).norm() < 1e-12);
        assert!(eta_z2_series_oracle(&c, w, 8).is_err());
    }

    #[test]
    fn oracle_series_even_in_w() {
        let c = ctx();
        let w = c64(0.55, 0.3);
        let a = eta_z2_series_oracle(&c, w, 4).unwrap();
        let b = eta_z2_series_oracle(&c, -w, 4).unwrap();
        for n in 0..5 {
            assert!((a.coeff(n) - b.coeff(n)).norm() < 1e-12, "rho^{}", n);
        }
    }

    #[test]
    fn catalan_series_basics() {
        let f = catalan_series(8);
        assert_eq!(f.coeff(0), rat(0, 1));
        assert_eq!(f.coeff(1), rat(1, 1));
        assert_eq!(f.coeff(2), rat(2, 1));
        assert_eq!(f.coeff(3), rat(5, 1));
        assert_eq!(f.coeff(4), rat(14, 1));
        // functional equation f = chi (1 + f)^2, exactly
        let one = TruncatedSeries::one(8);
        let rhs = one.add(&f).mul(&one.add(&f)).shift(1).truncate(8);
        for n in 0..8 {
            assert_eq!(f.coeff(n), rhs.coeff(n), "chi^{}", n);
        }
        // numeric branch agrees with the series (order 40: Catalan numbers
        // grow like 4^n, so the tail is ~ (4|chi|)^40)
        let chi = c64(0.08, 0.02);
        let fv = catalan_value(chi);
        let fs = catalan_series(40).map(rational_to_c64).evaluate(&chi);
        assert!((fv - fs).norm() < 1e-12, "{} vs {}", fv, fs);
    }

    #[test]
    fn catalan_power_closed_form() {
        // (m/n) C(2n, n+m) at m=2, n=2 is C(4,4) = 1
        let f2 = catalan_power(2, 6);
        assert_eq!(f2.coeff(2), rat(1, 1));
        // consistency with direct powers at all stored orders
        let f = catalan_series(10);
        let sq = f.mul(&f).truncate(10);
        let p2 = catalan_power(2, 10);
        for n in 0..10 {
            assert_eq!(sq.coeff(n), p2.coeff(n), "chi^{}", n);
        }
        let cube = sq.mul(&f).truncate(10);
        let p3 = catalan_power(3, 10);
        for n in 0..10 {
            assert_eq!(cube.coeff(n), p3.coeff(n), "chi^{}", n);
        }
    }

    #[test]
    fn quasi_primary_binomial_identity() {
        // sum_r C(n-m, r) C(n+m-1, r) = C(2n-1, n-m) for n <= 12, m <= n
        for n in 1..=12u64 {
            for m in 1..=n {
                let mut acc = BigUint::zero();
                for r in 0..=(n - m) {
                    acc += binomial_exact(n - m, r) * binomial_exact(n + m - 1, r);
                }
                assert_eq!(acc, binomial_exact(2 * n - 1, n - m), "n={} m={}", n, m);
            }
        }
    }

    #[test]
    fn sphere_trace_identity_exact() {
        let dims = heisenberg_dims(12);
        let t = sphere_selfsew_trace(12, &dims);
        assert!(t.difference.is_zero(), "difference {:?}", t.difference);
        // chi^1 coefficient is p_1 * C(1,0) = 1
        assert_eq!(t.quasi_primary.coeff(1), rat(1, 1));
        // p(5) = 7 enters the m=5 term
        assert_eq!(dims[5], BigUint::from(7u32));
    }
}
