//! Genus-one special functions on the torus C / 2*pi*i*(Z tau + Z).
//!
//! Everything here comes in two flavours: exact q-series with rational
//! coefficients (Eisenstein series, the eta product) and numeric evaluation
//! at a concrete modular parameter. Numeric evaluation of the elliptic
//! P_k functions reduces the argument into the fundamental cell first, with
//! the quasi-period correction for P_1.
//!
//! Conventions: q = exp(2*pi*i*tau),
//!   E_k(q)  = -B_k/k! + (2/(k-1)!) sum_{n>=1} sigma_{k-1}(n) q^n   (k even),
//!   E_k = 0 for odd k,
//!   P_2(tau,z) = 1/z^2 + sum_{k>=2} (k-1) E_k z^{k-2},
//!   P_1(tau,z) = 1/z   - sum_{k>=2} E_k z^{k-1},
//!   P_0(tau,z) = -log z + sum_{k>=2} E_k z^k / k,
//!   P_k = (-1)^{k-1}/(k-1)! d^{k-1}P_1/dz^{k-1}  (k >= 3),
//!   K(tau,z) = exp(-P_0) = z exp(-sum E_k z^k / k),
//!   C(k,l) = (-1)^{k+1} (k+l-1)!/((k-1)!(l-1)!) E_{k+l},
//!   D(k,l,z) = (-1)^{k+1} (k+l-1)!/((k-1)!(l-1)!) P_{k+l}(tau,z).

use crate::series::TruncatedSeries;
use crate::{Error, Result};
use num::complex::Complex64;
use num::traits::ToPrimitive;
use num::{BigInt, BigRational, BigUint, One, Zero};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// Bernoulli number B_k, with B_1 = -1/2 (the convention that makes
/// E_2 = -1/12 + 2q + ...).
pub fn bernoulli(k: usize) -> BigRational {
    let mut b: Vec<BigRational> = Vec::with_capacity(k + 1);
    for n in 0..=k {
        if n == 0 {
            b.push(BigRational::one());
            continue;
        }
        // sum_{j=0}^{n} C(n+1, j) B_j = 0  =>  B_n = -1/(n+1) * sum_{j<n} C(n+1,j) B_j
        let mut acc = BigRational::zero();
        for (j, bj) in b.iter().enumerate() {
            acc += BigRational::from(BigInt::from(binomial_big(n + 1, j))) * bj;
        }
        let coef = BigRational::new(BigInt::from(-1), BigInt::from(n as i64 + 1));
        b.push(coef * acc);
    }
    b.pop().unwrap()
}

fn binomial_big(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k.min(n - k) {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Binomial coefficient as f64; exact for all values used here (< 2^53).
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// sigma_{pow}(n) = sum of d^pow over divisors d of n, exact.
pub fn divisor_sigma(pow: u32, n: u64) -> BigUint {
    let mut acc = BigUint::zero();
    for d in 1..=n {
        if n % d == 0 {
            acc += BigUint::from(d).pow(pow);
        }
    }
    acc
}

fn factorial_big(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// Exact q-series of E_k for even k >= 2. Odd k is rejected here; callers
/// wanting the total function use [`EisensteinTable::series`].
pub fn eisenstein_series(k: usize, q_order: i64) -> Result<TruncatedSeries<BigRational>> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "Eisenstein series requires even k >= 2, got {}",
            k
        )));
    }
    if q_order < 1 {
        return Err(Error::InvalidInput("q_order must be >= 1".into()));
    }
    let mut coeffs = Vec::with_capacity(q_order as usize);
    let kf = BigRational::from(BigInt::from(factorial_big(k)));
    coeffs.push(-bernoulli(k) / kf);
    let km1f = BigInt::from(factorial_big(k - 1));
    for n in 1..q_order as u64 {
        let s = BigInt::from(divisor_sigma(k as u32 - 1, n));
        coeffs.push(BigRational::new(BigInt::from(2) * s, km1f.clone()));
    }
    Ok(TruncatedSeries::new(0, coeffs))
}

/// Table of exact Eisenstein q-series up to a maximum weight.
#[derive(Debug, Clone)]
pub struct EisensteinTable {
    pub max_weight: usize,
    pub q_order: i64,
    values: BTreeMap<usize, TruncatedSeries<BigRational>>,
}

impl EisensteinTable {
    pub fn build(max_weight: usize, q_order: i64) -> Result<Self> {
        let mut values = BTreeMap::new();
        for k in (2..=max_weight).step_by(2) {
            values.insert(k, eisenstein_series(k, q_order)?);
        }
        Ok(EisensteinTable { max_weight, q_order, values })
    }

    /// Total accessor: odd weights give the zero series.
    pub fn series(&self, k: usize) -> TruncatedSeries<BigRational> {
        assert!(k <= self.max_weight, "weight {} beyond table max {}", k, self.max_weight);
        match self.values.get(&k) {
            Some(s) => s.clone(),
            None => TruncatedSeries::zero(self.q_order),
        }
    }
}

/// The product part of the Dedekind eta function, prod_{n>=1} (1 - q^n),
/// as an exact q-series. The q^{1/24} prefactor is tracked separately as the
/// exact exponent 1/24 (see [`ETA_PREFACTOR_EXPONENT`]).
pub fn eta_product_series(q_order: i64) -> TruncatedSeries<BigRational> {
    let mut acc = TruncatedSeries::one(q_order);
    for n in 1..q_order.max(1) {
        let factor = TruncatedSeries::one(q_order)
            .sub(&TruncatedSeries::monomial(BigRational::one(), n, q_order));
        acc = acc.mul(&factor);
    }
    acc
}

/// Exponent of the q-prefactor of eta, as (numerator, denominator).
pub const ETA_PREFACTOR_EXPONENT: (i64, i64) = (1, 24);

/// Numeric eta(tau) = exp(2 pi i tau / 24) prod (1 - q^n).
pub fn eta_numeric(tau: Complex64) -> Complex64 {
    let q = (Complex64::i() * TWO_PI * tau).exp();
    let mut prod = Complex64::new(1.0, 0.0);
    let mut qn = Complex64::new(1.0, 0.0);
    for _ in 1..200 {
        qn *= q;
        prod *= Complex64::new(1.0, 0.0) - qn;
        if qn.norm() < 1e-18 {
            break;
        }
    }
    (Complex64::i() * TWO_PI * tau / 24.0).exp() * prod
}

/// 1/eta as a function of the nome: q^{-1/24} (principal power) / prod(1-q^n).
/// Used by degeneration targets where the argument is a series value, not a
/// modular parameter.
pub fn inv_eta_of_nome(q: Complex64) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    let mut qn = Complex64::new(1.0, 0.0);
    for _ in 1..200 {
        qn *= q;
        prod *= Complex64::new(1.0, 0.0) - qn;
        if qn.norm() < 1e-18 {
            break;
        }
    }
    q.powf(-1.0 / 24.0) / prod
}

/// A point in the upper half plane together with its nome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularParameter {
    pub tau: Complex64,
    pub q: Complex64,
}

impl ModularParameter {
    pub fn new(tau: Complex64) -> Result<Self> {
        if !(tau.im > 0.0) {
            return Err(Error::OutsideDomain(format!(
                "modular parameter needs Im(tau) > 0, got tau = {}",
                tau
            )));
        }
        Ok(ModularParameter { tau, q: (Complex64::i() * TWO_PI * tau).exp() })
    }
}

/// Evaluation orders and guard distances.
#[derive(Debug, Clone, Copy)]
pub struct EllipticParams {
    /// Number of retained q-powers in Eisenstein/eta sums.
    pub q_order: i64,
    /// Highest retained z-power in P_k Laurent expansions.
    pub z_order: i64,
    /// Highest Eisenstein weight kept in the numeric table.
    pub max_weight: usize,
    /// Fraction of the minimal lattice distance treated as a singularity.
    pub guard_fraction: f64,
    /// Fraction of the minimal lattice distance accepted for series evaluation.
    pub radius_fraction: f64,
}

impl Default for EllipticParams {
    fn default() -> Self {
        EllipticParams {
            q_order: 20,
            z_order: 60,
            max_weight: 64,
            guard_fraction: 1e-6,
            radius_fraction: 0.62,
        }
    }
}

/// Cached numeric data for one modular parameter: Eisenstein values, the
/// minimal lattice distance D(q), and eta(tau).
#[derive(Debug, Clone)]
pub struct EllipticContext {
    pub modpt: ModularParameter,
    pub params: EllipticParams,
    /// e_num[k] = E_k(tau); zero at odd k; entries 0 and 1 unused.
    e_num: Vec<Complex64>,
    d_min: f64,
    eta: Complex64,
}

impl EllipticContext {
    pub fn new(tau: Complex64, params: EllipticParams) -> Result<Self> {
        let modpt = ModularParameter::new(tau)?;
        let q = modpt.q;
        let mut e_num = vec![Complex64::new(0.0, 0.0); params.max_weight + 1];
        for k in (2..=params.max_weight).step_by(2) {
            e_num[k] = eisenstein_value(k, q, params.q_order);
        }
        // D(q) = min over (m,n) != 0 of 2 pi |m tau + n|; the minimum is
        // attained on a small shell around the origin.
        let mut d_min = f64::INFINITY;
        for m in -2i64..=2 {
            for n in -2i64..=2 {
                if (m, n) == (0, 0) {
                    continue;
                }
                let v = TWO_PI * (tau * m as f64 + Complex64::new(n as f64, 0.0)).norm();
                d_min = d_min.min(v);
            }
        }
        Ok(EllipticContext { modpt, params, e_num, d_min, eta: eta_numeric(tau) })
    }

    pub fn with_defaults(tau: Complex64) -> Result<Self> {
        Self::new(tau, EllipticParams::default())
    }

    pub fn tau(&self) -> Complex64 {
        self.modpt.tau
    }

    pub fn q(&self) -> Complex64 {
        self.modpt.q
    }

    /// E_k(tau) as a total function (zero for odd k).
    pub fn e(&self, k: usize) -> Complex64 {
        assert!(k >= 2 && k <= self.params.max_weight, "weight {} out of table", k);
        self.e_num[k]
    }

    pub fn eta(&self) -> Complex64 {
        self.eta
    }

    /// Minimal lattice distance D(q).
    pub fn min_lattice_distance(&self) -> f64 {
        self.d_min
    }

    /// Nearest lattice point: returns (z - 2 pi i (m tau + n), m, n) with the
    /// reduced representative of (approximately) minimal modulus.
    pub fn reduce(&self, z: Complex64) -> (Complex64, i64, i64) {
        let tau = self.modpt.tau;
        let u = z / (Complex64::i() * TWO_PI);
        let a = u.im / tau.im;
        let b = u.re - a * tau.re;
        let (m0, n0) = (a.round() as i64, b.round() as i64);
        let mut best = (z, 0i64, 0i64);
        let mut best_norm = f64::INFINITY;
        for dm in -1..=1 {
            for dn in -1..=1 {
                let (m, n) = (m0 + dm, n0 + dn);
                let z0 = z - Complex64::i() * TWO_PI * (tau * m as f64 + Complex64::new(n as f64, 0.0));
                if z0.norm() < best_norm {
                    best_norm = z0.norm();
                    best = (z0, m, n);
                }
            }
        }
        best
    }

    fn check_reduced(&self, z0: Complex64) -> Result<()> {
        let r = z0.norm();
        if r < self.params.guard_fraction * self.d_min {
            return Err(Error::LatticeSingularity { z: z0, dist: r });
        }
        if r > self.params.radius_fraction * self.d_min {
            return Err(Error::OutsideDomain(format!(
                "|z| = {:.4} beyond series radius {:.4} after lattice reduction",
                r,
                self.params.radius_fraction * self.d_min
            )));
        }
        Ok(())
    }

    /// The Laurent series of P_k about z = 0 (k >= 1), through z^(z_order - k).
    pub fn p_series(&self, k: usize) -> TruncatedSeries<Complex64> {
        assert!(k >= 1);
        let z_order = self.params.z_order;
        let lowest = -(k as i64);
        let trunc = z_order - k as i64 + 1;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); (trunc - lowest) as usize];
        coeffs[0] = Complex64::new(1.0, 0.0);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut m = k.max(2);
        if m % 2 == 1 {
            m += 1;
        }
        while m as i64 <= z_order {
            let c = sign * binomial_f64(m as u64 - 1, k as u64 - 1);
            coeffs[(m as i64 - k as i64 - lowest) as usize] = self.e(m) * c;
            m += 2;
        }
        TruncatedSeries::new(lowest, coeffs)
    }

    /// P_k(tau, z) for k >= 1, with lattice reduction. P_1 picks up the
    /// quasi-period correction P_1(z + 2 pi i (m tau + n)) = P_1(z) - m;
    /// all k >= 2 are fully elliptic.
    pub fn p(&self, k: usize, z: Complex64) -> Result<Complex64> {
        assert!(k >= 1);
        let (z0, m, _n) = self.reduce(z);
        self.check_reduced(z0)?;
        let val = self.p_series(k).evaluate(&z0);
        if k == 1 {
            Ok(val - Complex64::new(m as f64, 0.0))
        } else {
            Ok(val)
        }
    }

    /// All of P_1(z) .. P_max(z) in one reduction pass. Entry j holds P_{j+1}.
    pub fn p_many(&self, max_k: usize, z: Complex64) -> Result<Vec<Complex64>> {
        let (z0, m, _n) = self.reduce(z);
        self.check_reduced(z0)?;
        let mut out = Vec::with_capacity(max_k);
        for k in 1..=max_k {
            let mut val = self.p_series(k).evaluate(&z0);
            if k == 1 {
                val -= Complex64::new(m as f64, 0.0);
            }
            out.push(val);
        }
        Ok(out)
    }

    /// The analytic part of P_0: sum_{k>=2} E_k z^k / k (the -log z is kept
    /// out of the series and applied in `p0`).
    pub fn p0_analytic_series(&self) -> TruncatedSeries<Complex64> {
        let z_order = self.params.z_order;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); z_order as usize + 1];
        for k in (2..=z_order as usize).step_by(2) {
            coeffs[k] = self.e(k) / k as f64;
        }
        TruncatedSeries::new(0, coeffs)
    }

    /// P_0(tau, z) = -Log z + sum E_k z^k / k on the principal branch.
    /// Not elliptic: no lattice reduction is performed, and arguments beyond
    /// the series radius are refused rather than continued.
    pub fn p0(&self, z: Complex64) -> Result<Complex64> {
        let r = z.norm();
        if r < self.params.guard_fraction * self.d_min {
            return Err(Error::LatticeSingularity { z, dist: r });
        }
        if r > self.params.radius_fraction * self.d_min {
            return Err(Error::BranchAmbiguity(format!(
                "|z| = {:.4} beyond the series radius {:.4}; P_0 branch undefined there",
                r,
                self.params.radius_fraction * self.d_min
            )));
        }
        Ok(-z.ln() + self.p0_analytic_series().evaluate(&z))
    }

    /// Elliptic prime form K(tau, z) = exp(-P_0) = z exp(-sum E_k z^k / k).
    pub fn prime_form(&self, z: Complex64) -> Result<Complex64> {
        let r = z.norm();
        if r > self.params.radius_fraction * self.d_min {
            return Err(Error::BranchAmbiguity(format!(
                "|z| = {:.4} beyond the series radius; prime form needs numeric continuation",
                r
            )));
        }
        Ok(z * (-self.p0_analytic_series().evaluate(&z)).exp())
    }

    /// C(k, l) for k >= 1, l >= 0.
    pub fn c_cd(&self, k: usize, l: usize) -> Complex64 {
        assert!(k >= 1);
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        if l == 0 {
            return self.e_total(k) * sign;
        }
        let c = binomial_f64((k + l - 1) as u64, (k - 1) as u64) * l as f64;
        self.e_total(k + l) * sign * c
    }

    /// D(k, l, z) for k >= 1, l >= 0.
    pub fn d_cd(&self, k: usize, l: usize, z: Complex64) -> Result<Complex64> {
        assert!(k >= 1);
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        if l == 0 {
            return Ok(self.p(k, z)? * sign);
        }
        let c = binomial_f64((k + l - 1) as u64, (k - 1) as u64) * l as f64;
        Ok(self.p(k + l, z)? * sign * c)
    }

    fn e_total(&self, k: usize) -> Complex64 {
        if k % 2 == 1 {
            Complex64::new(0.0, 0.0)
        } else {
            self.e(k)
        }
    }
}

/// Numeric E_k(q) for even k, truncated at q_order.
pub fn eisenstein_value(k: usize, q: Complex64, q_order: i64) -> Complex64 {
    assert!(k >= 2 && k % 2 == 0);
    let kf: BigRational = BigRational::from(BigInt::from(factorial_big(k)));
    let c0 = (-bernoulli(k) / kf).to_f64().expect("Bernoulli ratio fits in f64");
    let mut km1f = 1.0f64;
    for i in 1..k {
        km1f *= i as f64;
    }
    let mut acc = Complex64::new(c0, 0.0);
    let mut qn = Complex64::new(1.0, 0.0);
    for n in 1..q_order as u64 {
        qn *= q;
        let mut sig = 0.0f64;
        for d in 1..=n {
            if n % d == 0 {
                sig += (d as f64).powi(k as i32 - 1);
            }
        }
        acc += qn * (2.0 * sig / km1f);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bernoulli_convention() {
        assert_eq!(bernoulli(0), rat(1, 1));
        assert_eq!(bernoulli(1), rat(-1, 2));
        assert_eq!(bernoulli(2), rat(1, 6));
        assert_eq!(bernoulli(3), rat(0, 1));
        assert_eq!(bernoulli(4), rat(-1, 30));
        assert_eq!(bernoulli(12), rat(-691, 2730));
    }

    #[test]
    fn eisenstein_exact_coefficients() {
        let e2 = eisenstein_series(2, 8).unwrap();
        assert_eq!(e2.coeff(0), rat(-1, 12));
        assert_eq!(e2.coeff(1), rat(2, 1));
        // sigma_1(6) = 1+2+3+6 = 12
        assert_eq!(e2.coeff(6), rat(24, 1));
        let e4 = eisenstein_series(4, 4).unwrap();
        assert_eq!(e4.coeff(0), rat(1, 720));
        assert_eq!(e4.coeff(1), rat(1, 3));
        assert!(eisenstein_series(3, 4).is_err());
        assert!(eisenstein_series(5, 4).is_err());
    }

    #[test]
    fn eisenstein_coefficients_match_divisor_enumeration() {
        // coefficient of q^n is (2/(k-1)!) sigma_{k-1}(n), checked by the
        // direct divisor sum for all even k <= 12, n <= 12
        for k in (2..=12usize).step_by(2) {
            let s = eisenstein_series(k, 13).unwrap();
            for n in 1..13u64 {
                let expect = BigRational::new(
                    BigInt::from(2) * BigInt::from(divisor_sigma(k as u32 - 1, n)),
                    BigInt::from(factorial_big(k - 1)),
                );
                assert_eq!(s.coeff(n as i64), expect, "k={} n={}", k, n);
            }
        }
    }

    #[test]
    fn eisenstein_numeric_matches_exact() {
        let tau = c64(0.1, 1.3);
        let q = (Complex64::i() * TWO_PI * tau).exp();
        for k in [2usize, 4, 6, 10] {
            let exact = eisenstein_series(k, 20).unwrap();
            let horner = exact
                .iter()
                .rev()
                .fold(c64(0.0, 0.0), |acc, (_, c)| acc * q + c64(c.to_f64().unwrap(), 0.0));
            let val = eisenstein_value(k, q, 20);
            assert!((horner - val).norm() < 1e-14, "k={}", k);
        }
    }

    #[test]
    fn q_derivative_identity_for_e2() {
        // (1/2 pi i) dE_2/dtau = 5 E_4 - E_2^2, exactly as q-series
        let n = 16;
        let e2 = eisenstein_series(2, n).unwrap();
        let e4 = eisenstein_series(4, n).unwrap();
        let lhs = e2.x_d_dx();
        let rhs = e4.scale(&rat(5, 1)).sub(&e2.mul(&e2));
        for j in 0..n - 1 {
            assert_eq!(lhs.coeff(j), rhs.coeff(j), "q^{}", j);
        }
    }

    #[test]
    fn eta_product_pentagonal_numbers() {
        let s = eta_product_series(40);
        // Euler: prod(1-q^n) = sum_k (-1)^k q^{k(3k-1)/2}
        let mut expect = TruncatedSeries::zero(40);
        for k in -10i64..=10 {
            let e = k * (3 * k - 1) / 2;
            if e < 40 {
                let sign = if k.rem_euclid(2) == 0 { 1 } else { -1 };
                expect = expect.add(&TruncatedSeries::monomial(rat(sign, 1), e, 40));
            }
        }
        for n in 0..40 {
            assert_eq!(s.coeff(n), expect.coeff(n), "q^{}", n);
        }
        // the first few explicitly: 1, -1, -1, 0, 0, 1
        for (n, v) in [(0, 1), (1, -1), (2, -1), (3, 0), (4, 0), (5, 1)] {
            assert_eq!(s.coeff(n), rat(v, 1));
        }
    }

    #[test]
    fn inverse_eta_counts_partitions() {
        // 1/prod(1-q^n) = sum p(n) q^n
        let inv = eta_product_series(16).inverse().unwrap();
        let partitions = [1i64, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42, 56, 77, 101, 135, 176];
        for (n, &p) in partitions.iter().enumerate() {
            assert_eq!(inv.coeff(n as i64), rat(p, 1), "p({})", n);
        }
    }

    #[test]
    fn eta_numeric_vs_series() {
        let tau = c64(0.07, 1.1);
        let q = (Complex64::i() * TWO_PI * tau).exp();
        let prod = eta_product_series(30)
            .iter()
            .rev()
            .fold(c64(0.0, 0.0), |acc, (_, c)| acc * q + c64(c.to_f64().unwrap(), 0.0));
        let direct = eta_numeric(tau);
        let expect = (Complex64::i() * TWO_PI * tau / 24.0).exp() * prod;
        assert!((direct - expect).norm() < 1e-14);
    }

    fn ctx(tau: Complex64) -> EllipticContext {
        EllipticContext::with_defaults(tau).unwrap()
    }

    #[test]
    fn p2_series_constant_term_is_e2() {
        let c = ctx(c64(0.0, 1.2));
        let s = c.p_series(2);
        assert_eq!(s.coeff(-2), c64(1.0, 0.0));
        assert_eq!(s.coeff(-1), c64(0.0, 0.0));
        assert!((s.coeff(0) - c.e(2)).norm() < 1e-16);
        // P_3 has leading coefficient 1 at z^-3
        assert_eq!(c.p_series(3).coeff(-3), c64(1.0, 0.0));
    }

    #[test]
    fn p1_is_odd_and_p_derivative_chain() {
        let c = ctx(c64(0.05, 1.15));
        let z = c64(0.31, 0.17);
        let p1 = c.p(1, z).unwrap();
        let p1n = c.p(1, -z).unwrap();
        assert!((p1 + p1n).norm() < 1e-12);

        // series identities: P_2 = -dP_1/dz, P_1 = -dP_0/dz
        let p1s = c.p_series(1);
        let p2s = c.p_series(2);
        let d = p1s.derivative().neg();
        for n in -2..p2s.truncation_order().min(d.truncation_order()) {
            assert!((p2s.coeff(n) - d.coeff(n)).norm() < 1e-13, "z^{}", n);
        }
        let p0s = c.p0_analytic_series();
        // -d/dz(-log z + p0s) = 1/z - p0s'
        let dp0 = p0s.derivative().neg();
        for n in 0..dp0.truncation_order().min(p1s.truncation_order()) {
            assert!((p1s.coeff(n) - dp0.coeff(n)).norm() < 1e-13, "z^{}", n);
        }
    }

    #[test]
    fn p_k_matches_derivative_of_p1_numerically() {
        // P_3 = -(1/2) d^2 P_1 / dz^2 via central differences
        let c = ctx(c64(0.0, 1.2));
        let z = c64(0.4, 0.25);
        let h = 1e-4;
        let dd = (c.p(1, z + c64(h, 0.0)).unwrap() - c.p(1, z).unwrap() * 2.0
            + c.p(1, z - c64(h, 0.0)).unwrap())
            / (h * h);
        let p3 = c.p(3, z).unwrap();
        assert!((p3 - dd * 0.5).norm() < 1e-5, "{} vs {}", p3, dd * 0.5);
    }

    #[test]
    fn p2_elliptic_and_q_sum_oracle() {
        let tau = c64(0.1, 1.25);
        let c = ctx(tau);
        let z = c64(0.52, 0.33);
        let p2 = c.p(2, z).unwrap();
        // double periodicity
        let per1 = c.p(2, z + Complex64::i() * TWO_PI).unwrap();
        let per2 = c.p(2, z + Complex64::i() * TWO_PI * tau).unwrap();
        assert!((p2 - per1).norm() < 1e-12);
        assert!((p2 - per2).norm() < 1e-12);

        // independent q-sum: P_2(tau,z) = sum_n q_z q^n / (1 - q_z q^n)^2
        let q = c.q();
        let u = z.exp();
        // t/(1-t)^2 is invariant under t -> 1/t; use the small-modulus form
        let term = |t: Complex64| t / ((c64(1.0, 0.0) - t) * (c64(1.0, 0.0) - t));
        let mut acc = term(u);
        for n in 1i32..=60 {
            acc += term(u * q.powi(n));
            acc += term(q.powi(n) / u);
        }
        assert!((p2 - acc).norm() < 1e-12, "series {} vs q-sum {}", p2, acc);
    }

    #[test]
    fn p1_quasi_periodicity() {
        let tau = c64(0.08, 1.1);
        let c = ctx(tau);
        let z = c64(0.45, 0.2);
        let p1 = c.p(1, z).unwrap();
        let shifted = c.p(1, z + Complex64::i() * TWO_PI * tau).unwrap();
        assert!((shifted - (p1 - c64(1.0, 0.0))).norm() < 1e-12);
        let shifted2 = c.p(1, z + Complex64::i() * TWO_PI).unwrap();
        assert!((shifted2 - p1).norm() < 1e-12);
    }

    #[test]
    fn singularity_guard_trips() {
        let c = ctx(c64(0.0, 1.2));
        let near = c64(1e-9, 0.0);
        assert!(matches!(c.p(2, near), Err(Error::LatticeSingularity { .. })));
        let near_lattice = Complex64::i() * TWO_PI + c64(1e-9, 0.0);
        assert!(matches!(c.p(2, near_lattice), Err(Error::LatticeSingularity { .. })));
    }

    #[test]
    fn prime_form_basics() {
        let c = ctx(c64(0.0, 1.2));
        // K(z)/z -> 1 as z -> 0
        for r in [1e-2, 1e-3, 1e-4] {
            let z = c64(r, r / 2.0);
            let k = c.prime_form(z).unwrap();
            assert!((k / z - c64(1.0, 0.0)).norm() < 1e-3 * r);
        }
        // K is odd
        let z = c64(0.6, 0.35);
        let k = c.prime_form(z).unwrap();
        let kn = c.prime_form(-z).unwrap();
        assert!((k + kn).norm() < 1e-13);
        // (log K)'(z) = P_1(z), by central differences on exp(-P_0)
        let h = 1e-5;
        let dlog = (c.prime_form(z + c64(h, 0.0)).unwrap().ln()
            - c.prime_form(z - c64(h, 0.0)).unwrap().ln())
            / (2.0 * h);
        let p1 = c.p(1, z).unwrap();
        assert!((dlog - p1).norm() < 1e-8, "dlogK {} vs P1 {}", dlog, p1);
    }

    #[test]
    fn cd_coefficient_values() {
        let c = ctx(c64(0.0, 1.2));
        let z = c64(0.5, 0.3);
        // C(1,1) = E_2, D(1,1,z) = P_2(z)
        assert!((c.c_cd(1, 1) - c.e(2)).norm() < 1e-16);
        assert!((c.d_cd(1, 1, z).unwrap() - c.p(2, z).unwrap()).norm() < 1e-16);
        // C symmetry over a sample of (k,l)
        for k in 1..=6usize {
            for l in 1..=6usize {
                assert!((c.c_cd(k, l) - c.c_cd(l, k)).norm() < 1e-15, "C({},{})", k, l);
            }
        }
        // D(k,l,z) = (-1)^{k+l} D(l,k,z)
        for k in 1..=5usize {
            for l in 1..=5usize {
                let sign = if (k + l) % 2 == 0 { 1.0 } else { -1.0 };
                let a = c.d_cd(k, l, z).unwrap();
                let b = c.d_cd(l, k, z).unwrap();
                assert!((a - b * sign).norm() < 1e-12 * a.norm().max(1.0), "D({},{})", k, l);
            }
        }
        // D(2,2,z) = -6 P_4(z): the binomial route spelled out
        let d22 = c.d_cd(2, 2, z).unwrap();
        assert!((d22 + c.p(4, z).unwrap() * 6.0).norm() < 1e-13);
        // l = 0 cases
        assert!((c.c_cd(2, 0) + c.e(2)).norm() < 1e-16);
        assert!((c.d_cd(3, 0, z).unwrap() - c.p(3, z).unwrap()).norm() < 1e-16);
    }

    #[test]
    fn numeric_series_consistency_inside_half_radius() {
        // documented tolerance: series evaluation vs the independent q-sum
        // agrees to 1e-10 for |z| <= D(q)/2
        let tau = c64(-0.15, 1.05);
        let c = ctx(tau);
        let d = c.min_lattice_distance();
        let q = c.q();
        for t in 1..8 {
            let z = c64(0.05, 0.02) + c64(0.06, 0.055) * t as f64;
            if z.norm() > 0.5 * d {
                continue;
            }
            let u = z.exp();
            let term = |t: Complex64| t / ((c64(1.0, 0.0) - t) * (c64(1.0, 0.0) - t));
            let mut acc = term(u);
            for n in 1i32..=80 {
                acc += term(u * q.powi(n));
                acc += term(q.powi(n) / u);
            }
            let p2 = c.p(2, z).unwrap();
            assert!((p2 - acc).norm() < 1e-10, "z={} {} vs {}", z, p2, acc);
        }
    }
}
