//! Modular group actions on the sewing domain and the Siegel space, the
//! eta multiplier, partition-function equivariance, and the comparison
//! between the torus-self-sewing and two-tori-sewing parameterizations.
//!
//! SL(2,Z) acts on (tau, w, rho) by
//! ((a tau + b)/(c tau + d), w/(c tau + d), rho/(c tau + d)^2) and embeds
//! into Sp(4,Z) acting on the period matrix as (A Omega + B)(C Omega + D)^{-1}.
//! The period map intertwines the two actions up to the log branch in the
//! (2,2) entry, so comparisons of Omega_22 are taken mod 1.

use crate::elliptic::{eisenstein_value, eta_numeric, EllipticContext, TWO_PI};
use crate::fock::{catalan_power, catalan_value};
use crate::partition::z2_heisenberg;
use crate::series::TruncatedSeries;
use crate::sewing::{PeriodMatrix, SewingPoint, SewnSurface};
use crate::{Error, Result};
use num::complex::Complex64;
use num::{BigInt, BigRational};

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// An element of SL(2, Z).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gamma1Element {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Gamma1Element {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a * d - b * c != 1 {
            return Err(Error::InvalidInput(format!(
                "determinant {} != 1 for [[{},{}],[{},{}]]",
                a * d - b * c,
                a,
                b,
                c,
                d
            )));
        }
        Ok(Gamma1Element { a, b, c, d })
    }

    pub fn identity() -> Self {
        Gamma1Element { a: 1, b: 0, c: 0, d: 1 }
    }

    /// tau -> tau + 1
    pub fn t() -> Self {
        Gamma1Element { a: 1, b: 1, c: 0, d: 1 }
    }

    /// tau -> -1/tau
    pub fn s() -> Self {
        Gamma1Element { a: 0, b: -1, c: 1, d: 0 }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Gamma1Element {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn mobius(&self, tau: Complex64) -> Complex64 {
        (tau * self.a as f64 + self.b as f64) / (tau * self.c as f64 + self.d as f64)
    }

    pub fn denominator(&self, tau: Complex64) -> Complex64 {
        tau * self.c as f64 + self.d as f64
    }

    /// The embedding into Sp(4, Z) as four 2x2 integer blocks (A, B, C, D).
    pub fn embed_sp4(&self) -> ([[i64; 2]; 2], [[i64; 2]; 2], [[i64; 2]; 2], [[i64; 2]; 2]) {
        (
            [[self.a, 0], [0, 1]],
            [[self.b, 0], [0, 0]],
            [[self.c, 0], [0, 0]],
            [[self.d, 0], [0, 1]],
        )
    }
}

/// The SL(2,Z) part of the Jacobi action on the sewing domain.
pub fn gamma1_act(g: &Gamma1Element, tau: Complex64, w: Complex64, rho: Complex64) -> Result<SewingPoint> {
    let den = g.denominator(tau);
    SewingPoint::new(g.mobius(tau), w / den, rho / (den * den))
}

/// The translation part: w -> w + 2 pi i (a tau + b).
pub fn jacobi_translate(a: i64, b: i64, tau: Complex64, w: Complex64, rho: Complex64) -> Result<SewingPoint> {
    let shift = Complex64::i() * TWO_PI * (tau * a as f64 + c64(b as f64, 0.0));
    SewingPoint::new(tau, w + shift, rho)
}

/// Standard Sp(4,Z) action on the Siegel space through the embedding.
pub fn sp4_act(g: &Gamma1Element, om: &PeriodMatrix) -> Result<PeriodMatrix> {
    let (a, b, c, d) = g.embed_sp4();
    let rows = om.as_rows();
    let to_c = |m: [[i64; 2]; 2]| {
        [
            [c64(m[0][0] as f64, 0.0), c64(m[0][1] as f64, 0.0)],
            [c64(m[1][0] as f64, 0.0), c64(m[1][1] as f64, 0.0)],
        ]
    };
    let mul = |x: [[Complex64; 2]; 2], y: [[Complex64; 2]; 2]| {
        let mut out = [[c64(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
            }
        }
        out
    };
    let add = |x: [[Complex64; 2]; 2], y: [[Complex64; 2]; 2]| {
        let mut out = [[c64(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = x[i][j] + y[i][j];
            }
        }
        out
    };
    let num = add(mul(to_c(a), rows), to_c(b));
    let den = add(mul(to_c(c), rows), to_c(d));
    let det = den[0][0] * den[1][1] - den[0][1] * den[1][0];
    if det.norm() < 1e-14 {
        return Err(Error::Singular("C Omega + D is singular".into()));
    }
    let den_inv =
        [[den[1][1] / det, -den[0][1] / det], [-den[1][0] / det, den[0][0] / det]];
    let res = mul(num, den_inv);
    // symmetric up to rounding
    let omega12 = (res[0][1] + res[1][0]) * 0.5;
    let pm = PeriodMatrix {
        omega11: res[0][0],
        omega12,
        omega22: res[1][1],
        branch_tag: om.branch_tag,
    };
    if !pm.imaginary_part_positive_definite() {
        return Err(Error::NotInSiegelSpace("image of the Sp(4) action".into()));
    }
    Ok(pm)
}

/// det(C Omega + D) for the embedded action: c1 Omega11 + d1.
pub fn sp4_factor(g: &Gamma1Element, om: &PeriodMatrix) -> Complex64 {
    om.omega11 * g.c as f64 + c64(g.d as f64, 0.0)
}

/// The eta multiplier: eta(g tau)^{-2} = chi(g) eta(tau)^{-2} (c tau + d)^{-1},
/// evaluated numerically at a reference point and snapped to the nearest
/// twelfth root of unity.
pub fn eta_character(g: &Gamma1Element) -> Result<Complex64> {
    let tau0 = c64(0.21, 1.37);
    let image = g.mobius(tau0);
    let raw = eta_numeric(tau0).powi(2) / eta_numeric(image).powi(2) * g.denominator(tau0);
    let mut best = c64(1.0, 0.0);
    let mut best_dist = f64::INFINITY;
    for k in 0..12 {
        let root = (Complex64::i() * TWO_PI * k as f64 / 12.0).exp();
        let dist = (raw - root).norm();
        if dist < best_dist {
            best_dist = dist;
            best = root;
        }
    }
    if best_dist > 1e-6 {
        return Err(Error::SnapFailed(best_dist));
    }
    Ok(best)
}

/// Residuals of the period-map equivariance F(g pt) = g F(pt):
/// (|d11|, |d12|, |d22 mod 1|).
pub fn omega_equivariance_residuals(
    g: &Gamma1Element,
    surface: &SewnSurface,
    k_max: usize,
) -> Result<(f64, f64, f64)> {
    let om = surface.period_matrix()?;
    let target = sp4_act(g, &om)?;
    let pt = gamma1_act(g, surface.tau(), surface.w(), surface.rho())?;
    let moved = SewnSurface::new(pt.tau, pt.w, pt.rho, k_max)?.period_matrix()?;
    let d11 = (moved.omega11 - target.omega11).norm();
    let d12 = (moved.omega12 - target.omega12).norm();
    let delta22 = moved.omega22 - target.omega22;
    let d22 = (delta22 - c64(delta22.re.round(), 0.0)).norm();
    Ok((d11, d12, d22))
}

/// Relative residual of the weight -1 equivariance of the rank-2 partition
/// function: Z(g pt) (c1 O11 + d1) = chi(g) Z(pt).
pub fn z2_equivariance_residual(
    g: &Gamma1Element,
    surface: &SewnSurface,
    k_max: usize,
) -> Result<f64> {
    let om = surface.period_matrix()?;
    let z = z2_heisenberg(surface, 2)?.value;
    let pt = gamma1_act(g, surface.tau(), surface.w(), surface.rho())?;
    let moved = SewnSurface::new(pt.tau, pt.w, pt.rho, k_max)?;
    let z_moved = z2_heisenberg(&moved, 2)?.value;
    let chi = eta_character(g)?;
    Ok((z_moved * sp4_factor(g, &om) - chi * z).norm() / z.norm())
}

/// Relative residual of the weight -12 invariance of the rank-24 function.
pub fn z24_equivariance_residual(
    g: &Gamma1Element,
    surface: &SewnSurface,
    k_max: usize,
) -> Result<f64> {
    let om = surface.period_matrix()?;
    let z = z2_heisenberg(surface, 24)?.value;
    let pt = gamma1_act(g, surface.tau(), surface.w(), surface.rho())?;
    let moved = SewnSurface::new(pt.tau, pt.w, pt.rho, k_max)?;
    let z_moved = z2_heisenberg(&moved, 24)?.value;
    let factor = sp4_factor(g, &om).powi(12);
    Ok((z_moved * factor - z).norm() / z.norm())
}

/// The determinant correction of the equivariance proof:
/// det(I - R') = det(I - kappa S) det(I - R) with
/// det(I - kappa S) = (c1 O11 + d1)/(c1 tau + d1). Returns the absolute
/// residual of that identity at truncation k_max.
pub fn kappa_determinant_residual(
    g: &Gamma1Element,
    surface: &SewnSurface,
    k_max: usize,
) -> Result<f64> {
    let om = surface.period_matrix()?;
    let pt = gamma1_act(g, surface.tau(), surface.w(), surface.rho())?;
    let moved = SewnSurface::new(pt.tau, pt.w, pt.rho, k_max)?;
    let lhs = moved.det_inv.det;
    let kappa_det = sp4_factor(g, &om) / g.denominator(surface.tau());
    let rhs = kappa_det * surface.det_inv.det;
    Ok((lhs - rhs).norm())
}

/// A point of the two-tori sewing domain: |eps| < D(q1) D(q2) / 4.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonPoint {
    pub tau1: Complex64,
    pub tau2: Complex64,
    pub eps: Complex64,
}

fn min_lattice_distance(tau: Complex64) -> f64 {
    let mut d = f64::INFINITY;
    for m in -2i64..=2 {
        for n in -2i64..=2 {
            if (m, n) != (0, 0) {
                d = d.min(TWO_PI * (tau * m as f64 + c64(n as f64, 0.0)).norm());
            }
        }
    }
    d
}

impl EpsilonPoint {
    pub fn new(tau1: Complex64, tau2: Complex64, eps: Complex64) -> Result<Self> {
        if !(tau1.im > 0.0) || !(tau2.im > 0.0) {
            return Err(Error::OutsideDomain("both tori need Im(tau) > 0".into()));
        }
        let bound = 0.25 * min_lattice_distance(tau1) * min_lattice_distance(tau2);
        if eps.norm() >= bound {
            return Err(Error::OutsideDomain(format!(
                "|eps| = {:.4} >= D(q1) D(q2)/4 = {:.4}",
                eps.norm(),
                bound
            )));
        }
        Ok(EpsilonPoint { tau1, tau2, eps })
    }
}

/// Rank-2 two-tori partition function through fourth order in eps:
/// (eta(t1)^2 eta(t2)^2)^{-1} [1 + E2 E2 eps^2 + (E2^2 E2^2 + 15 E4 E4) eps^4].
/// Refuses points where the quartic term exceeds a thousandth of the total.
pub fn epsilon_z2_rank2(ept: &EpsilonPoint) -> Result<Complex64> {
    let q_order = 24;
    let q1 = (Complex64::i() * TWO_PI * ept.tau1).exp();
    let q2 = (Complex64::i() * TWO_PI * ept.tau2).exp();
    let e2_1 = eisenstein_value(2, q1, q_order);
    let e2_2 = eisenstein_value(2, q2, q_order);
    let e4_1 = eisenstein_value(4, q1, q_order);
    let e4_2 = eisenstein_value(4, q2, q_order);
    let eps2 = ept.eps * ept.eps;
    let eps4 = eps2 * eps2;
    let quartic = (e2_1 * e2_1 * e2_2 * e2_2 + e4_1 * e4_2 * 15.0) * eps4;
    let bracket = c64(1.0, 0.0) + e2_1 * e2_2 * eps2 + quartic;
    if quartic.norm() > 1e-3 * bracket.norm() {
        return Err(Error::SeriesUnreliable(format!(
            "quartic term {:.3e} exceeds 1e-3 of the bracket",
            quartic.norm()
        )));
    }
    Ok(1.0 / (eta_numeric(ept.tau1).powi(2) * eta_numeric(ept.tau2).powi(2)) * bracket)
}

/// Two-tori coordinates with an order-of-neglect estimate.
#[derive(Debug, Clone, Copy)]
pub struct TwoToriCoords {
    pub tau1: Complex64,
    pub tau2: Complex64,
    pub eps: Complex64,
    /// size of the first dropped terms (O(w^6) and O(chi) in the published
    /// route; O(r^6) in the inversion route)
    pub neglect: f64,
}

/// Published small-(w, chi) expansion:
/// 2 pi i tau1 = 2 pi i tau + w^2/12 + E_2(tau) w^4/144,
/// 2 pi i tau2 = Log chi + E_4(tau) w^4/12,
/// eps = -w - E_2(tau) w^3/12.
pub fn two_tori_coordinates(
    ell: &EllipticContext,
    w: Complex64,
    chi: Complex64,
) -> Result<TwoToriCoords> {
    if chi.norm() >= 0.25 {
        return Err(Error::OutsideDomain(format!("|chi| = {} >= 1/4", chi.norm())));
    }
    let two_pi_i = Complex64::i() * TWO_PI;
    let tau = ell.tau();
    let e2 = ell.e(2);
    let e4 = ell.e(4);
    let w2 = w * w;
    let w3 = w2 * w;
    let w4 = w2 * w2;
    let tau1 = tau + (w2 / 12.0 + e2 * w4 / 144.0) / two_pi_i;
    let tau2 = (chi.ln() + e4 * w4 / 12.0) / two_pi_i;
    let eps = -w - e2 * w3 / 12.0;
    let neglect = w.norm().powi(6) + chi.norm();
    Ok(TwoToriCoords { tau1, tau2, eps, neglect })
}

/// Inversion of the two-tori expansion of the period matrix around
/// r = 2 pi i Omega12 = 0: exact in chi through the period matrix, with
/// O(r^6) truncation.
pub fn two_tori_coordinates_from_omega(om: &PeriodMatrix) -> Result<TwoToriCoords> {
    let q_order = 24;
    let two_pi_i = Complex64::i() * TWO_PI;
    let r = om.omega12 * two_pi_i;
    let q11 = (two_pi_i * om.omega11).exp();
    let q22 = (two_pi_i * om.omega22).exp();
    if q11.norm() >= 1.0 || q22.norm() >= 1.0 {
        return Err(Error::OutsideDomain("Omega diagonal must lie in the upper half plane".into()));
    }
    let e2_11 = eisenstein_value(2, q11, q_order);
    let e2_22 = eisenstein_value(2, q22, q_order);
    let e4_11 = eisenstein_value(4, q11, q_order);
    let e4_22 = eisenstein_value(4, q22, q_order);
    let r2 = r * r;
    let r3 = r2 * r;
    let r4 = r2 * r2;
    let tau1 = om.omega11 + (-e2_22 * r2 + e2_11 * e4_22 * r4 * 5.0) / two_pi_i;
    let tau2 = om.omega22 + (-e2_11 * r2 + e2_22 * e4_11 * r4 * 5.0) / two_pi_i;
    let eps = -r + e2_11 * e2_22 * r3;
    Ok(TwoToriCoords { tau1, tau2, eps, neglect: r.norm().powi(6) })
}

/// The comparison ratio T = Z_eps(tau1, tau2, eps) / Z_rho(tau, w, -w^2 chi)
/// for rank 2, with the two-tori coordinates taken from the period matrix
/// (chi-exact route).
pub fn ratio_t(tau: Complex64, w: Complex64, chi: Complex64, k_max: usize) -> Result<Complex64> {
    let rho = -w * w * chi;
    let surface = SewnSurface::new(tau, w, rho, k_max)?;
    let om = surface.period_matrix()?;
    let coords = two_tori_coordinates_from_omega(&om)?;
    let ept = EpsilonPoint::new(coords.tau1, coords.tau2, coords.eps)?;
    let z_eps = epsilon_z2_rank2(&ept)?;
    let z_rho = z2_heisenberg(&surface, 2)?.value;
    Ok(z_eps / z_rho)
}

/// |f(chi)^{1/12} T - (1 - E_4(tau) w^4 / 288)|: the residual of the
/// comparison identity, which scales as O(w^6) at fixed small chi.
pub fn ratio_residual(tau: Complex64, w: Complex64, chi: Complex64, k_max: usize) -> Result<f64> {
    let t = ratio_t(tau, w, chi, k_max)?;
    let f = catalan_value(chi);
    let ell = EllipticContext::with_defaults(tau)?;
    let w4 = w * w * w * w;
    let target = c64(1.0, 0.0) - ell.e(4) * w4 / 288.0;
    Ok((f.powf(1.0 / 12.0) * t - target).norm())
}

/// G(chi) = 1/12 + E_2(q = f(chi)) as an exact rational series; the constant
/// terms cancel, so G = O(chi).
pub fn g_of_chi_series(order: i64) -> TruncatedSeries<BigRational> {
    let mut acc = TruncatedSeries::zero(order);
    for n in 1..order {
        // E_2 coefficient of q^n is 2 sigma_1(n); substitute q = f(chi)
        let sigma = crate::elliptic::divisor_sigma(1, n as u64);
        let coef = BigRational::from(BigInt::from(2) * BigInt::from(sigma));
        acc = acc.add(&catalan_power(n as u64, order).scale(&coef));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{ToPrimitive, Zero};
    use std::f64::consts::PI;

    fn standard_surface() -> SewnSurface {
        SewnSurface::new(c64(0.0, 1.2), c64(0.55, 0.3), c64(0.005, 0.0), 12).unwrap()
    }

    #[test]
    fn gamma1_basics_and_group_law() {
        assert!(Gamma1Element::new(2, 1, 1, 1).is_ok());
        assert!(Gamma1Element::new(2, 1, 1, 2).is_err());
        let t = Gamma1Element::t();
        let s = Gamma1Element::s();
        let tau = c64(0.1, 1.3);
        let w = c64(0.6, 0.35);
        let rho = c64(0.004, 0.001);
        // identity fixes the point
        let id = gamma1_act(&Gamma1Element::identity(), tau, w, rho).unwrap();
        assert!((id.tau - tau).norm() < 1e-15);
        // T shifts tau only
        let tp = gamma1_act(&t, tau, w, rho).unwrap();
        assert!((tp.tau - (tau + c64(1.0, 0.0))).norm() < 1e-15);
        assert!((tp.w - w).norm() < 1e-15);
        assert!((tp.rho - rho).norm() < 1e-15);
        // group law at the point
        let st = s.compose(&t);
        let via_compose = gamma1_act(&st, tau, w, rho).unwrap();
        let tpt = gamma1_act(&t, tau, w, rho).unwrap();
        let via_steps = gamma1_act(&s, tpt.tau, tpt.w, tpt.rho).unwrap();
        assert!((via_compose.tau - via_steps.tau).norm() < 1e-13);
        assert!((via_compose.w - via_steps.w).norm() < 1e-13);
        assert!((via_compose.rho - via_steps.rho).norm() < 1e-13);
        // Jacobi translation lands back in the domain
        let j = jacobi_translate(1, -1, tau, w, rho).unwrap();
        assert!((j.w - (w + Complex64::i() * TWO_PI * (tau - 1.0))).norm() < 1e-12);
    }

    #[test]
    fn sp4_action_on_siegel_space() {
        let s = standard_surface();
        let om = s.period_matrix().unwrap();
        let id = sp4_act(&Gamma1Element::identity(), &om).unwrap();
        assert!((id.omega11 - om.omega11).norm() < 1e-15);
        // closed form for the embedded action
        let g = Gamma1Element::new(2, 1, 1, 1).unwrap();
        let moved = sp4_act(&g, &om).unwrap();
        let den = om.omega11 * g.c as f64 + c64(g.d as f64, 0.0);
        let expect11 = (om.omega11 * g.a as f64 + c64(g.b as f64, 0.0)) / den;
        let expect12 = om.omega12 / den;
        let expect22 = om.omega22 - om.omega12 * om.omega12 * g.c as f64 / den;
        assert!((moved.omega11 - expect11).norm() < 1e-14);
        assert!((moved.omega12 - expect12).norm() < 1e-14);
        assert!((moved.omega22 - expect22).norm() < 1e-14);
    }

    #[test]
    fn eta_character_values() {
        let chi_id = eta_character(&Gamma1Element::identity()).unwrap();
        assert!((chi_id - c64(1.0, 0.0)).norm() < 1e-12);
        // eta(tau+1) = e^{i pi/12} eta(tau) gives chi(T) = e^{-i pi/6}
        let chi_t = eta_character(&Gamma1Element::t()).unwrap();
        let expect = (-Complex64::i() * PI / 6.0).exp();
        assert!((chi_t - expect).norm() < 1e-12, "{} vs {}", chi_t, expect);
        // twelfth roots of unity
        for g in [
            Gamma1Element::s(),
            Gamma1Element::new(2, 1, 1, 1).unwrap(),
            Gamma1Element::new(1, 0, 2, 1).unwrap(),
            Gamma1Element::new(3, -1, 1, 0).unwrap(),
        ] {
            let chi = eta_character(&g).unwrap();
            assert!((chi.powi(12) - c64(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn omega_equivariance_under_s_and_t() {
        let s = standard_surface();
        for g in [Gamma1Element::t(), Gamma1Element::s()] {
            let (d11, d12, d22) = omega_equivariance_residuals(&g, &s, 12).unwrap();
            assert!(d11 < 1e-7, "d11 {}", d11);
            assert!(d12 < 1e-7, "d12 {}", d12);
            assert!(d22 < 1e-7, "d22 {}", d22);
        }
    }

    #[test]
    fn z2_equivariance_and_kappa_identity() {
        let s = standard_surface();
        // T: exact up to chi(T), since E-series are q-periodic
        let rt = z2_equivariance_residual(&Gamma1Element::t(), &s, 12).unwrap();
        assert!(rt < 1e-12, "T residual {}", rt);
        // S at the standard point
        let rs = z2_equivariance_residual(&Gamma1Element::s(), &s, 12).unwrap();
        assert!(rs < 1e-5, "S residual {}", rs);
        let r24 = z24_equivariance_residual(&Gamma1Element::s(), &s, 12).unwrap();
        assert!(r24 < 1e-5, "rank-24 residual {}", r24);
        let rk = kappa_determinant_residual(&Gamma1Element::s(), &s, 12).unwrap();
        assert!(rk < 1e-8, "kappa determinant residual {}", rk);
    }

    #[test]
    fn epsilon_point_and_series_guard() {
        let t1 = c64(0.0, 1.2);
        let t2 = c64(0.1, 1.0);
        assert!(EpsilonPoint::new(t1, t2, c64(0.3, 0.0)).is_ok());
        assert!(EpsilonPoint::new(t1, t2, c64(20.0, 0.0)).is_err());
        let z = epsilon_z2_rank2(&EpsilonPoint::new(t1, t2, c64(0.0, 0.0)).unwrap()).unwrap();
        let expect = 1.0 / (eta_numeric(t1).powi(2) * eta_numeric(t2).powi(2));
        assert!((z - expect).norm() < 1e-13);
        // even in eps, symmetric under swapping the tori
        let za = epsilon_z2_rank2(&EpsilonPoint::new(t1, t2, c64(0.21, 0.07)).unwrap()).unwrap();
        let zb = epsilon_z2_rank2(&EpsilonPoint::new(t1, t2, c64(-0.21, -0.07)).unwrap()).unwrap();
        assert!((za - zb).norm() < 1e-14);
        let zc = epsilon_z2_rank2(&EpsilonPoint::new(t2, t1, c64(0.21, 0.07)).unwrap()).unwrap();
        assert!((za - zc).norm() < 1e-14);
    }

    #[test]
    fn coordinate_routes_differ_by_w6() {
        // the published route and the period-matrix inversion agree to
        // O(w^6) at small chi: halving w shrinks the gap by ~2^6
        // chi enters both routes only at O(chi w^k); it must be far below
        // the w^6 terms for the scaling to show
        let tau = c64(0.0, 1.2);
        let chi = c64(1e-10, 0.0);
        let ell = EllipticContext::with_defaults(tau).unwrap();
        let gap = |wv: f64| -> f64 {
            let w = c64(wv, 0.0);
            let a = two_tori_coordinates(&ell, w, chi).unwrap();
            let s = SewnSurface::new(tau, w, -w * w * chi, 12).unwrap();
            let b = two_tori_coordinates_from_omega(&s.period_matrix().unwrap()).unwrap();
            (a.tau1 - b.tau1).norm() + (a.eps - b.eps).norm() + (a.tau2 - b.tau2).norm()
        };
        let g1 = gap(0.4);
        let g2 = gap(0.2);
        let ratio = g1 / g2;
        assert!(ratio > 40.0 && ratio < 90.0, "gap ratio {}", ratio);

        // w = 0: tau1 = tau, eps = 0, 2 pi i tau2 = log chi
        let c0 = two_tori_coordinates(&ell, c64(0.0, 0.0), c64(0.05, 0.0)).unwrap();
        assert!((c0.tau1 - tau).norm() < 1e-15);
        assert!(c0.eps.norm() < 1e-15);
        let expect_tau2 = c64(0.05f64.ln(), 0.0) / (Complex64::i() * TWO_PI);
        assert!((c0.tau2 - expect_tau2).norm() < 1e-15);
    }

    #[test]
    fn g_of_chi_starts_at_first_order() {
        let g = g_of_chi_series(8);
        assert!(g.coeff(0).is_zero());
        assert_eq!(g.coeff(1).to_f64().unwrap(), 2.0);
        // numeric consistency: G(chi) = 1/12 + E_2(f(chi))
        let chi = c64(0.01, 0.0);
        let f = catalan_value(chi);
        let e2 = eisenstein_value(2, f, 24);
        let series_val: Complex64 = g
            .iter()
            .rev()
            .fold(c64(0.0, 0.0), |acc, (_, c)| acc * chi + c64(c.to_f64().unwrap(), 0.0));
        assert!((series_val - (e2 + 1.0 / 12.0)).norm() < 1e-10);
    }

    #[test]
    fn ratio_t_invariant_under_translation() {
        // under tau -> tau + 1 both partition functions pick up the same eta
        // multiplier, so the comparison ratio is unchanged
        let (w, chi) = (c64(0.4, 0.0), c64(0.01, 0.0));
        let t0 = ratio_t(c64(0.0, 1.2), w, chi, 10).unwrap();
        let t1 = ratio_t(c64(1.0, 1.2), w, chi, 10).unwrap();
        assert!((t0 - t1).norm() < 1e-10 * t0.norm(), "{} vs {}", t0, t1);
    }

    #[test]
    fn ratio_comparison_structure() {
        let tau = c64(0.0, 1.2);
        // at chi = 0.1 and small w the ratio tends to f^{-1/12}, far from 1
        let chi = c64(0.1, 0.0);
        let t = ratio_t(tau, c64(0.05, 0.0), chi, 12).unwrap();
        assert!((t - c64(1.0, 0.0)).norm() > 1e-3, "|T - 1| = {}", (t - c64(1.0, 0.0)).norm());
        let f = catalan_value(chi);
        assert!(
            (t - f.powf(-1.0 / 12.0)).norm() < 1e-3,
            "T {} vs f^(-1/12) {}",
            t,
            f.powf(-1.0 / 12.0)
        );
        // residual scales as w^6 at small chi; w large enough that the
        // quartic-term zero crossing near w ~ 0.2 stays out of the way
        let chi = c64(1e-3, 0.0);
        let r1 = ratio_residual(tau, c64(1.2, 0.0), chi, 12).unwrap();
        let r2 = ratio_residual(tau, c64(0.6, 0.0), chi, 12).unwrap();
        let ratio = r1 / r2;
        assert!(ratio > 54.0 && ratio < 74.0, "halving ratio {}", ratio);
    }
}
