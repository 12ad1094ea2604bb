//! Genus-two free-boson partition functions and low n-point functions.
//!
//! The rank-one partition function is eta(tau)^{-1} det(I - R)^{-1/2}; rank l
//! is its l-th power. The square-root branch is fixed by continuation from
//! rho = 0 (where det = 1), which is exactly the branch delivered by the
//! trace-anchored log determinant of the sewing module. Two independent
//! routes cross-check the determinant: the rotationless-cycle product formula
//! and the Fock-space rho-series oracle.

use crate::elliptic::{inv_eta_of_nome, EllipticContext, TWO_PI};
use crate::fock;
use crate::necklace::{self, NecklaceExpansionConfig};
use crate::series::TruncatedSeries;
use crate::sewing::{build_r_series, logdet_series, CSeries, SewnSurface};
use crate::Result;
use num::complex::Complex64;
use serde::Serialize;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZFormula {
    Determinant,
    Product,
    OracleSeries,
}

/// A partition-function value with its provenance and truncation estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PartitionFunctionValue {
    #[serde(with = "crate::json")]
    pub value: Complex64,
    pub k_trunc: usize,
    pub tail_bound: f64,
    pub formula: ZFormula,
}

/// Z^{(2)} for l free bosons: (eta^{-1} det(I-R)^{-1/2})^l with the branch
/// continued from rho = 0.
pub fn z2_heisenberg(surface: &SewnSurface, rank: u32) -> Result<PartitionFunctionValue> {
    let l = rank as f64;
    let eta = surface.ctx.ell.eta();
    let value = (-surface.det_inv.log_det * (l / 2.0)).exp() / eta.powi(rank as i32);
    let logdet_tail = surface.logdet_tail_estimate()?;
    let tail_bound = value.norm() * (l / 2.0) * logdet_tail.max(f64::EPSILON);
    Ok(PartitionFunctionValue {
        value,
        k_trunc: surface.k_max,
        tail_bound,
        formula: ZFormula::Determinant,
    })
}

/// Rank-one product formula: eta^{-1} prod over rotationless cycles of
/// (1 - zeta(N))^{-1/2}, truncated at the configured cycle length.
pub fn z2_product_formula(
    surface: &SewnSurface,
    cfg: &NecklaceExpansionConfig,
) -> Result<PartitionFunctionValue> {
    cfg.validate()?;
    let mut log_sum = c64(0.0, 0.0);
    for (_, zeta) in necklace::rotationless_cycles(&surface.r, cfg) {
        log_sum += (c64(1.0, 0.0) - zeta).ln();
    }
    let eta = surface.ctx.ell.eta();
    let value = (-log_sum * 0.5).exp() / eta;
    let tail = necklace::graphical_tail(surface, cfg);
    Ok(PartitionFunctionValue {
        value,
        k_trunc: cfg.max_label.min(surface.k_max),
        tail_bound: value.norm() * 0.5 * tail,
        formula: ZFormula::Product,
    })
}

/// eta(tau) Z^{(2)} as a series in s = rho^{1/2} from the determinant route:
/// exp(-(1/2) log det(I-R)(s)).
pub fn eta_z2_det_series(
    ell: &EllipticContext,
    w: Complex64,
    k_max: usize,
    s_trunc: i64,
) -> Result<CSeries> {
    let r = build_r_series(ell, w, k_max, s_trunc)?;
    let ld = logdet_series(&r);
    Ok(ld.scale(&c64(-0.5, 0.0)).exp())
}

/// The same quantity from the Fock-space oracle, re-indexed from rho-powers
/// to s-powers for direct comparison.
pub fn eta_z2_oracle_series(
    ell: &EllipticContext,
    w: Complex64,
    max_weight: u32,
) -> Result<CSeries> {
    let rho_series = fock::eta_z2_series_oracle(ell, w, max_weight)?;
    let s_trunc = 2 * (max_weight as i64) + 2;
    let mut out = TruncatedSeries::zero(s_trunc);
    for (n, c) in rho_series.iter() {
        out = out.add(&TruncatedSeries::monomial(*c, 2 * n, s_trunc));
    }
    Ok(out)
}

/// Heisenberg n-point function: zero for odd n, and for even n the partition
/// function times the sum over fixed-point-free pairings of products of
/// omega^(2) at the paired insertion points.
pub fn heisenberg_npoint(surface: &SewnSurface, points: &[Complex64]) -> Result<Complex64> {
    let n = points.len();
    if n % 2 == 1 {
        return Ok(c64(0.0, 0.0));
    }
    let z2 = z2_heisenberg(surface, 1)?.value;
    if n == 0 {
        return Ok(z2);
    }
    // pairwise omega table (symmetric)
    let mut table = vec![c64(0.0, 0.0); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let o = surface.omega2(points[i], points[j])?;
            table[i * n + j] = o;
            table[j * n + i] = o;
        }
    }
    let mut sym = c64(0.0, 0.0);
    fock::for_each_perfect_matching(n, |pairs| {
        let mut prod = c64(1.0, 0.0);
        for &(i, j) in pairs {
            prod *= table[i * n + j];
        }
        sym += prod;
    });
    Ok(z2 * sym)
}

/// Virasoro 1-point function for the rank-one boson:
/// Z^{(2)} s^{(2)}(x) / 12.
pub fn virasoro_onepoint(surface: &SewnSurface, x: Complex64) -> Result<Complex64> {
    let z2 = z2_heisenberg(surface, 1)?.value;
    Ok(z2 * surface.projective_connection(x)? / 12.0)
}

/// One row of a holomorphy scan: Wirtinger residuals of Z^{(2)} in each of
/// tau, w, rho by central differences, plus |det(I - R)| at the point.
#[derive(Debug, Clone, Serialize)]
pub struct HolomorphyRow {
    #[serde(with = "crate::json")]
    pub tau: Complex64,
    #[serde(with = "crate::json")]
    pub w: Complex64,
    #[serde(with = "crate::json")]
    pub rho: Complex64,
    pub residual_tau: f64,
    pub residual_w: f64,
    pub residual_rho: f64,
    pub det_norm: f64,
}

fn wirtinger_residual(f: impl Fn(Complex64) -> Result<Complex64>, p: Complex64, h: f64) -> Result<f64> {
    let dx = (f(p + c64(h, 0.0))? - f(p - c64(h, 0.0))?) / (2.0 * h);
    let dy = (f(p + c64(0.0, h))? - f(p - c64(0.0, h))?) / (2.0 * h);
    Ok(((dx + Complex64::i() * dy) * 0.5).norm())
}

pub fn holomorphy_scan(
    grid: &[(Complex64, Complex64, Complex64)],
    k_max: usize,
    h: f64,
) -> Result<Vec<HolomorphyRow>> {
    let z_at = |tau: Complex64, w: Complex64, rho: Complex64| -> Result<Complex64> {
        let s = SewnSurface::new(tau, w, rho, k_max)?;
        Ok((-s.det_inv.log_det * 0.5).exp() / s.ctx.ell.eta())
    };
    let mut out = Vec::with_capacity(grid.len());
    for &(tau, w, rho) in grid {
        let det_norm = SewnSurface::new(tau, w, rho, k_max)?.det_inv.det.norm();
        let rt = wirtinger_residual(|t| z_at(t, w, rho), tau, h)?;
        let rw = wirtinger_residual(|ww| z_at(tau, ww, rho), w, h)?;
        let rr = wirtinger_residual(|r| z_at(tau, w, r), rho, h)?;
        out.push(HolomorphyRow {
            tau,
            w,
            rho,
            residual_tau: rt,
            residual_w: rw,
            residual_rho: rr,
            det_norm,
        });
    }
    Ok(out)
}

/// Report of the two-tori degeneration: at fixed chi, rho = -w^2 chi, the
/// period matrix tends to diag(tau, log f(chi)/2 pi i) and Z^{(2)} tends to
/// f(chi)^{1/24} Z^{(1)}(q) Z^{(1)}(f(chi)), both at rate O(w^2); the
/// off-diagonal entry closes linearly in w.
#[derive(Debug, Clone, Serialize)]
pub struct DegenerationReport {
    pub rows: Vec<DegenerationRow>,
    /// residual(w_i) / residual(w_{i+1}) for the O(w^2) quantities
    pub ratios: Vec<f64>,
    pub omega12_ratios: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegenerationRow {
    #[serde(with = "crate::json")]
    pub w: Complex64,
    pub omega11_residual: f64,
    pub omega22_residual: f64,
    pub omega12_norm: f64,
    pub z_residual: f64,
    /// combined O(w^2) residual used for the ratio test
    pub residual: f64,
}

pub fn degeneration_limit_check(
    tau: Complex64,
    chi: Complex64,
    w_values: &[Complex64],
    k_max: usize,
) -> Result<DegenerationReport> {
    let f_chi = fock::catalan_value(chi);
    let omega22_target = f_chi.ln() / (Complex64::i() * TWO_PI);
    let mut rows = Vec::new();
    for &w in w_values {
        let rho = -w * w * chi;
        let s = SewnSurface::new(tau, w, rho, k_max)?;
        let om = s.period_matrix()?;
        let z = z2_heisenberg(&s, 1)?.value;
        let z_target = f_chi.powf(1.0 / 24.0) / s.ctx.ell.eta() * inv_eta_of_nome(f_chi);
        let r11 = (om.omega11 - tau).norm();
        let r22 = (om.omega22 - omega22_target).norm();
        let rz = (z - z_target).norm();
        rows.push(DegenerationRow {
            w,
            omega11_residual: r11,
            omega22_residual: r22,
            omega12_norm: om.omega12.norm(),
            z_residual: rz,
            residual: r11 + r22 + rz,
        });
    }
    let ratios = rows.windows(2).map(|p| p[0].residual / p[1].residual).collect();
    let omega12_ratios = rows.windows(2).map(|p| p[0].omega12_norm / p[1].omega12_norm).collect();
    Ok(DegenerationReport { rows, ratios, omega12_ratios })
}

/// Continue Z^{(2)} along the closed loop rho e^{i theta}, theta from 0 to
/// 2 pi, and report the largest step jump and the loop closure error. Inside
/// the sewing domain det(I - R) never winds around zero, so the continued
/// value must return to its start.
pub fn z2_loop_continuation(
    tau: Complex64,
    w: Complex64,
    rho: Complex64,
    k_max: usize,
    steps: usize,
) -> Result<(f64, f64)> {
    let mut prev: Option<Complex64> = None;
    let mut first = c64(0.0, 0.0);
    let mut max_jump = 0.0f64;
    let mut last = c64(0.0, 0.0);
    for i in 0..=steps {
        let theta = TWO_PI * i as f64 / steps as f64;
        let r = rho * (Complex64::i() * theta).exp();
        let s = SewnSurface::new(tau, w, r, k_max)?;
        let z = z2_heisenberg(&s, 1)?.value;
        if let Some(p) = prev {
            max_jump = max_jump.max((z - p).norm());
        } else {
            first = z;
        }
        prev = Some(z);
        last = z;
    }
    Ok((max_jump, (last - first).norm()))
}
