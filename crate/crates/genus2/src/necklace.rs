//! Graphical (necklace / cycle) expansions of the sewing data.
//!
//! Nodes carry a pair (k, a) with k >= 1 and a in {1, 2}; an edge from
//! (k, a) to (l, b) has weight R_ab(k, l). A necklace is an oriented path
//! with distinguished ends; summing edge-weight products over all necklaces
//! between two nodes reproduces the entries of (I - R)^{-1} (the degenerate
//! single-node necklace contributes the identity). Rotationless oriented
//! cycles (aperiodic up to rotation, i.e. Lyndon classes) index the product
//! formula for the partition function.
//!
//! Everything here is explicit enumeration of label sequences with magnitude
//! pruning, deliberately independent of the LU inverse it cross-checks.

use crate::sewing::{bar, node_index, BlockMomentMatrix, PeriodMatrix, SewnSurface};
use crate::Result;
use nalgebra::DMatrix;
use num::complex::Complex64;

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Bounds for the graphical enumerations.
#[derive(Debug, Clone, Copy)]
pub struct NecklaceExpansionConfig {
    /// Maximum number of edges in a necklace path.
    pub max_necklace_len: usize,
    /// Maximum number of nodes in an oriented cycle.
    pub max_cycle_len: usize,
    /// Largest node label k enumerated.
    pub max_label: usize,
    /// Partial products below this magnitude are pruned.
    pub prune: f64,
}

impl Default for NecklaceExpansionConfig {
    fn default() -> Self {
        NecklaceExpansionConfig { max_necklace_len: 8, max_cycle_len: 8, max_label: 8, prune: 1e-16 }
    }
}

impl NecklaceExpansionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_necklace_len < 1 || self.max_cycle_len < 1 || self.max_label < 1 {
            return Err(crate::Error::InvalidInput("necklace bounds must be >= 1".into()));
        }
        Ok(())
    }
}

/// Sum of edge-weight products over all necklaces between every pair of
/// nodes, with path length <= max_necklace_len: an enumeration-based
/// approximation of (I - R)^{-1} including the degenerate identity term.
pub fn path_sum_matrix(r: &BlockMomentMatrix, cfg: &NecklaceExpansionConfig) -> DMatrix<Complex64> {
    let label_cap = cfg.max_label.min(r.k_max);
    let n_alpha = 2 * label_cap;
    let n = r.mat.nrows();
    let mut out = DMatrix::from_element(n, n, c64(0.0, 0.0));
    for i in 0..n {
        out[(i, i)] = c64(1.0, 0.0);
    }
    // DFS over label sequences from each start node
    fn dfs(
        r: &DMatrix<Complex64>,
        out: &mut DMatrix<Complex64>,
        start: usize,
        v: usize,
        prod: Complex64,
        depth: usize,
        max_depth: usize,
        n_alpha: usize,
        prune: f64,
    ) {
        if depth >= max_depth {
            return;
        }
        for w in 0..n_alpha {
            let next = prod * r[(v, w)];
            if next.norm() < prune {
                continue;
            }
            out[(start, w)] += next;
            dfs(r, out, start, w, next, depth + 1, max_depth, n_alpha, prune);
        }
    }
    for start in 0..n_alpha {
        dfs(
            &r.mat,
            &mut out,
            start,
            start,
            c64(1.0, 0.0),
            0,
            cfg.max_necklace_len,
            n_alpha,
            cfg.prune,
        );
    }
    out
}

/// Necklace sum between two specific end nodes (degenerate necklace
/// included when the ends coincide).
pub fn necklace_sum_between(
    r: &BlockMomentMatrix,
    cfg: &NecklaceExpansionConfig,
    from: (usize, usize),
    to: (usize, usize),
) -> Complex64 {
    let m = path_sum_matrix(r, cfg);
    m[(node_index(from.0, from.1), node_index(to.0, to.1))]
}

/// All rotationless oriented cycles (Lyndon representatives) with at most
/// `max_cycle_len` nodes and labels <= max_label, paired with their weights
/// zeta = product of edge weights around the cycle.
pub fn rotationless_cycles(
    r: &BlockMomentMatrix,
    cfg: &NecklaceExpansionConfig,
) -> Vec<(Vec<usize>, Complex64)> {
    let label_cap = cfg.max_label.min(r.k_max);
    let n_alpha = 2 * label_cap;
    let mut out = Vec::new();
    let mut seq = Vec::with_capacity(cfg.max_cycle_len);
    fn is_lyndon(seq: &[usize]) -> bool {
        // strictly smallest among its proper rotations
        let n = seq.len();
        for s in 1..n {
            for i in 0..n {
                let a = seq[i];
                let b = seq[(i + s) % n];
                if a < b {
                    break;
                }
                if a > b {
                    return false;
                }
                if i == n - 1 {
                    return false; // periodic
                }
            }
        }
        true
    }
    #[allow(clippy::too_many_arguments)]
    fn dfs(
        r: &DMatrix<Complex64>,
        seq: &mut Vec<usize>,
        v: usize,
        prod: Complex64,
        max_len: usize,
        n_alpha: usize,
        prune: f64,
        out: &mut Vec<(Vec<usize>, Complex64)>,
    ) {
        let start = seq[0];
        // close the cycle at the current node
        let closed = prod * r[(v, start)];
        if closed.norm() >= prune && is_lyndon(seq) {
            out.push((seq.clone(), closed));
        }
        if seq.len() >= max_len {
            return;
        }
        // the start node stays the minimum, so only continue with w >= start
        for w in start..n_alpha {
            let next = prod * r[(v, w)];
            if next.norm() < prune {
                continue;
            }
            seq.push(w);
            dfs(r, seq, w, next, max_len, n_alpha, prune, out);
            seq.pop();
        }
    }
    for start in 0..n_alpha {
        seq.clear();
        seq.push(start);
        dfs(&r.mat, &mut seq, start, c64(1.0, 0.0), cfg.max_cycle_len, n_alpha, cfg.prune, &mut out);
    }
    out
}

/// Sum over oriented cycle classes (including periodic repetitions of the
/// rotationless ones) of zeta / |Aut|, grouped as sum_r zeta_L^r / r. This
/// approximates -log det(I - R).
pub fn cycle_log_sum(r: &BlockMomentMatrix, cfg: &NecklaceExpansionConfig) -> Complex64 {
    let mut acc = c64(0.0, 0.0);
    for (seq, zeta) in rotationless_cycles(r, cfg) {
        // repetitions: r copies of the base cycle give a class with
        // |Aut| = r and weight zeta^r, as long as r * len stays in bounds
        let mut zr = zeta;
        let mut rep = 1usize;
        loop {
            acc += zr / rep as f64;
            rep += 1;
            if rep * seq.len() > cfg.max_cycle_len || zr.norm() < cfg.prune {
                break;
            }
            zr *= zeta;
        }
    }
    acc
}

/// Geometric tail estimate for dropping necklaces longer than `len` when the
/// spectral radius estimate is `sr`: sr^{len+1} / (1 - sr), times a scale.
pub fn geometric_tail(sr: f64, len: usize, scale: f64) -> f64 {
    if sr >= 1.0 {
        return f64::INFINITY;
    }
    scale * sr.powi(len as i32 + 1) / (1.0 - sr)
}

/// Tail estimate for capping node labels at `max_label`: the diagonal moment
/// entries at label k scale like (4 |chi|)^k with chi = -rho/w^2, so dropped
/// labels contribute at most a small multiple of the next power.
pub fn label_tail(chi_abs: f64, max_label: usize) -> f64 {
    let x = 4.0 * chi_abs;
    if x >= 1.0 {
        return f64::INFINITY;
    }
    4.0 * x.powi(max_label as i32 + 1) / (1.0 - x)
}

/// Combined graphical truncation estimate for a surface: length tail plus
/// label tail.
pub fn graphical_tail(surface: &SewnSurface, cfg: &NecklaceExpansionConfig) -> f64 {
    let sr = surface.det_inv.spectral_radius;
    let chi = (surface.rho() / (surface.w() * surface.w())).norm();
    geometric_tail(sr, cfg.max_necklace_len, 10.0) + label_tail(chi, cfg.max_label.min(surface.k_max))
}

/// Period matrix assembled from necklace enumerations (identical closed-form
/// assembly as the matrix route, with the enumerated path sum in place of
/// the LU inverse).
pub fn period_matrix_necklace(
    surface: &SewnSurface,
    cfg: &NecklaceExpansionConfig,
) -> Result<PeriodMatrix> {
    let m = path_sum_matrix(&surface.r, cfg);
    surface.period_matrix_with(&m)
}

pub fn omega2_necklace(
    surface: &SewnSurface,
    cfg: &NecklaceExpansionConfig,
    x: Complex64,
    y: Complex64,
) -> Result<Complex64> {
    let m = path_sum_matrix(&surface.r, cfg);
    surface.omega2_with(&m, x, y)
}

pub fn one_forms_necklace(
    surface: &SewnSurface,
    cfg: &NecklaceExpansionConfig,
    x: Complex64,
) -> Result<(Complex64, Complex64)> {
    let m = path_sum_matrix(&surface.r, cfg);
    surface.one_forms_with(&m, x)
}

/// The three end-weight contractions that assemble the period matrix:
/// zeta(1;1) = sigma(M(1,1)), zeta(d;1) = sigma((dM)(1)),
/// zeta(d;dbar) = d M dbar^T, evaluated on an explicit matrix M.
pub fn zeta_contractions(
    m: &DMatrix<Complex64>,
    d_row: &[Complex64],
    dbar_col: &[Complex64],
) -> (Complex64, Complex64, Complex64) {
    let mut z11 = c64(0.0, 0.0);
    for a in 1..=2 {
        for b in 1..=2 {
            z11 += m[(node_index(1, a), node_index(1, b))];
        }
    }
    let dm = crate::sewing::row_times_mat(d_row, m);
    let zd1 = dm[node_index(1, 1)] + dm[node_index(1, 2)];
    let zdd = crate::sewing::dot(&dm, dbar_col);
    (z11, zd1, zdd)
}

/// Contraction of the lattice end weights through M with the bar twist on
/// the left index: sum over nodes of xi(k, bar a) M[(k,a),(l,b)] xi(l, b).
/// With xi(k, a) = alpha_coef * delta_{k1} * rho^{1/2} + beta_coef * d_{bar a}(k)
/// this equals alpha^2 rho zeta(1;1) + 2 alpha beta rho^{1/2} zeta(d;1)
/// + beta^2 zeta(d;dbar).
pub fn end_weight_contraction(
    m: &DMatrix<Complex64>,
    d_row: &[Complex64],
    k_max: usize,
    sqrt_rho: Complex64,
    alpha_coef: Complex64,
    beta_coef: Complex64,
) -> Complex64 {
    let n = 2 * k_max;
    let xi = |k: usize, a: usize| -> Complex64 {
        let mut v = c64(0.0, 0.0);
        if k == 1 {
            v += alpha_coef * sqrt_rho;
        }
        v += beta_coef * d_row[node_index(k, bar(a))];
        v
    };
    let mut left = vec![c64(0.0, 0.0); n];
    let mut right = vec![c64(0.0, 0.0); n];
    for k in 1..=k_max {
        for a in 1..=2 {
            left[node_index(k, a)] = xi(k, bar(a));
            right[node_index(k, a)] = xi(k, a);
        }
    }
    let lm = crate::sewing::row_times_mat(&left, m);
    crate::sewing::dot(&lm, &right)
}
