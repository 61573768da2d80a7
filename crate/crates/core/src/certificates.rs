//! Robust and optimistic statistical certificates.
//!
//! The robust certificate is per-grid-point counting of direct win/loss
//! outcomes with Hoeffding radii. The optimistic certificate turns each
//! round into linear measurements of the grid vector F = (F_B(q))_q: a
//! one-hot direct row per outcome, plus suffix-difference rows built from
//! debiased losing-side reports, combined by weighted least squares with a
//! Freedman-style radius. Candidate shill scales are raced over the dyadic
//! set, gated by an admissibility test on the known shill CDF.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::PiecewiseCdf;
use crate::linalg::SymPinv;

/// Relative tolerance of the numerical range-membership test.
pub const RANGE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CertError {
    #[error("grid index {idx} out of range (grid has {len} points)")]
    BadIndex { idx: usize, len: usize },
    #[error("grid point index {0} has no observations")]
    Unvisited(usize),
    #[error("debiasing denominator F_S(q) = {0} is not positive")]
    DivisionUnsafe(f64),
}

pub type Result<T> = std::result::Result<T, CertError>;

// ---------------------------------------------------------------------------
// Epoch grid
// ---------------------------------------------------------------------------

/// The global dyadic bid grid of one epoch: points j·2^{-level}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicGrid {
    pub level: u32,
}

impl DyadicGrid {
    pub fn mesh(&self) -> f64 {
        0.5_f64.powi(self.level as i32)
    }

    pub fn len(&self) -> usize {
        (1usize << self.level) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, idx: usize) -> f64 {
        idx as f64 * self.mesh()
    }

    /// Largest grid index with point ≤ x (x in [0,1]).
    pub fn floor_index(&self, x: f64) -> usize {
        ((x * (1u64 << self.level) as f64).floor() as usize).min(self.len() - 1)
    }

    /// Smallest grid index with point ≥ x.
    pub fn ceil_index(&self, x: f64) -> usize {
        ((x * (1u64 << self.level) as f64).ceil() as usize).min(self.len() - 1)
    }
}

// ---------------------------------------------------------------------------
// Robust certificate
// ---------------------------------------------------------------------------

/// Per-grid-point counts and empirical win rates, epoch-local.
#[derive(Debug, Clone)]
pub struct RobustCertificate {
    counts: Vec<u64>,
    means: Vec<f64>,
}

impl RobustCertificate {
    pub fn new(grid: &DyadicGrid) -> Self {
        RobustCertificate {
            counts: vec![0; grid.len()],
            means: vec![0.0; grid.len()],
        }
    }

    pub fn count(&self, idx: usize) -> u64 {
        self.counts[idx]
    }

    pub fn mean(&self, idx: usize) -> f64 {
        self.means[idx]
    }

    /// Running-mean update with a direct win/loss outcome.
    pub fn update(&mut self, idx: usize, outcome: bool) -> Result<()> {
        if idx >= self.counts.len() {
            return Err(CertError::BadIndex {
                idx,
                len: self.counts.len(),
            });
        }
        self.counts[idx] += 1;
        let y = outcome as u8 as f64;
        self.means[idx] += (y - self.means[idx]) / self.counts[idx] as f64;
        Ok(())
    }

    /// Plug-in gap estimate (v-q)F̂(q) - (v-p)F̂(p) on grid indices.
    pub fn gap(&self, grid: &DyadicGrid, v: f64, q_idx: usize, p_idx: usize) -> Result<f64> {
        for &i in &[q_idx, p_idx] {
            if i >= self.counts.len() {
                return Err(CertError::BadIndex {
                    idx: i,
                    len: self.counts.len(),
                });
            }
            if self.counts[i] == 0 {
                return Err(CertError::Unvisited(i));
            }
        }
        Ok((v - grid.point(q_idx)) * self.means[q_idx]
            - (v - grid.point(p_idx)) * self.means[p_idx])
    }

    /// Largest Hoeffding radius over the active index range; +inf if any
    /// active point is unvisited.
    pub fn radius(&self, active: (usize, usize), t_horizon: u64, delta: f64) -> f64 {
        let log_term = (2.0 * t_horizon as f64 / delta).ln();
        let mut worst = 0.0_f64;
        for idx in active.0..=active.1 {
            let n = self.counts[idx];
            if n == 0 {
                return f64::INFINITY;
            }
            worst = worst.max((2.0 * log_term / n as f64).sqrt());
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// Measurements and the optimistic accumulator
// ---------------------------------------------------------------------------

/// Debiased suffix observation Y_t(q) = 1{won} + 1{lost}·1{o ≤ q}/F_S(q),
/// an unbiased estimate of F_B(q) for grid bids q at or above the played bid.
pub fn debiased_suffix_obs(won: bool, report: Option<f64>, q: f64, fs_at_q: f64) -> Result<f64> {
    if won {
        return Ok(1.0);
    }
    if fs_at_q <= 0.0 {
        return Err(CertError::DivisionUnsafe(fs_at_q));
    }
    let o = report.expect("lost round carries a report");
    Ok(if o <= q { 1.0 / fs_at_q } else { 0.0 })
}

/// Dedup key of a measurement row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MeasKey {
    /// One-hot row e_q.
    Direct { idx: usize },
    /// Two-coefficient row a_{j+1} e_{j+1} - a_j e_j for the value class of
    /// `v_bits`, where `pair` is the lower grid index j.
    Suffix { v_bits: u64, pair: usize },
}

/// A single linear measurement before deduplication.
#[derive(Debug, Clone, Copy)]
pub struct Measurement {
    pub key: MeasKey,
    /// (index, coefficient) pairs; direct rows use one, suffix rows two.
    pub coeffs: [(usize, f64); 2],
    pub n_coeffs: usize,
    pub response: f64,
}

/// Builds one suffix-difference measurement per adjacent active pair at or
/// above the played bid. `y` holds Y-values for indices p_idx..=hi; pairs
/// whose Y is unavailable (masked shill support) are skipped.
pub fn suffix_difference_rows(
    v: f64,
    grid: &DyadicGrid,
    active: (usize, usize),
    p_idx: usize,
    y: &[Option<f64>],
) -> Vec<Measurement> {
    let (lo, hi) = active;
    debug_assert!(lo <= p_idx && p_idx <= hi);
    debug_assert_eq!(y.len(), hi - p_idx + 1);
    let mut rows = Vec::new();
    for j in p_idx..hi {
        let (y_lo, y_hi) = match (y[j - p_idx], y[j + 1 - p_idx]) {
            (Some(a), Some(b)) => (a, b),
            _ => continue,
        };
        let a_lo = v - grid.point(j);
        let a_hi = v - grid.point(j + 1);
        rows.push(Measurement {
            key: MeasKey::Suffix {
                v_bits: v.to_bits(),
                pair: j,
            },
            coeffs: [(j, -a_lo), (j + 1, a_hi)],
            n_coeffs: 2,
            response: a_hi * y_hi - a_lo * y_lo,
        });
    }
    let _ = lo;
    rows
}

#[derive(Debug, Clone, Copy, Default)]
struct KeyStats {
    count: u64,
    response_sum: f64,
    /// Coefficients of the deduplicated row (identical across repeats).
    coeffs: [(usize, f64); 2],
    n_coeffs: usize,
}

/// Deduplicated measurement store with the Gram/moment sums of the
/// weighted least-squares certificate. Epoch-local.
#[derive(Debug, Clone)]
pub struct OptimisticAccumulator {
    grid: DyadicGrid,
    /// Direct counts and response sums per grid index.
    direct_counts: Vec<u64>,
    direct_sums: Vec<f64>,
    /// Suffix rows keyed by (value bits, lower pair index).
    suffix: BTreeMap<(u64, usize), KeyStats>,
}

impl OptimisticAccumulator {
    pub fn new(grid: &DyadicGrid) -> Self {
        OptimisticAccumulator {
            grid: *grid,
            direct_counts: vec![0; grid.len()],
            direct_sums: vec![0.0; grid.len()],
            suffix: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> DyadicGrid {
        self.grid
    }

    pub fn record_direct(&mut self, idx: usize, outcome: bool) {
        self.direct_counts[idx] += 1;
        self.direct_sums[idx] += outcome as u8 as f64;
    }

    pub fn record(&mut self, m: &Measurement) {
        match m.key {
            MeasKey::Direct { idx } => {
                self.direct_counts[idx] += 1;
                self.direct_sums[idx] += m.response;
            }
            MeasKey::Suffix { v_bits, pair } => {
                let e = self.suffix.entry((v_bits, pair)).or_insert(KeyStats {
                    coeffs: m.coeffs,
                    n_coeffs: m.n_coeffs,
                    ..Default::default()
                });
                e.count += 1;
                e.response_sum += m.response;
            }
        }
    }

    pub fn direct_count(&self, idx: usize) -> u64 {
        self.direct_counts[idx]
    }

    pub fn n_suffix_keys(&self) -> usize {
        self.suffix.len()
    }

    pub fn total_suffix_rows(&self) -> u64 {
        self.suffix.values().map(|s| s.count).sum()
    }

    /// Assembles G = G_dir + ω·G_suf and z = z_dir + ω·z_suf over the index
    /// window [wlo, whi].
    pub fn build(&self, omega: f64, window: (usize, usize)) -> (DMatrix<f64>, DVector<f64>) {
        let (wlo, whi) = window;
        let k = whi - wlo + 1;
        let mut g = DMatrix::zeros(k, k);
        let mut z = DVector::zeros(k);
        for i in 0..k {
            g[(i, i)] = self.direct_counts[wlo + i] as f64;
            z[i] = self.direct_sums[wlo + i];
        }
        for st in self.suffix.values() {
            let (j, c_lo) = st.coeffs[0];
            let (j1, c_hi) = st.coeffs[1];
            if j < wlo || j1 > whi {
                continue;
            }
            let (a, b) = (j - wlo, j1 - wlo);
            let n = st.count as f64;
            g[(a, a)] += omega * n * c_lo * c_lo;
            g[(b, b)] += omega * n * c_hi * c_hi;
            g[(a, b)] += omega * n * c_lo * c_hi;
            g[(b, a)] += omega * n * c_lo * c_hi;
            z[a] += omega * c_lo * st.response_sum;
            z[b] += omega * c_hi * st.response_sum;
        }
        (g, z)
    }

    fn keys_for_certificate(
        &self,
        window: (usize, usize),
    ) -> impl Iterator<Item = (&'static str, [(usize, f64); 2], usize)> + '_ {
        let (wlo, whi) = window;
        let direct = (wlo..=whi).filter_map(move |idx| {
            if self.direct_counts[idx] > 0 {
                Some(("dir", [(idx, 1.0), (0, 0.0)], 1usize))
            } else {
                None
            }
        });
        let suffix = self.suffix.values().filter_map(move |st| {
            let (j, _) = st.coeffs[0];
            let (j1, _) = st.coeffs[1];
            if j >= wlo && j1 <= whi {
                Some(("suf", st.coeffs, st.n_coeffs))
            } else {
                None
            }
        });
        direct.chain(suffix)
    }
}

// ---------------------------------------------------------------------------
// Weighted least squares, gaps, radii
// ---------------------------------------------------------------------------

/// Suffix weight ω_{m,γ̄} = γ̄ / (C_suf (2^{-m} + h_m)).
pub fn candidate_weight(gamma_bar: f64, m: u32, h_m: f64, c_suf: f64) -> f64 {
    gamma_bar / (c_suf * (0.5_f64.powi(m as i32) + h_m))
}

/// All dyadic candidates admissible on every class's active grid:
/// F_S(q) ≥ γ̄ at each active point and adjacent increments of F_S at most
/// C_val·γ̄·h_m within each class.
pub fn admissible_candidates(
    shill: &PiecewiseCdf,
    grid: &DyadicGrid,
    active_ranges: &[(usize, usize)],
    candidates: &[f64],
    c_val: f64,
) -> Vec<f64> {
    let mut min_fs = f64::INFINITY;
    let mut max_inc = 0.0_f64;
    for &(lo, hi) in active_ranges {
        let mut prev = None;
        for idx in lo..=hi {
            let fs = shill.eval(grid.point(idx)).expect("grid point in [0,1]");
            min_fs = min_fs.min(fs);
            if let Some(p) = prev {
                max_inc = max_inc.max(fs - p);
            }
            prev = Some(fs);
        }
    }
    let h_m = grid.mesh();
    candidates
        .iter()
        .copied()
        .filter(|&gb| min_fs >= gb && max_inc <= c_val * gb * h_m)
        .collect()
}

/// The dyadic candidate set Γ = {2^{-l} : 0 ≤ l ≤ ceil(log2 T)}.
pub fn dyadic_candidates(t_horizon: u64) -> Vec<f64> {
    let top = (t_horizon.max(2) as f64).log2().ceil() as i32;
    (0..=top).map(|l| 0.5_f64.powi(l)).collect()
}

/// Solved weighted least-squares certificate for one candidate weight.
#[derive(Debug, Clone)]
pub struct WlsSolution {
    pub window: (usize, usize),
    pub gram: DMatrix<f64>,
    pub pinv: SymPinv,
    pub f_hat: DVector<f64>,
}

/// F̂ = G† z with G = G_dir + ω G_suf over the window.
pub fn solve_wls(acc: &OptimisticAccumulator, omega: f64, window: (usize, usize)) -> WlsSolution {
    let (g, z) = acc.build(omega, window);
    let pinv = SymPinv::new(&g);
    let f_hat = pinv.apply(&z);
    WlsSolution {
        window,
        gram: g,
        pinv,
        f_hat,
    }
}

/// Optimistic gap estimate g_{v,i,j}^T F̂ = (v-q_i)F̂_i - (v-q_j)F̂_j.
pub fn optimistic_gap(
    sol: &WlsSolution,
    grid: &DyadicGrid,
    v: f64,
    i_idx: usize,
    j_idx: usize,
) -> f64 {
    let (wlo, _) = sol.window;
    (v - grid.point(i_idx)) * sol.f_hat[i_idx - wlo]
        - (v - grid.point(j_idx)) * sol.f_hat[j_idx - wlo]
}

/// Whether the two-coordinate direction g_{v,i,j} lies in range(G).
pub fn range_membership(
    sol: &WlsSolution,
    v: f64,
    grid: &DyadicGrid,
    i_idx: usize,
    j_idx: usize,
) -> bool {
    let (wlo, _) = sol.window;
    let k = sol.gram.nrows();
    let mut g = DVector::zeros(k);
    g[i_idx - wlo] += v - grid.point(i_idx);
    g[j_idx - wlo] -= v - grid.point(j_idx);
    sol.pinv.in_range(&g, RANGE_TOL)
}

/// Confidence-radius inputs shared across candidates.
#[derive(Debug, Clone, Copy)]
pub struct RadiusParams {
    pub t_horizon: u64,
    pub delta: f64,
    pub n_candidates: usize,
}

impl RadiusParams {
    pub fn log_term(&self) -> f64 {
        (2.0 * self.t_horizon as f64 * self.n_candidates as f64 / self.delta).ln()
    }
}

/// Freedman-style radius for one value class under candidate γ̄:
/// sqrt(2·log(2T|Γ|/δ)·Q) + (2/3)·log(2T|Γ|/δ)·B, where Q is the largest
/// inverse-Gram quadratic form over active pairs and B the range certificate
/// over stored deduplicated rows; +inf if any pair leaves range(G).
#[allow(clippy::too_many_arguments)]
pub fn optimistic_radius(
    sol: &WlsSolution,
    acc: &OptimisticAccumulator,
    gamma_bar: f64,
    omega: f64,
    grid: &DyadicGrid,
    v: f64,
    active: (usize, usize),
    params: &RadiusParams,
) -> f64 {
    optimistic_radius_parts(sol, acc, gamma_bar, omega, grid, v, active, params).2
}

/// As [`optimistic_radius`], additionally exposing (Q, B, radius).
#[allow(clippy::too_many_arguments)]
pub fn optimistic_radius_parts(
    sol: &WlsSolution,
    acc: &OptimisticAccumulator,
    gamma_bar: f64,
    omega: f64,
    grid: &DyadicGrid,
    v: f64,
    active: (usize, usize),
    params: &RadiusParams,
) -> (f64, f64, f64) {
    let (wlo, whi) = sol.window;
    let (lo, hi) = active;
    if lo < wlo || hi > whi {
        // Points outside the solved window are unidentified.
        return (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    }
    let k = hi - lo + 1;
    if k <= 1 {
        return (0.0, 0.0, 0.0);
    }
    let p = sol.pinv.pinv();
    let a: Vec<f64> = (lo..=hi).map(|idx| v - grid.point(idx)).collect();

    // Range membership for every active pair; the null-space basis is empty
    // in the typical full-rank case so this is cheap.
    let has_null = sol.pinv.eigenvalues.iter().any(|&l| l <= sol.pinv.cutoff);
    if has_null {
        for i in 0..k {
            for j in (i + 1)..k {
                let mut null_sq = 0.0;
                for (col, &l) in sol.pinv.eigenvalues.iter().enumerate() {
                    if l <= sol.pinv.cutoff {
                        let c = a[i] * sol.pinv.eigenvectors[(lo - wlo + i, col)]
                            - a[j] * sol.pinv.eigenvectors[(lo - wlo + j, col)];
                        null_sq += c * c;
                    }
                }
                let gnorm = (a[i] * a[i] + a[j] * a[j]).sqrt();
                if null_sq.sqrt() > RANGE_TOL * gnorm {
                    return (f64::INFINITY, f64::INFINITY, f64::INFINITY);
                }
            }
        }
    }

    // Q = max over pairs of g^T G† g.
    let mut q_max = 0.0_f64;
    for i in 0..k {
        let pi = p[(lo - wlo + i, lo - wlo + i)];
        for j in (i + 1)..k {
            let pj = p[(lo - wlo + j, lo - wlo + j)];
            let pij = p[(lo - wlo + i, lo - wlo + j)];
            let q = a[i] * a[i] * pi - 2.0 * a[i] * a[j] * pij + a[j] * a[j] * pj;
            q_max = q_max.max(q);
        }
    }

    // B = max over pairs and deduplicated rows of α_s |g^T G† Φ_s^T| R_s.
    // For a fixed row, max over pairs of |x_i - x_j| with x_i = a_i (G†Φ)_i
    // is the range of x over the active window.
    let mut b_max = 0.0_f64;
    for (kind, coeffs, n_coeffs) in acc.keys_for_certificate(sol.window) {
        let (alpha, range_bound) = if kind == "dir" {
            (1.0, 1.0)
        } else {
            (omega, 4.0 / gamma_bar)
        };
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        for i in 0..k {
            let mut dot = 0.0;
            for &(idx, coef) in coeffs.iter().take(n_coeffs) {
                dot += coef * p[(lo - wlo + i, idx - wlo)];
            }
            let x = a[i] * dot;
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
        b_max = b_max.max(alpha * (x_max - x_min) * range_bound);
    }

    let log_term = params.log_term();
    let radius = (2.0 * log_term * q_max).sqrt() + (2.0 / 3.0) * log_term * b_max;
    (q_max, b_max, radius)
}

/// Per-class radius components of one raced candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassRadius {
    pub value: f64,
    pub q: f64,
    pub b: f64,
    pub radius: f64,
}

/// Snapshot of one dyadic shill-scale candidate's certificate state.
/// Non-admissible candidates carry infinite radii by convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateReport {
    pub gamma_bar: f64,
    /// ω = γ̄ / (C_suf (2^{-m} + h_m)).
    pub weight: f64,
    pub admissible: bool,
    pub validated: bool,
    pub f_hat: Option<Vec<f64>>,
    pub class_stats: Vec<ClassRadius>,
}

/// Stopping test: r̂ + sqrt(log(2T|Γ|/δ)/(2τ)) ≤ 2^{-(m+1)}; the robust
/// branch omits the |Γ| factor (pass `n_candidates = None`).
pub fn validate_threshold(
    r_hat: f64,
    tau: u64,
    m: u32,
    t_horizon: u64,
    delta: f64,
    n_candidates: Option<usize>,
) -> bool {
    let factor = n_candidates.unwrap_or(1) as f64;
    let log_term = (2.0 * t_horizon as f64 * factor / delta).ln();
    let penalty = (log_term / (2.0 * tau as f64)).sqrt();
    r_hat + penalty <= 0.5_f64.powi(m as i32 + 1)
}
