//! Bidding policies: the epoch-based shill-proof learner with robust and
//! optimistic certificates, its robust-only ablation, a naive learner that
//! trusts the shilled reports, and the clairvoyant oracle.
//!
//! The learner runs in epochs m = 0, 1, ... with global dyadic bid grids
//! G_m = {j·2^{-m}} and per-value active intervals A_m(v) ⊆ [0, v]. Odd
//! rounds play the least-sampled active bid (robust sampling); even rounds
//! play uniformly over the active grid and harvest debiased suffix
//! observations. An epoch ends as soon as either certificate's average
//! radius is confidently below 2^{-(m+1)}; elimination then keeps the bids
//! whose estimated gap to every competitor is at most the threshold and
//! takes the convex hull.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificates::{
    admissible_candidates, candidate_weight, debiased_suffix_obs, dyadic_candidates,
    optimistic_radius, solve_wls, suffix_difference_rows, validate_threshold, DyadicGrid,
    OptimisticAccumulator, RadiusParams, RobustCertificate, WlsSolution, RANGE_TOL,
};
use crate::distributions::{best_bid, AuctionInstance, PiecewiseCdf};
use crate::environment::{EpochSummary, Feedback, Policy};

fn default_c_suf() -> f64 {
    0.25
}
fn default_c_s() -> f64 {
    2.0
}
fn default_c_val() -> f64 {
    4.0
}
fn default_validation_ratio() -> f64 {
    1.1
}
fn default_benchmark_grid() -> usize {
    100_000
}
fn default_suffix_all_rounds() -> bool {
    true
}

/// Tunable constants of the learner. Everything has a sensible default; the
/// horizon is the only mandatory field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub t_horizon: u64,
    /// Confidence parameter; defaults to 1/T.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Value-grid size |V|; defaults to min(T, 1024).
    #[serde(default)]
    pub value_grid_size: Option<usize>,
    /// Force |V| = T regardless of the memory-friendly default.
    #[serde(default)]
    pub full_value_grid: bool,
    /// Suffix-weight normalization constant in ω = γ̄/(C_suf(2^{-m}+h_m)).
    #[serde(default = "default_c_suf")]
    pub c_suf: f64,
    /// Shill local-regularity constant (recorded; used by checks).
    #[serde(default = "default_c_s")]
    pub c_s: f64,
    /// Admissibility increment constant (C_val ≥ 2·C_S).
    #[serde(default = "default_c_val")]
    pub c_val: f64,
    /// Geometric validation-check schedule ratio.
    #[serde(default = "default_validation_ratio")]
    pub validation_ratio: f64,
    /// Benchmark grid used by the harness for pseudo-regret.
    #[serde(default = "default_benchmark_grid")]
    pub benchmark_grid: usize,
    /// Swap the robust/optimistic round parity (ablation).
    #[serde(default)]
    pub parity_swap: bool,
    /// Harvest suffix rows on robust rounds too (the losing report exists on
    /// every lost round; the debiasing identity is parity-blind).
    #[serde(default = "default_suffix_all_rounds")]
    pub suffix_all_rounds: bool,
    /// Keep per-epoch certificate dumps for debugging.
    #[serde(default)]
    pub dump_certificates: bool,
}

impl PolicyConfig {
    pub fn new(t_horizon: u64) -> Self {
        PolicyConfig {
            t_horizon,
            delta: None,
            value_grid_size: None,
            full_value_grid: false,
            c_suf: default_c_suf(),
            c_s: default_c_s(),
            c_val: default_c_val(),
            validation_ratio: default_validation_ratio(),
            benchmark_grid: default_benchmark_grid(),
            parity_swap: false,
            suffix_all_rounds: default_suffix_all_rounds(),
            dump_certificates: false,
        }
    }

    pub fn resolved_delta(&self) -> f64 {
        self.delta.unwrap_or(1.0 / self.t_horizon.max(1) as f64)
    }

    pub fn resolved_value_grid(&self) -> usize {
        let nv = if self.full_value_grid {
            self.t_horizon as usize
        } else {
            self.value_grid_size
                .unwrap_or_else(|| (self.t_horizon as usize).min(1024))
        };
        nv.max(2)
    }
}

/// Which certificate ended an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Branch {
    Robust,
    Optimistic { gamma_star: f64 },
}

/// Per-class interval bookkeeping recorded at elimination time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassDetail {
    pub value: f64,
    pub grid_level: u32,
    pub before: (usize, usize),
    pub after: (usize, usize),
}

/// One epoch's outcome, for diagnostics and tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochDetail {
    pub m: u32,
    pub start: u64,
    pub end: u64,
    pub branch: Branch,
    /// Observed value classes only.
    pub classes: Vec<ClassDetail>,
}

/// Optional per-epoch certificate dump (behind `dump_certificates`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateDump {
    pub m: u32,
    pub branch: Branch,
    pub window: (usize, usize),
    pub gram: Option<Vec<Vec<f64>>>,
    pub f_hat: Option<Vec<f64>>,
    /// (value, radius) pairs for observed classes at epoch end.
    pub class_radii: Vec<(f64, f64)>,
}

/// Elimination rule on one class's active grid: keep the points whose
/// estimated utility is within `thr` of the best identified estimate
/// (unidentified points exert no pressure and are kept), then take the
/// hull. If everything were eliminated the single best-estimated point is
/// kept, so the active interval never empties.
pub fn survivor_hull(u_hat: &[Option<f64>], thr: f64) -> (usize, usize) {
    let max_u = u_hat
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !max_u.is_finite() {
        return (0, u_hat.len() - 1);
    }
    let (mut lo, mut hi) = (usize::MAX, 0usize);
    for (off, u) in u_hat.iter().enumerate() {
        let keep = match u {
            None => true,
            Some(u) => max_u - u <= thr,
        };
        if keep {
            lo = lo.min(off);
            hi = hi.max(off);
        }
    }
    if lo == usize::MAX {
        let best = u_hat
            .iter()
            .enumerate()
            .filter_map(|(off, u)| u.map(|u| (off, u)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(off, _)| off)
            .unwrap_or(0);
        return (best, best);
    }
    (lo, hi)
}

struct EpochState {
    grid: DyadicGrid,
    robust: RobustCertificate,
    acc: OptimisticAccumulator,
    /// F_S at every grid point (empty when the optimistic branch is off).
    fs_on_grid: Vec<f64>,
    /// Admissible dyadic candidates, descending.
    admissible: Vec<f64>,
    /// Per value-grid-index active ranges on this epoch's grid.
    class_range: Vec<(usize, usize)>,
    /// Hull of all class ranges: index window of the Gram matrices.
    window: (usize, usize),
    n_m: u64,
    tau: u64,
    next_check: u64,
    observed: BTreeMap<usize, u64>,
}

/// The epoch-based learner (shill-proof when `optimistic` is on, the
/// dynamic-pricing robust baseline otherwise).
pub struct ShillProofPolicy {
    cfg: PolicyConfig,
    shill: Option<PiecewiseCdf>,
    optimistic: bool,
    nv: usize,
    delta: f64,
    candidates: Vec<f64>,
    m_cap: u32,
    /// Per value-grid-index active interval (bid space).
    intervals: Vec<(f64, f64)>,
    m: u32,
    terminal: bool,
    t: u64,
    epoch: EpochState,
    branch_in_force: u8,
    summaries: Vec<EpochSummary>,
    details: Vec<EpochDetail>,
    dumps: Vec<CertificateDump>,
    pending: Option<(usize, usize, bool)>,
}

impl ShillProofPolicy {
    /// Full algorithm: robust sampling plus the optimistic race over the
    /// known shill distribution.
    pub fn shill_proof(cfg: PolicyConfig, shill_dist: PiecewiseCdf) -> Self {
        Self::build(cfg, Some(shill_dist), true)
    }

    /// Ablation with the optimistic branch disabled: every round is a robust
    /// round and only robust validation can end an epoch. Never reads o_t.
    pub fn robust_only(cfg: PolicyConfig) -> Self {
        Self::build(cfg, None, false)
    }

    fn build(cfg: PolicyConfig, shill: Option<PiecewiseCdf>, optimistic: bool) -> Self {
        let nv = cfg.resolved_value_grid();
        let delta = cfg.resolved_delta();
        let t_horizon = cfg.t_horizon.max(1);
        let m_cap = (t_horizon as f64).log2().ceil().max(1.0) as u32;
        let candidates = dyadic_candidates(t_horizon);
        let intervals: Vec<(f64, f64)> =
            (0..nv).map(|i| (0.0, i as f64 / (nv - 1) as f64)).collect();
        let mut policy = ShillProofPolicy {
            cfg,
            shill,
            optimistic,
            nv,
            delta,
            candidates,
            m_cap,
            intervals,
            m: 0,
            terminal: false,
            t: 0,
            epoch: EpochState {
                grid: DyadicGrid { level: 0 },
                robust: RobustCertificate::new(&DyadicGrid { level: 0 }),
                acc: OptimisticAccumulator::new(&DyadicGrid { level: 0 }),
                fs_on_grid: Vec::new(),
                admissible: Vec::new(),
                class_range: Vec::new(),
                window: (0, 0),
                n_m: 0,
                tau: 0,
                next_check: 1,
                observed: BTreeMap::new(),
            },
            branch_in_force: 0,
            summaries: Vec::new(),
            details: Vec::new(),
            dumps: Vec::new(),
            pending: None,
        };
        policy.setup_epoch();
        policy
    }

    pub fn current_intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn epoch_details(&self) -> &[EpochDetail] {
        &self.details
    }

    pub fn certificate_dumps(&self) -> &[CertificateDump] {
        &self.dumps
    }

    fn value_of(&self, v_idx: usize) -> f64 {
        v_idx as f64 / (self.nv - 1) as f64
    }

    /// Nearest value-grid point; ties round down.
    pub fn observe_value(&self, raw: f64) -> usize {
        let x = raw.clamp(0.0, 1.0) * (self.nv - 1) as f64;
        let idx = (x - 0.5).ceil() as i64;
        idx.clamp(0, self.nv as i64 - 1) as usize
    }

    fn setup_epoch(&mut self) {
        let grid = DyadicGrid { level: self.m };
        let class_range: Vec<(usize, usize)> = self
            .intervals
            .iter()
            .map(|&(lo, hi)| {
                let l = grid.ceil_index(lo);
                let h = grid.floor_index(hi).max(l);
                (l, h)
            })
            .collect();
        let fs_on_grid = match (&self.shill, self.optimistic) {
            (Some(s), true) => (0..grid.len())
                .map(|i| s.eval(grid.point(i)).expect("grid point in range"))
                .collect(),
            _ => Vec::new(),
        };
        let admissible = if self.optimistic {
            let shill = self.shill.as_ref().expect("optimistic policy knows F_S");
            let mut ranges = class_range.clone();
            ranges.sort_unstable();
            ranges.dedup();
            let mut adm =
                admissible_candidates(shill, &grid, &ranges, &self.candidates, self.cfg.c_val);
            adm.sort_by(|a, b| b.partial_cmp(a).unwrap());
            adm
        } else {
            Vec::new()
        };
        let window = class_range
            .iter()
            .fold((usize::MAX, 0usize), |acc, &(l, h)| {
                (acc.0.min(l), acc.1.max(h))
            });
        self.epoch = EpochState {
            robust: RobustCertificate::new(&grid),
            acc: OptimisticAccumulator::new(&grid),
            fs_on_grid,
            admissible,
            class_range,
            window,
            grid,
            n_m: self.t,
            tau: 0,
            next_check: 1,
            observed: BTreeMap::new(),
        };
    }

    fn radius_params(&self) -> RadiusParams {
        RadiusParams {
            t_horizon: self.cfg.t_horizon,
            delta: self.delta,
            n_candidates: self.candidates.len(),
        }
    }

    /// Count-weighted average robust radius over observed classes.
    fn robust_r_hat(&self) -> f64 {
        let mut acc = 0.0;
        for (&v_idx, &cnt) in &self.epoch.observed {
            let r = self.epoch.robust.radius(
                self.epoch.class_range[v_idx],
                self.cfg.t_horizon,
                self.delta,
            );
            if !r.is_finite() {
                return f64::INFINITY;
            }
            acc += cnt as f64 * r;
        }
        acc / self.epoch.tau as f64
    }

    /// Count-weighted average optimistic radius for one candidate.
    fn optimistic_r_hat(&self, sol: &WlsSolution, gamma_bar: f64, omega: f64) -> f64 {
        let params = self.radius_params();
        let mut acc = 0.0;
        for (&v_idx, &cnt) in &self.epoch.observed {
            let r = optimistic_radius(
                sol,
                &self.epoch.acc,
                gamma_bar,
                omega,
                &self.epoch.grid,
                self.value_of(v_idx),
                self.epoch.class_range[v_idx],
                &params,
            );
            if !r.is_finite() {
                return f64::INFINITY;
            }
            acc += cnt as f64 * r;
        }
        acc / self.epoch.tau as f64
    }

    /// Full racing snapshot for every dyadic candidate on the current epoch
    /// state (diagnostics; the in-loop race stops at the largest validator).
    pub fn candidate_reports(&self) -> Vec<crate::certificates::CandidateReport> {
        use crate::certificates::{optimistic_radius_parts, CandidateReport, ClassRadius};
        let h_m = self.epoch.grid.mesh();
        let params = self.radius_params();
        self.candidates
            .iter()
            .map(|&gamma_bar| {
                let weight = candidate_weight(gamma_bar, self.m, h_m, self.cfg.c_suf);
                let admissible = self.epoch.admissible.contains(&gamma_bar);
                if !admissible || !self.optimistic {
                    let class_stats = self
                        .epoch
                        .observed
                        .keys()
                        .map(|&v_idx| ClassRadius {
                            value: self.value_of(v_idx),
                            q: f64::INFINITY,
                            b: f64::INFINITY,
                            radius: f64::INFINITY,
                        })
                        .collect();
                    return CandidateReport {
                        gamma_bar,
                        weight,
                        admissible,
                        validated: false,
                        f_hat: None,
                        class_stats,
                    };
                }
                let sol = solve_wls(&self.epoch.acc, weight, self.epoch.window);
                let mut acc_r = 0.0;
                let class_stats: Vec<ClassRadius> = self
                    .epoch
                    .observed
                    .iter()
                    .map(|(&v_idx, &cnt)| {
                        let v = self.value_of(v_idx);
                        let (q, b, radius) = optimistic_radius_parts(
                            &sol,
                            &self.epoch.acc,
                            gamma_bar,
                            weight,
                            &self.epoch.grid,
                            v,
                            self.epoch.class_range[v_idx],
                            &params,
                        );
                        acc_r += cnt as f64 * radius;
                        ClassRadius {
                            value: v,
                            q,
                            b,
                            radius,
                        }
                    })
                    .collect();
                let r_hat = if self.epoch.tau > 0 {
                    acc_r / self.epoch.tau as f64
                } else {
                    f64::INFINITY
                };
                let validated = r_hat.is_finite()
                    && self.epoch.tau > 0
                    && validate_threshold(
                        r_hat,
                        self.epoch.tau,
                        self.m,
                        self.cfg.t_horizon,
                        self.delta,
                        Some(self.candidates.len()),
                    );
                CandidateReport {
                    gamma_bar,
                    weight,
                    admissible,
                    validated,
                    f_hat: Some(sol.f_hat.iter().copied().collect()),
                    class_stats,
                }
            })
            .collect()
    }

    /// Races the admissible candidates, largest first; returns the winner.
    fn race(&self) -> Option<(f64, f64, WlsSolution)> {
        let h_m = self.epoch.grid.mesh();
        for &gamma_bar in &self.epoch.admissible {
            let omega = candidate_weight(gamma_bar, self.m, h_m, self.cfg.c_suf);
            let sol = solve_wls(&self.epoch.acc, omega, self.epoch.window);
            let r_hat = self.optimistic_r_hat(&sol, gamma_bar, omega);
            if r_hat.is_finite()
                && validate_threshold(
                    r_hat,
                    self.epoch.tau,
                    self.m,
                    self.cfg.t_horizon,
                    self.delta,
                    Some(self.candidates.len()),
                )
            {
                return Some((gamma_bar, omega, sol));
            }
        }
        None
    }

    fn end_epoch(&mut self, branch: Branch, sol: Option<WlsSolution>) {
        let grid = self.epoch.grid;
        let thr = 0.5_f64.powi(self.m as i32 + 1);
        let mut classes = Vec::new();
        for v_idx in 0..self.nv {
            let v = self.value_of(v_idx);
            let (lo, hi) = self.epoch.class_range[v_idx];
            // Estimated utilities where the certificate identifies the point.
            let u_hat: Vec<Option<f64>> = (lo..=hi)
                .map(|idx| match (&branch, &sol) {
                    (Branch::Robust, _) => {
                        if self.epoch.robust.count(idx) > 0 {
                            Some((v - grid.point(idx)) * self.epoch.robust.mean(idx))
                        } else {
                            None
                        }
                    }
                    (Branch::Optimistic { .. }, Some(s)) => {
                        let (wlo, whi) = s.window;
                        if idx < wlo || idx > whi {
                            return None;
                        }
                        if s.pinv.coord_null_component(idx - wlo) > RANGE_TOL {
                            None
                        } else {
                            Some((v - grid.point(idx)) * s.f_hat[idx - wlo])
                        }
                    }
                    (Branch::Optimistic { .. }, None) => None,
                })
                .collect();
            let (off_lo, off_hi) = survivor_hull(&u_hat, thr);
            let (s_lo, s_hi) = (lo + off_lo, lo + off_hi);
            self.intervals[v_idx] = (grid.point(s_lo), grid.point(s_hi));
            if self.epoch.observed.contains_key(&v_idx) {
                classes.push(ClassDetail {
                    value: v,
                    grid_level: grid.level,
                    before: (lo, hi),
                    after: (s_lo, s_hi),
                });
            }
        }
        let (iota, gamma_star) = match branch {
            Branch::Robust => (0u8, None),
            Branch::Optimistic { gamma_star } => (1u8, Some(gamma_star)),
        };
        self.summaries.push(EpochSummary {
            m: self.m,
            start: self.epoch.n_m,
            end: Some(self.t + 1),
            iota,
            gamma_star,
        });
        self.details.push(EpochDetail {
            m: self.m,
            start: self.epoch.n_m,
            end: self.t + 1,
            branch,
            classes,
        });
        if self.cfg.dump_certificates {
            let class_radii: Vec<(f64, f64)> = self
                .epoch
                .observed
                .keys()
                .map(|&v_idx| {
                    let v = self.value_of(v_idx);
                    let r = match (&branch, &sol) {
                        (Branch::Optimistic { gamma_star }, Some(s)) => {
                            let h_m = self.epoch.grid.mesh();
                            let omega = candidate_weight(*gamma_star, self.m, h_m, self.cfg.c_suf);
                            optimistic_radius(
                                s,
                                &self.epoch.acc,
                                *gamma_star,
                                omega,
                                &grid,
                                v,
                                self.epoch.class_range[v_idx],
                                &self.radius_params(),
                            )
                        }
                        _ => self.epoch.robust.radius(
                            self.epoch.class_range[v_idx],
                            self.cfg.t_horizon,
                            self.delta,
                        ),
                    };
                    (v, r)
                })
                .collect();
            self.dumps.push(CertificateDump {
                m: self.m,
                branch,
                window: self.epoch.window,
                gram: sol.as_ref().map(|s| {
                    (0..s.gram.nrows())
                        .map(|r| (0..s.gram.ncols()).map(|c| s.gram[(r, c)]).collect())
                        .collect()
                }),
                f_hat: sol.as_ref().map(|s| s.f_hat.iter().copied().collect()),
                class_radii,
            });
        }
        self.branch_in_force = iota;
        self.m += 1;
        if self.m >= self.m_cap {
            // Horizon-bounded epoch budget exhausted: keep playing on the
            // final grid without further elimination.
            self.terminal = true;
            self.m = self.m_cap - 1;
            self.setup_epoch();
            self.terminal = true;
        } else {
            self.setup_epoch();
        }
    }
}

impl Policy for ShillProofPolicy {
    fn bid(&mut self, value: f64, rng: &mut ChaCha8Rng) -> f64 {
        let v_idx = self.observe_value(value);
        let (lo, hi) = self.epoch.class_range[v_idx];
        let robust_round = !self.optimistic || ((self.t % 2 == 1) ^ self.cfg.parity_swap);
        let p_idx = if robust_round {
            // Least-played active grid bid, ties to the smallest.
            let mut best = lo;
            let mut best_n = u64::MAX;
            for idx in lo..=hi {
                let n = self.epoch.robust.count(idx);
                if n < best_n {
                    best_n = n;
                    best = idx;
                }
            }
            best
        } else {
            rng.gen_range(lo..=hi)
        };
        self.pending = Some((v_idx, p_idx, robust_round));
        self.epoch.grid.point(p_idx)
    }

    fn ingest(&mut self, fb: &Feedback) {
        assert_eq!(fb.round, self.t, "feedback round matches the state clock");
        let (v_idx, p_idx, robust_round) = self.pending.take().expect("bid precedes ingest");
        self.epoch.tau += 1;
        *self.epoch.observed.entry(v_idx).or_insert(0) += 1;
        // Direct win/loss outcomes feed both certificates on every round.
        self.epoch
            .robust
            .update(p_idx, fb.won)
            .expect("played index on grid");
        if self.optimistic {
            self.epoch.acc.record_direct(p_idx, fb.won);
            if !robust_round || self.cfg.suffix_all_rounds {
                let (_, hi) = self.epoch.class_range[v_idx];
                let grid = self.epoch.grid;
                let ys: Vec<Option<f64>> = (p_idx..=hi)
                    .map(|idx| {
                        debiased_suffix_obs(
                            fb.won,
                            fb.report,
                            grid.point(idx),
                            self.epoch.fs_on_grid[idx],
                        )
                        .ok()
                    })
                    .collect();
                let range = self.epoch.class_range[v_idx];
                for row in suffix_difference_rows(self.value_of(v_idx), &grid, range, p_idx, &ys) {
                    self.epoch.acc.record(&row);
                }
            }
        }

        if !self.terminal {
            // Optimistic racing on the geometric schedule, checked first
            // (within the round), then the robust stopping test.
            if self.optimistic
                && !robust_round
                && self.epoch.tau >= self.epoch.next_check
                && !self.epoch.admissible.is_empty()
            {
                let ratio = self.cfg.validation_ratio;
                let mut next = self.epoch.next_check;
                while next <= self.epoch.tau {
                    next = ((next as f64 * ratio).ceil() as u64).max(next + 1);
                }
                self.epoch.next_check = next;
                if let Some((gamma_star, _omega, sol)) = self.race() {
                    self.end_epoch(Branch::Optimistic { gamma_star }, Some(sol));
                    self.t += 1;
                    return;
                }
            }
            let r_hat = self.robust_r_hat();
            if r_hat.is_finite()
                && validate_threshold(
                    r_hat,
                    self.epoch.tau,
                    self.m,
                    self.cfg.t_horizon,
                    self.delta,
                    None,
                )
            {
                self.end_epoch(Branch::Robust, None);
            }
        }
        self.t += 1;
    }

    fn epoch(&self) -> u32 {
        self.m
    }

    fn branch_in_force(&self) -> u8 {
        self.branch_in_force
    }

    fn epoch_summaries(&self) -> Vec<EpochSummary> {
        let mut out = self.summaries.clone();
        if self.epoch.tau > 0 {
            out.push(EpochSummary {
                m: self.m,
                start: self.epoch.n_m,
                end: None,
                iota: 0,
                gamma_star: None,
            });
        }
        out
    }

    fn diagnostics(&self) -> Option<serde_json::Value> {
        if !self.cfg.dump_certificates {
            return None;
        }
        Some(serde_json::json!({
            "certificate_dumps": self.dumps,
            "final_epoch_candidates": self.candidate_reports(),
        }))
    }
}

// ---------------------------------------------------------------------------
// Naive policy
// ---------------------------------------------------------------------------

/// How the naive learner explores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExploreMode {
    /// Sit out (bid 0) on exploration rounds: the losing report is then a
    /// bid-independent sample of the reported distribution O.
    #[default]
    BidZero,
    /// Uniform random grid bid on exploration rounds.
    UniformGrid,
}

fn default_naive_grid() -> usize {
    51
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NaiveParams {
    #[serde(default = "default_naive_grid")]
    pub grid_size: usize,
    #[serde(default)]
    pub explore: ExploreMode,
}

impl Default for NaiveParams {
    fn default() -> Self {
        NaiveParams {
            grid_size: default_naive_grid(),
            explore: ExploreMode::default(),
        }
    }
}

/// An unaware learner that treats reported bids as real competing bids.
///
/// Exploration rounds (rate t^{-1/3}) generate the estimator's data: their
/// origin is independent of the exploit bids, matching the contaminated
/// offline-history setting, and the empirical CDF of their reports converges
/// to the reported-bid law (wins are recorded as b ≤ p_t events, losses
/// contribute o_t as if it were the real bid). Exploit rounds play the
/// greedy argmax of (v-q)·F̂(q) on the bid grid, ties to the smallest bid.
pub struct NaivePolicy {
    params: NaiveParams,
    t: u64,
    n_explore: u64,
    /// Exploration wins bucketed at the played grid index.
    win_at: Vec<u64>,
    /// Exploration losing reports bucketed at the smallest grid point ≥ o.
    report_le: Vec<u64>,
    pending: (usize, bool),
}

impl NaivePolicy {
    pub fn new(params: NaiveParams) -> Self {
        let gs = params.grid_size.max(2);
        NaivePolicy {
            params: NaiveParams {
                grid_size: gs,
                ..params
            },
            t: 0,
            n_explore: 0,
            win_at: vec![0; gs],
            report_le: vec![0; gs],
            pending: (0, false),
        }
    }

    fn point(&self, idx: usize) -> f64 {
        idx as f64 / (self.params.grid_size - 1) as f64
    }

    /// Empirical CDF of the "competing bid" at each grid point.
    pub fn empirical_cdf(&self) -> Vec<f64> {
        let n = self.n_explore.max(1) as f64;
        let mut cum = 0u64;
        self.win_at
            .iter()
            .zip(&self.report_le)
            .map(|(&w, &l)| {
                cum += w + l;
                cum as f64 / n
            })
            .collect()
    }

    /// Current greedy target: grid argmax of (v-q)·F̂(q), smallest on ties.
    pub fn greedy_index(&self, value: f64) -> usize {
        let cdf = self.empirical_cdf();
        let mut best = 0usize;
        let mut best_u = f64::NEG_INFINITY;
        for (i, &f) in cdf.iter().enumerate() {
            let u = (value - self.point(i)) * f;
            if u > best_u {
                best_u = u;
                best = i;
            }
        }
        best
    }
}

impl Policy for NaivePolicy {
    fn bid(&mut self, value: f64, rng: &mut ChaCha8Rng) -> f64 {
        let eps = ((self.t + 1) as f64).powf(-1.0 / 3.0);
        let explore = rng.gen::<f64>() < eps;
        let idx = if explore {
            match self.params.explore {
                ExploreMode::BidZero => 0,
                ExploreMode::UniformGrid => rng.gen_range(0..self.params.grid_size),
            }
        } else {
            self.greedy_index(value)
        };
        self.pending = (idx, explore);
        self.point(idx)
    }

    fn ingest(&mut self, fb: &Feedback) {
        self.t += 1;
        let (idx, explore) = self.pending;
        if !explore {
            return;
        }
        self.n_explore += 1;
        if fb.won {
            self.win_at[idx] += 1;
        } else {
            let o = fb.report.expect("lost round carries a report");
            let gs = self.params.grid_size;
            let bucket = ((o * (gs - 1) as f64).ceil() as usize).min(gs - 1);
            self.report_le[bucket] += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Oracle policy
// ---------------------------------------------------------------------------

/// Clairvoyant benchmark: bids the grid-optimal bid for the true buyer CDF.
pub struct OraclePolicy {
    buyer: PiecewiseCdf,
    grid_size: usize,
    cache: BTreeMap<u64, f64>,
}

impl OraclePolicy {
    pub fn new(instance: &AuctionInstance, grid_size: usize) -> Self {
        OraclePolicy {
            buyer: instance.buyer_dist.clone(),
            grid_size,
            cache: BTreeMap::new(),
        }
    }
}

impl Policy for OraclePolicy {
    fn bid(&mut self, value: f64, _rng: &mut ChaCha8Rng) -> f64 {
        *self
            .cache
            .entry(value.to_bits())
            .or_insert_with(|| best_bid(value, &self.buyer, self.grid_size).bid)
    }

    fn ingest(&mut self, _fb: &Feedback) {}
}
