//! Piecewise closed-form CDFs on [0,1] and the auction instances built from them.
//!
//! Every distribution in the simulator (buyer `F_B`, shill `F_S`, reported
//! `F_O = F_B·F_S`, mixtures `F_λ`, and the planted lower-bound families) is a
//! [`PiecewiseCdf`]: an ordered list of segments carrying symbolic evaluators
//! plus a list of point masses. Keeping the representation symbolic means the
//! debiasing denominator `F_S(q)` is exact, products and convex mixtures stay
//! closed-form, and reverse hazard rates come from segment derivatives instead
//! of finite differences.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Schema version written into serialized instances.
pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

/// Monotonicity tolerance used when validating a CDF on a dense grid.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Derivative bound constant of the sine-squared bump: sup |b'| = C_B / h.
pub const BUMP_DERIVATIVE_CONSTANT: f64 = std::f64::consts::PI;

/// The hard bid interval J = [1/3, 1/2] of the planted-bump family.
pub const HARD_INTERVAL: (f64, f64) = (1.0 / 3.0, 0.5);

#[derive(Debug, Error)]
pub enum DistError {
    #[error("point {0} outside [0,1]")]
    OutOfRange(f64),
    #[error("segments do not tile [0,1]: {0}")]
    BadSegments(String),
    #[error("atom at {0} with nonpositive mass {1}")]
    BadAtom(f64, f64),
    #[error("atom at {0} does not sit on a segment boundary")]
    AtomOffBoundary(f64),
    #[error("cdf decreases near p={p}: drop {drop:e}")]
    NotMonotone { p: f64, drop: f64 },
    #[error("cdf value {value} at p={p} outside [0,1]")]
    RangeViolation { p: f64, value: f64 },
    #[error("cdf is discontinuous at {p} (jump {jump:e}) without a matching atom")]
    UnaccountedJump { p: f64, jump: f64 },
    #[error("F(1) = {0}, expected exactly 1")]
    BadTotalMass(f64),
    #[error("reverse hazard undefined at p={p}: {reason}")]
    UndefinedRate { p: f64, reason: String },
    #[error("mixture weight {0} outside [0,1]")]
    BadLambda(f64),
    #[error("hard instance too small: {0} cells, need at least 4")]
    InstanceTooSmall(usize),
    #[error("planted cell {cell} outside 1..={n_cells}")]
    BadCell { cell: usize, n_cells: usize },
    #[error("invalid hard-instance parameters: {0}")]
    BadHardParams(String),
    #[error("instance has no hard parameters")]
    NotHardInstance,
}

pub type Result<T> = std::result::Result<T, DistError>;

// ---------------------------------------------------------------------------
// Segment evaluators
// ---------------------------------------------------------------------------

/// Closed-form evaluator of the continuous part of a CDF on one segment.
///
/// The primitive kinds are the ones the model needs (`a·p+b`, `c/(1-p)`,
/// constants, and the sine-squared utility bump divided by `1-p`); `Sum`,
/// `Scaled` and `Product` close the family under shilling products and
/// mixtures while staying differentiable in closed form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Expr {
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// numerator / (1 - p)
    Reciprocal {
        numerator: f64,
    },
    /// amplitude · sin²(π (p - left)/width) / (1 - p), zero outside [left, left+width]
    SineBump {
        amplitude: f64,
        left: f64,
        width: f64,
    },
    Scaled {
        factor: f64,
        inner: Box<Expr>,
    },
    Sum {
        terms: Vec<Expr>,
    },
    Product {
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Expr::Constant { value } => *value,
            Expr::Linear { slope, intercept } => slope * p + intercept,
            Expr::Reciprocal { numerator } => numerator / (1.0 - p),
            Expr::SineBump {
                amplitude,
                left,
                width,
            } => {
                if p < *left || p > left + width {
                    0.0
                } else {
                    let s = (std::f64::consts::PI * (p - left) / width).sin();
                    amplitude * s * s / (1.0 - p)
                }
            }
            Expr::Scaled { factor, inner } => factor * inner.eval(p),
            Expr::Sum { terms } => terms.iter().map(|t| t.eval(p)).sum(),
            Expr::Product { lhs, rhs } => lhs.eval(p) * rhs.eval(p),
        }
    }

    /// Right derivative; joints have measure zero so the right limit is used.
    pub fn derivative(&self, p: f64) -> f64 {
        match self {
            Expr::Constant { .. } => 0.0,
            Expr::Linear { slope, .. } => *slope,
            Expr::Reciprocal { numerator } => {
                let d = 1.0 - p;
                numerator / (d * d)
            }
            Expr::SineBump {
                amplitude,
                left,
                width,
            } => {
                if p < *left || p > left + width {
                    0.0
                } else {
                    let pi = std::f64::consts::PI;
                    let x = pi * (p - left) / width;
                    let d = 1.0 - p;
                    amplitude * ((pi / width) * (2.0 * x).sin() / d + x.sin().powi(2) / (d * d))
                }
            }
            Expr::Scaled { factor, inner } => factor * inner.derivative(p),
            Expr::Sum { terms } => terms.iter().map(|t| t.derivative(p)).sum(),
            Expr::Product { lhs, rhs } => {
                lhs.derivative(p) * rhs.eval(p) + lhs.eval(p) * rhs.derivative(p)
            }
        }
    }
}

/// One tile of the partition of [0,1]; `expr` gives the continuous CDF part on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub expr: Expr,
}

// ---------------------------------------------------------------------------
// PiecewiseCdf
// ---------------------------------------------------------------------------

/// A CDF on [0,1] given by closed-form segments plus point masses.
///
/// Invariants (checked on construction):
/// - segments tile [0,1] without gaps or overlaps;
/// - atoms sit on segment boundaries;
/// - `eval` is nondecreasing on a dense grid (tolerance 1e-12) and stays in [0,1];
/// - `eval(1) == 1.0` exactly (the atom at 1 absorbs residual mass).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiecewiseCdf {
    segments: Vec<Segment>,
    /// Sorted (point, mass) pairs, mass > 0.
    atoms: Vec<(f64, f64)>,
}

impl PiecewiseCdf {
    pub fn new(segments: Vec<Segment>, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(DistError::BadSegments("no segments".into()));
        }
        if segments[0].lo != 0.0 {
            return Err(DistError::BadSegments(format!(
                "first segment starts at {}",
                segments[0].lo
            )));
        }
        for s in &segments {
            if s.lo.partial_cmp(&s.hi) != Some(std::cmp::Ordering::Less) {
                return Err(DistError::BadSegments(format!(
                    "empty segment [{}, {}]",
                    s.lo, s.hi
                )));
            }
        }
        for w in segments.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(DistError::BadSegments(format!(
                    "gap or overlap at {} vs {}",
                    w[0].hi, w[1].lo
                )));
            }
        }
        if segments.last().unwrap().hi != 1.0 {
            return Err(DistError::BadSegments(format!(
                "last segment ends at {}",
                segments.last().unwrap().hi
            )));
        }
        let mut atoms = atoms
            .into_iter()
            .filter(|&(_, m)| m != 0.0)
            .collect::<Vec<_>>();
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(x, m) in &atoms {
            if !(0.0..=1.0).contains(&x) {
                return Err(DistError::OutOfRange(x));
            }
            if m <= 0.0 {
                return Err(DistError::BadAtom(x, m));
            }
            let on_boundary = segments.iter().any(|s| s.lo == x) || x == 1.0;
            if !on_boundary {
                return Err(DistError::AtomOffBoundary(x));
            }
        }
        let cdf = PiecewiseCdf { segments, atoms };
        cdf.validate()?;
        Ok(cdf)
    }

    /// Dense-grid monotonicity, range, continuity and total-mass checks.
    fn validate(&self) -> Result<()> {
        let mut prev = 0.0_f64;
        for (si, seg) in self.segments.iter().enumerate() {
            let n = ((seg.hi - seg.lo) * 4096.0).ceil().max(16.0) as usize;
            // Continuity at the left joint: segment value at lo must equal the
            // left limit plus any atom mass at lo.
            let at_lo = self.eval_unchecked(seg.lo);
            if si > 0 {
                let jump = at_lo - prev;
                let atom = self.atom_mass_at(seg.lo);
                if (jump - atom).abs() > 1e-9 {
                    return Err(DistError::UnaccountedJump {
                        p: seg.lo,
                        jump: jump - atom,
                    });
                }
                if jump < -MONOTONE_TOL {
                    return Err(DistError::NotMonotone {
                        p: seg.lo,
                        drop: -jump,
                    });
                }
            }
            for i in 0..=n {
                let p = if i == n {
                    seg.hi
                } else {
                    seg.lo + (seg.hi - seg.lo) * (i as f64) / (n as f64)
                };
                // Within the segment the continuous part plus atoms-below is the value
                // just left of the next boundary.
                let v = if p == seg.hi && si + 1 < self.segments.len() {
                    self.left_limit(p)
                } else {
                    self.eval_unchecked(p)
                };
                if v < prev - MONOTONE_TOL {
                    return Err(DistError::NotMonotone { p, drop: prev - v });
                }
                if !(-MONOTONE_TOL..=1.0 + MONOTONE_TOL).contains(&v) {
                    return Err(DistError::RangeViolation { p, value: v });
                }
                prev = prev.max(v);
            }
        }
        let total = self.eval_unchecked(1.0);
        if total != 1.0 {
            return Err(DistError::BadTotalMass(total));
        }
        Ok(())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    fn segment_index(&self, p: f64) -> usize {
        if p >= 1.0 {
            return self.segments.len() - 1;
        }
        // Segment boundaries are few; linear scan is fine and branch-predictable.
        let mut idx = self.segments.len() - 1;
        for (i, s) in self.segments.iter().enumerate() {
            if p < s.hi {
                idx = i;
                break;
            }
        }
        idx
    }

    pub fn atom_mass_at(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .find(|&&(p, _)| p == x)
            .map(|&(_, m)| m)
            .unwrap_or(0.0)
    }

    fn atom_mass_upto(&self, p: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|&&(x, _)| x <= p)
            .map(|&(_, m)| m)
            .sum()
    }

    fn eval_unchecked(&self, p: f64) -> f64 {
        let seg = &self.segments[self.segment_index(p)];
        seg.expr.eval(p) + self.atom_mass_upto(p)
    }

    /// F(p), right-continuous, including atom mass at points ≤ p.
    pub fn eval(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistError::OutOfRange(p));
        }
        Ok(self.eval_unchecked(p))
    }

    /// F(p-), the left limit.
    pub fn left_limit(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        // The continuous part of the segment whose closure contains p from the left.
        let idx = match self.segments.iter().position(|s| s.lo < p && p <= s.hi) {
            Some(i) => i,
            None => self.segment_index(p),
        };
        let cont = self.segments[idx].expr.eval(p);
        let below: f64 = self
            .atoms
            .iter()
            .take_while(|&&(x, _)| x < p)
            .map(|&(_, m)| m)
            .sum();
        cont + below
    }

    /// Density of the continuous part, from the segment's closed-form
    /// derivative (taken from the right at joints). None at atoms.
    pub fn density(&self, p: f64) -> Option<f64> {
        if self.atom_mass_at(p) > 0.0 {
            return None;
        }
        Some(self.segments[self.segment_index(p)].expr.derivative(p))
    }

    /// Reverse hazard rate r(p) = f(p)/F(p).
    pub fn reverse_hazard(&self, p: f64) -> Result<f64> {
        if !(0.0 < p && p < 1.0) {
            return Err(DistError::OutOfRange(p));
        }
        if self.atom_mass_at(p) > 0.0 {
            return Err(DistError::UndefinedRate {
                p,
                reason: "atom at p".into(),
            });
        }
        let f = self.eval_unchecked(p);
        if f <= 0.0 {
            return Err(DistError::UndefinedRate {
                p,
                reason: "F(p) = 0".into(),
            });
        }
        let dens = self.segments[self.segment_index(p)].expr.derivative(p);
        Ok(dens / f)
    }

    /// Inverse-transform sample. One uniform draw per call, so paired policies
    /// consume an identical stream; bit-reproducible given the seed.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        self.quantile(u)
    }

    /// Generalized inverse: smallest p with F(p) ≥ u.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        for (si, seg) in self.segments.iter().enumerate() {
            let f_lo = self.eval_unchecked(seg.lo);
            if u <= f_lo {
                return seg.lo;
            }
            let f_hi_left = seg.expr.eval(seg.hi)
                + self
                    .atoms
                    .iter()
                    .take_while(|&&(x, _)| x < seg.hi)
                    .map(|&(_, m)| m)
                    .sum::<f64>();
            if u <= f_hi_left {
                let offset = f_lo - seg.expr.eval(seg.lo);
                return self.invert_on_segment(seg, offset, u, si);
            }
        }
        1.0
    }

    fn invert_on_segment(&self, seg: &Segment, offset: f64, u: f64, _si: usize) -> f64 {
        let target = u - offset;
        match &seg.expr {
            Expr::Linear { slope, intercept } if *slope > 0.0 => {
                ((target - intercept) / slope).clamp(seg.lo, seg.hi)
            }
            Expr::Reciprocal { numerator } if *numerator > 0.0 => {
                (1.0 - numerator / target).clamp(seg.lo, seg.hi)
            }
            _ => {
                // Monotone bisection on the segment.
                let (mut lo, mut hi) = (seg.lo, seg.hi);
                for _ in 0..70 {
                    let mid = 0.5 * (lo + hi);
                    if seg.expr.eval(mid) >= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }

    // -- common constructors ------------------------------------------------

    pub fn uniform() -> Self {
        PiecewiseCdf::new(
            vec![Segment {
                lo: 0.0,
                hi: 1.0,
                expr: Expr::Linear {
                    slope: 1.0,
                    intercept: 0.0,
                },
            }],
            vec![],
        )
        .expect("uniform cdf is valid")
    }

    /// Point mass at x.
    pub fn atom_at(x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(DistError::OutOfRange(x));
        }
        let segments = if x == 0.0 || x == 1.0 {
            vec![Segment {
                lo: 0.0,
                hi: 1.0,
                expr: Expr::Constant { value: 0.0 },
            }]
        } else {
            vec![
                Segment {
                    lo: 0.0,
                    hi: x,
                    expr: Expr::Constant { value: 0.0 },
                },
                Segment {
                    lo: x,
                    hi: 1.0,
                    expr: Expr::Constant { value: 0.0 },
                },
            ]
        };
        PiecewiseCdf::new(segments, vec![(x, 1.0)])
    }

    /// The flat-utility baseline of the planted-bump family:
    /// (9/8)p on [0,1/3], 1/(4(1-p)) on [1/3,1/2], 1/2 on [1/2,1), atom 1/2 at 1.
    pub fn flat_plateau_baseline() -> Self {
        PiecewiseCdf::new(
            vec![
                Segment {
                    lo: 0.0,
                    hi: 1.0 / 3.0,
                    expr: Expr::Linear {
                        slope: 9.0 / 8.0,
                        intercept: 0.0,
                    },
                },
                Segment {
                    lo: 1.0 / 3.0,
                    hi: 0.5,
                    expr: Expr::Reciprocal { numerator: 0.25 },
                },
                Segment {
                    lo: 0.5,
                    hi: 1.0,
                    expr: Expr::Constant { value: 0.5 },
                },
            ],
            vec![(1.0, 0.5)],
        )
        .expect("baseline cdf is valid")
    }
}

// ---------------------------------------------------------------------------
// Composition: products and mixtures
// ---------------------------------------------------------------------------

fn merged_boundaries(a: &PiecewiseCdf, b: &PiecewiseCdf) -> Vec<f64> {
    let mut pts: Vec<f64> = a
        .segments()
        .iter()
        .chain(b.segments().iter())
        .flat_map(|s| [s.lo, s.hi])
        .collect();
    pts.extend(a.atoms().iter().chain(b.atoms().iter()).map(|&(x, _)| x));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    pts
}

/// Continuous-part expression of `cdf` on [lo, hi) including the atom mass
/// accumulated up to lo, so it equals F pointwise on the open segment.
fn full_expr_on(cdf: &PiecewiseCdf, lo: f64) -> Expr {
    let seg = &cdf.segments()[cdf.segment_index_for(lo)];
    let offset = cdf.atom_mass_upto(lo);
    if offset == 0.0 {
        seg.expr.clone()
    } else {
        Expr::Sum {
            terms: vec![seg.expr.clone(), Expr::Constant { value: offset }],
        }
    }
}

impl PiecewiseCdf {
    fn segment_index_for(&self, p: f64) -> usize {
        self.segment_index(p)
    }
}

/// Appends the residual point mass at 1 that makes `eval(1)` exactly 1.0,
/// matching the summation order used by `eval`.
pub(crate) fn push_residual_atom_at_one(
    segments: &[Segment],
    atoms: &mut Vec<(f64, f64)>,
) -> Result<()> {
    let last = segments.last().expect("at least one segment");
    let eval_at_one =
        |atoms: &[(f64, f64)]| last.expr.eval(1.0) + atoms.iter().map(|&(_, m)| m).sum::<f64>();
    let residual = 1.0 - eval_at_one(atoms);
    if residual < -1e-9 {
        return Err(DistError::BadTotalMass(eval_at_one(atoms)));
    }
    if residual > 0.0 {
        atoms.push((1.0, residual));
    }
    // One-ulp snapping: rounding in the expression or the atom sum can leave
    // the total a hair off; nudge the last atom until the total is exact.
    for _ in 0..4 {
        let err = 1.0 - eval_at_one(atoms);
        if err == 0.0 {
            return Ok(());
        }
        match atoms.last_mut() {
            Some(a) => a.1 += err,
            None => return Err(DistError::BadTotalMass(eval_at_one(atoms))),
        }
    }
    if 1.0 - eval_at_one(atoms) == 0.0 {
        Ok(())
    } else {
        Err(DistError::BadTotalMass(eval_at_one(atoms)))
    }
}

fn compose(
    b: &PiecewiseCdf,
    s: &PiecewiseCdf,
    combine: impl Fn(Expr, Expr) -> Expr,
    jump_of: impl Fn(f64) -> f64,
) -> Result<PiecewiseCdf> {
    let pts = merged_boundaries(b, s);
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for &x in &pts {
        if x >= 1.0 {
            continue;
        }
        let j = jump_of(x);
        if j > 1e-15 {
            atoms.push((x, j));
        }
    }
    let mut segments = Vec::new();
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo >= 1.0 {
            break;
        }
        let acc_atoms: f64 = atoms
            .iter()
            .take_while(|&&(x, _)| x <= lo)
            .map(|&(_, m)| m)
            .sum();
        let combined = combine(full_expr_on(b, lo), full_expr_on(s, lo));
        let expr = if acc_atoms == 0.0 {
            combined
        } else {
            Expr::Sum {
                terms: vec![combined, Expr::Constant { value: -acc_atoms }],
            }
        };
        segments.push(Segment { lo, hi, expr });
    }
    push_residual_atom_at_one(&segments, &mut atoms)?;
    PiecewiseCdf::new(segments, atoms)
}

/// Reported-bid CDF under max-shilling: F_O(p) = F_B(p)·F_S(p).
pub fn shilled_cdf(buyer: &PiecewiseCdf, shill: &PiecewiseCdf) -> Result<PiecewiseCdf> {
    compose(
        buyer,
        shill,
        |eb, es| Expr::Product {
            lhs: Box::new(eb),
            rhs: Box::new(es),
        },
        |x| {
            let fb = buyer.eval_unchecked(x);
            let fs = shill.eval_unchecked(x);
            fb * fs - buyer.left_limit(x) * shill.left_limit(x)
        },
    )
}

/// Contaminated-history mixture F_λ(p) = λ F_B(p) + (1-λ) F_O(p).
pub fn mixture_cdf(
    buyer: &PiecewiseCdf,
    reported: &PiecewiseCdf,
    lambda: f64,
) -> Result<PiecewiseCdf> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(DistError::BadLambda(lambda));
    }
    compose(
        buyer,
        reported,
        |eb, eo| Expr::Sum {
            terms: vec![
                Expr::Scaled {
                    factor: lambda,
                    inner: Box::new(eb),
                },
                Expr::Scaled {
                    factor: 1.0 - lambda,
                    inner: Box::new(eo),
                },
            ],
        },
        |x| {
            lambda * (buyer.eval_unchecked(x) - buyer.left_limit(x))
                + (1.0 - lambda) * (reported.eval_unchecked(x) - reported.left_limit(x))
        },
    )
}

// ---------------------------------------------------------------------------
// Utility, benchmark search, weak RHR check
// ---------------------------------------------------------------------------

/// Expected utility of bidding p with value v against buyer CDF B: (v-p)·F_B(p).
pub fn utility(v: f64, p: f64, buyer: &PiecewiseCdf) -> f64 {
    (v - p) * buyer.eval_unchecked(p)
}

/// Result of an exhaustive grid search for the best bid.
#[derive(Debug, Clone, Copy)]
pub struct BestBid {
    /// Smallest maximizing grid bid.
    pub bid: f64,
    pub utility: f64,
    /// Extent [lo, hi] of the grid argmax set (flat plateaus have hi > lo).
    pub argmax_lo: f64,
    pub argmax_hi: f64,
}

/// Brute-force utility search over an evenly spaced grid of `grid_size`
/// points on [0,1]. Ties break toward the smallest bid.
pub fn best_bid(v: f64, buyer: &PiecewiseCdf, grid_size: usize) -> BestBid {
    assert!(grid_size >= 2, "grid_size must be at least 2");
    let step = 1.0 / (grid_size - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0usize;
    let mut us = Vec::with_capacity(grid_size);
    for i in 0..grid_size {
        let p = if i + 1 == grid_size {
            1.0
        } else {
            i as f64 * step
        };
        let u = utility(v, p, buyer);
        us.push(u);
        if u > best {
            best = u;
            best_idx = i;
        }
    }
    let tol = 1e-12 * best.abs().max(1.0);
    let lo = us.iter().position(|&u| u >= best - tol).unwrap_or(best_idx);
    let hi = us
        .iter()
        .rposition(|&u| u >= best - tol)
        .unwrap_or(best_idx);
    BestBid {
        bid: best_idx as f64 * step,
        utility: best,
        argmax_lo: lo as f64 * step,
        argmax_hi: hi as f64 * step,
    }
}

/// Outcome of the weak reverse-hazard-rate monotonicity check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakRhrReport {
    pub holds: bool,
    pub violation_at: Option<f64>,
    pub reason: Option<String>,
}

/// Checks that φ(p) = p + 1/r_B(p) is nondecreasing on an interior grid.
///
/// Flat pieces (zero density) evaluate to φ = +∞; a plateau of +∞ followed by
/// a finite value is a genuine violation, while a trailing flat piece is not.
/// Undefined rates (atoms, F = 0) are reported as violations with the reason.
pub fn check_weak_rhr(buyer: &PiecewiseCdf, grid_size: usize) -> WeakRhrReport {
    let step = 1.0 / (grid_size - 1) as f64;
    let mut prev_phi = f64::NEG_INFINITY;
    for i in 1..grid_size - 1 {
        let p = i as f64 * step;
        let phi = match buyer.reverse_hazard(p) {
            Err(e) => {
                return WeakRhrReport {
                    holds: false,
                    violation_at: Some(p),
                    reason: Some(e.to_string()),
                }
            }
            Ok(r) => {
                if r < 0.0 {
                    return WeakRhrReport {
                        holds: false,
                        violation_at: Some(p),
                        reason: Some("negative density".into()),
                    };
                }
                // Flat pieces have rate 0: phi jumps to +inf there, which is
                // monotone as long as nothing finite follows.
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    p + 1.0 / r
                }
            }
        };
        if phi < prev_phi - 1e-9 && prev_phi.is_finite()
            || (prev_phi == f64::INFINITY && phi.is_finite())
        {
            return WeakRhrReport {
                holds: false,
                violation_at: Some(p),
                reason: Some(format!("phi decreases: {prev_phi} -> {phi}")),
            };
        }
        if phi >= prev_phi || prev_phi == f64::INFINITY {
            prev_phi = phi.max(prev_phi);
        }
    }
    WeakRhrReport {
        holds: true,
        violation_at: None,
        reason: None,
    }
}

// ---------------------------------------------------------------------------
// Hard (planted-bump) instances
// ---------------------------------------------------------------------------

/// Parameters of a planted lower-bound instance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct HardParams {
    /// Cell width.
    pub h: f64,
    /// Bump height ε.
    pub eps: f64,
    /// Number of disjoint width-h cells tiling J from the left.
    pub n_cells: usize,
    /// Planted cell index, 1-based.
    pub cell: usize,
    /// Low-shill mass γ (F_S = γ on J).
    pub gamma: f64,
}

/// How the low-shill mass below J is realized. Both choices put the mass
/// inside [0, 1/8]; they differ in whether F_S reaches γ immediately at 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShillLowComponent {
    /// Uniform on [0, 1/8] (F_S ramps linearly from 0 to γ).
    #[default]
    UniformSlice,
    /// Point mass at 0 (F_S = γ on all of [0, 1)).
    AtomAtZero,
}

/// A complete simulation instance: value, buyer and shill laws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuctionInstance {
    pub schema_version: u32,
    pub label: String,
    pub value_dist: PiecewiseCdf,
    pub buyer_dist: PiecewiseCdf,
    pub shill_dist: PiecewiseCdf,
    pub hard_params: Option<HardParams>,
}

impl AuctionInstance {
    pub fn new(
        label: impl Into<String>,
        value_dist: PiecewiseCdf,
        buyer_dist: PiecewiseCdf,
        shill_dist: PiecewiseCdf,
        hard_params: Option<HardParams>,
    ) -> Result<Self> {
        if let Some(hp) = &hard_params {
            let j_len = HARD_INTERVAL.1 - HARD_INTERVAL.0;
            if !(hp.h > 0.0 && hp.h <= j_len / 4.0 + 1e-15) {
                return Err(DistError::BadHardParams(format!(
                    "cell width {} outside (0, |J|/4]",
                    hp.h
                )));
            }
            if hp.cell < 1 || hp.cell > hp.n_cells {
                return Err(DistError::BadCell {
                    cell: hp.cell,
                    n_cells: hp.n_cells,
                });
            }
            let eps_cap = 9.0 / (64.0 * (BUMP_DERIVATIVE_CONSTANT + 2.0)) * hp.h;
            if hp.eps > eps_cap + 1e-15 || hp.eps > 0.125 + 1e-15 {
                return Err(DistError::BadHardParams(format!(
                    "bump height {} violates monotonicity cap {}",
                    hp.eps,
                    eps_cap.min(0.125)
                )));
            }
        }
        Ok(AuctionInstance {
            schema_version: INSTANCE_SCHEMA_VERSION,
            label: label.into(),
            value_dist,
            buyer_dist,
            shill_dist,
            hard_params,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Horizon/γ-dependent (h, ε, N) from the two lower-bound regimes.
///
/// Low-information regime (γ ≤ T^{-2/3}): h = T^{-1/3}/24, ε = c_ε T^{-1/3};
/// otherwise h = min{√γ, 1/24}, ε = c_ε T^{-1/2} γ^{-1/4}. The constant c_ε
/// is fixed once from the bump-shape constants.
pub fn hard_instance_params(t_horizon: u64, gamma: f64) -> Result<(f64, f64, usize)> {
    if t_horizon == 0 {
        return Err(DistError::BadHardParams("horizon must be >= 1".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(DistError::BadHardParams(format!(
            "gamma {gamma} outside (0, 1]"
        )));
    }
    let t = t_horizon as f64;
    let c_b = BUMP_DERIVATIVE_CONSTANT;
    let big_k = 256.0 + 128.0 * (c_b + 2.0).powi(2) / 9.0;
    let c_eps = (1.0_f64 / 8.0)
        .min(9.0 / (1536.0 * 24.0_f64.sqrt() * (c_b + 2.0)))
        .min(1.0 / (200.0 * big_k).sqrt());
    let t_cube_root_inv = t.cbrt().recip();
    let (h, eps) = if gamma <= t_cube_root_inv * t_cube_root_inv {
        (t_cube_root_inv / 24.0, c_eps * t_cube_root_inv)
    } else {
        (
            gamma.sqrt().min(1.0 / 24.0),
            c_eps / t.sqrt() / gamma.powf(0.25),
        )
    };
    let j_len = HARD_INTERVAL.1 - HARD_INTERVAL.0;
    let n = (j_len / h).floor() as usize;
    if n < 4 {
        return Err(DistError::InstanceTooSmall(n));
    }
    Ok((h, eps, n))
}

/// Builds the planted-bump instance: value ≡ 1, buyer = baseline + bump in
/// cell `a`, shill = mass γ below J plus an atom of mass 1-γ at 1.
pub fn make_hard_instance(
    t_horizon: u64,
    gamma: f64,
    cell: Option<usize>,
    rng_for_default_cell: Option<&mut rand_chacha::ChaCha8Rng>,
) -> Result<AuctionInstance> {
    make_hard_instance_with(
        t_horizon,
        gamma,
        cell,
        ShillLowComponent::UniformSlice,
        rng_for_default_cell,
    )
}

/// As [`make_hard_instance`] with an explicit low-shill component.
pub fn make_hard_instance_with(
    t_horizon: u64,
    gamma: f64,
    cell: Option<usize>,
    low: ShillLowComponent,
    rng_for_default_cell: Option<&mut rand_chacha::ChaCha8Rng>,
) -> Result<AuctionInstance> {
    let (h, eps, n) = hard_instance_params(t_horizon, gamma)?;
    let cell = match (cell, rng_for_default_cell) {
        (Some(a), _) => a,
        (None, Some(rng)) => rng.gen_range(1..=n),
        (None, None) => n.div_ceil(2),
    };
    if cell < 1 || cell > n {
        return Err(DistError::BadCell { cell, n_cells: n });
    }
    let l_a = HARD_INTERVAL.0 + (cell - 1) as f64 * h;
    let r_a = l_a + h;

    let baseline_mid = Expr::Reciprocal { numerator: 0.25 };
    let mut segments = vec![Segment {
        lo: 0.0,
        hi: HARD_INTERVAL.0,
        expr: Expr::Linear {
            slope: 9.0 / 8.0,
            intercept: 0.0,
        },
    }];
    if l_a > HARD_INTERVAL.0 {
        segments.push(Segment {
            lo: HARD_INTERVAL.0,
            hi: l_a,
            expr: baseline_mid.clone(),
        });
    }
    segments.push(Segment {
        lo: l_a,
        hi: r_a,
        expr: Expr::Sum {
            terms: vec![
                baseline_mid.clone(),
                Expr::SineBump {
                    amplitude: eps,
                    left: l_a,
                    width: h,
                },
            ],
        },
    });
    if r_a < HARD_INTERVAL.1 {
        segments.push(Segment {
            lo: r_a,
            hi: HARD_INTERVAL.1,
            expr: baseline_mid,
        });
    }
    segments.push(Segment {
        lo: HARD_INTERVAL.1,
        hi: 1.0,
        expr: Expr::Constant { value: 0.5 },
    });
    let buyer = PiecewiseCdf::new(segments, vec![(1.0, 0.5)])?;

    let shill = match low {
        ShillLowComponent::UniformSlice => {
            let slice_hi = 0.125;
            let seg0 = Segment {
                lo: 0.0,
                hi: slice_hi,
                expr: Expr::Linear {
                    slope: gamma / slice_hi,
                    intercept: 0.0,
                },
            };
            let seg1 = Segment {
                lo: slice_hi,
                hi: 1.0,
                expr: Expr::Constant { value: gamma },
            };
            let residual = 1.0 - gamma;
            let atoms = if residual > 0.0 {
                vec![(1.0, residual)]
            } else {
                vec![]
            };
            PiecewiseCdf::new(vec![seg0, seg1], atoms)?
        }
        ShillLowComponent::AtomAtZero => {
            let seg = Segment {
                lo: 0.0,
                hi: 1.0,
                expr: Expr::Constant { value: 0.0 },
            };
            let mut atoms = vec![(0.0, gamma)];
            let residual = 1.0 - gamma;
            if residual > 0.0 {
                atoms.push((1.0, residual));
            }
            PiecewiseCdf::new(vec![seg], atoms)?
        }
    };

    AuctionInstance::new(
        format!("hard(T={t_horizon},gamma={gamma},cell={cell})"),
        PiecewiseCdf::atom_at(1.0)?,
        buyer,
        shill,
        Some(HardParams {
            h,
            eps,
            n_cells: n,
            cell,
            gamma,
        }),
    )
}

/// Good region G_a = [l_a + h/4, l_a + 3h/4] where the bump stays ≥ 1/2.
pub fn good_region(instance: &AuctionInstance) -> Result<(f64, f64)> {
    let hp = instance.hard_params.ok_or(DistError::NotHardInstance)?;
    let l_a = HARD_INTERVAL.0 + (hp.cell - 1) as f64 * hp.h;
    Ok((l_a + hp.h / 4.0, l_a + 3.0 * hp.h / 4.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn baseline_matches_closed_form() {
        let f = PiecewiseCdf::flat_plateau_baseline();
        assert_abs_diff_eq!(f.eval(1.0 / 3.0).unwrap(), 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eval(0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(f.eval(1.0).unwrap(), 1.0);
        assert!(f.eval(1.5).is_err());
    }

    #[test]
    fn plateau_utility_is_flat() {
        let f = PiecewiseCdf::flat_plateau_baseline();
        for i in 0..=100 {
            let p = 1.0 / 3.0 + (0.5 - 1.0 / 3.0) * i as f64 / 100.0;
            assert_abs_diff_eq!(utility(1.0, p, &f), 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn reverse_hazard_closed_forms() {
        let u = PiecewiseCdf::uniform();
        assert_abs_diff_eq!(u.reverse_hazard(0.5).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u.reverse_hazard(0.1).unwrap(), 10.0, epsilon = 1e-12);
        // On the reciprocal piece f/F = 1/(1-p); symbolic vs central difference.
        let f = PiecewiseCdf::flat_plateau_baseline();
        let r = f.reverse_hazard(0.4).unwrap();
        assert_abs_diff_eq!(r, 5.0 / 3.0, epsilon = 1e-12);
        let hstep = 1e-6;
        let num = (f.eval(0.4 + hstep).unwrap() - f.eval(0.4 - hstep).unwrap()) / (2.0 * hstep);
        assert_abs_diff_eq!(r, num / f.eval(0.4).unwrap(), epsilon = 1e-6);
        // Atom and zero-mass points are errors.
        let a = PiecewiseCdf::atom_at(0.5).unwrap();
        assert!(a.reverse_hazard(0.5).is_err());
        assert!(a.reverse_hazard(0.2).is_err());
    }

    #[test]
    fn sampling_degenerate_and_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let zero = PiecewiseCdf::atom_at(0.0).unwrap();
        for _ in 0..32 {
            assert_eq!(zero.sample(&mut rng), 0.0);
        }
        let u = PiecewiseCdf::uniform();
        assert_abs_diff_eq!(u.quantile(0.25), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn sampling_matches_cdf_sup_norm() {
        // DKW-style Monte Carlo check on the baseline at 1e6 samples.
        let f = PiecewiseCdf::flat_plateau_baseline();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000usize;
        let mut samples: Vec<f64> = (0..n).map(|_| f.sample(&mut rng)).collect();
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut worst = 0.0_f64;
        for i in 0..200 {
            let p = i as f64 / 199.0;
            let emp = samples.partition_point(|&x| x <= p) as f64 / n as f64;
            worst = worst.max((emp - f.eval(p).unwrap()).abs());
        }
        assert!(worst < 0.005, "sup-norm {worst}");
    }

    #[test]
    fn sample_determinism() {
        let f = PiecewiseCdf::flat_plateau_baseline();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let xa: Vec<f64> = (0..100).map(|_| f.sample(&mut a)).collect();
        let xb: Vec<f64> = (0..100).map(|_| f.sample(&mut b)).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn shilled_product_identity() {
        let b = PiecewiseCdf::uniform();
        let s = PiecewiseCdf::uniform();
        let o = shilled_cdf(&b, &s).unwrap();
        assert_abs_diff_eq!(o.eval(0.5).unwrap(), 0.25, epsilon = 1e-14);
        for i in 0..=64 {
            let p = i as f64 / 64.0;
            let fo = o.eval(p).unwrap();
            assert_abs_diff_eq!(fo, b.eval(p).unwrap() * s.eval(p).unwrap(), epsilon = 1e-12);
            assert!(fo <= b.eval(p).unwrap() + 1e-12);
        }
        // S == atom at 0 leaves B unchanged.
        let s0 = PiecewiseCdf::atom_at(0.0).unwrap();
        let o0 = shilled_cdf(&b, &s0).unwrap();
        for i in 0..=32 {
            let p = i as f64 / 32.0;
            assert_abs_diff_eq!(o0.eval(p).unwrap(), b.eval(p).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn hard_instance_shill_scaling_on_j() {
        let inst = make_hard_instance(100_000, 0.3, Some(2), None).unwrap();
        let o = shilled_cdf(&inst.buyer_dist, &inst.shill_dist).unwrap();
        for i in 0..=16 {
            let p = HARD_INTERVAL.0 + (HARD_INTERVAL.1 - HARD_INTERVAL.0) * i as f64 / 16.0;
            assert_abs_diff_eq!(inst.shill_dist.eval(p).unwrap(), 0.3, epsilon = 1e-12);
            assert_abs_diff_eq!(
                o.eval(p).unwrap(),
                0.3 * inst.buyer_dist.eval(p).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn mixture_endpoints_and_midpoint() {
        let b = PiecewiseCdf::uniform();
        let o = shilled_cdf(&b, &PiecewiseCdf::uniform()).unwrap();
        let m1 = mixture_cdf(&b, &o, 1.0).unwrap();
        let m0 = mixture_cdf(&b, &o, 0.0).unwrap();
        let mh = mixture_cdf(&b, &o, 0.5).unwrap();
        for i in 0..=32 {
            let p = i as f64 / 32.0;
            assert_abs_diff_eq!(m1.eval(p).unwrap(), b.eval(p).unwrap(), epsilon = 1e-12);
            assert_abs_diff_eq!(m0.eval(p).unwrap(), o.eval(p).unwrap(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(mh.eval(0.5).unwrap(), 0.375, epsilon = 1e-12);
        assert!(mixture_cdf(&b, &o, 1.5).is_err());
    }

    #[test]
    fn utility_examples() {
        let u = PiecewiseCdf::uniform();
        assert_abs_diff_eq!(utility(1.0, 0.5, &u), 0.25, epsilon = 1e-15);
        assert_eq!(utility(0.7, 0.7, &u), 0.0);
    }

    #[test]
    fn best_bid_uniform_and_plateau() {
        let u = PiecewiseCdf::uniform();
        let bb = best_bid(1.0, &u, 100_001);
        assert_abs_diff_eq!(bb.bid, 0.5, epsilon = 2e-5);
        assert_abs_diff_eq!(bb.utility, 0.25, epsilon = 1e-9);
        let f = PiecewiseCdf::flat_plateau_baseline();
        let bb = best_bid(1.0, &f, 100_001);
        assert_abs_diff_eq!(bb.utility, 0.25, epsilon = 1e-9);
        assert!(bb.argmax_lo < 1.0 / 3.0 + 1e-3);
        assert!(bb.argmax_hi > 0.5 - 1e-3);
        let zb = best_bid(0.0, &u, 101);
        assert_eq!(zb.bid, 0.0);
        assert_eq!(zb.utility, 0.0);
    }

    #[test]
    fn weak_rhr_examples() {
        assert!(check_weak_rhr(&PiecewiseCdf::uniform(), 1001).holds);
        assert!(check_weak_rhr(&PiecewiseCdf::flat_plateau_baseline(), 10_001).holds);
        // Interior flat piece followed by rising density violates the condition.
        let flat_mid = PiecewiseCdf::new(
            vec![
                Segment {
                    lo: 0.0,
                    hi: 0.4,
                    expr: Expr::Linear {
                        slope: 1.0,
                        intercept: 0.0,
                    },
                },
                Segment {
                    lo: 0.4,
                    hi: 0.6,
                    expr: Expr::Constant { value: 0.4 },
                },
                Segment {
                    lo: 0.6,
                    hi: 1.0,
                    expr: Expr::Linear {
                        slope: 1.5,
                        intercept: -0.5,
                    },
                },
            ],
            vec![],
        )
        .unwrap();
        let rep = check_weak_rhr(&flat_mid, 2001);
        assert!(!rep.holds);
        assert!(rep.violation_at.unwrap() > 0.4);
    }

    #[test]
    fn hard_params_regimes() {
        // High-information regime at gamma = 1.
        let (h, eps, n) = hard_instance_params(1_000_000, 1.0).unwrap();
        assert_abs_diff_eq!(h, 1.0 / 24.0, epsilon = 1e-15);
        let c_b = BUMP_DERIVATIVE_CONSTANT;
        let big_k = 256.0 + 128.0 * (c_b + 2.0).powi(2) / 9.0;
        let c_eps = (1.0_f64 / 8.0)
            .min(9.0 / (1536.0 * 24.0_f64.sqrt() * (c_b + 2.0)))
            .min(1.0 / (200.0 * big_k).sqrt());
        assert_abs_diff_eq!(eps, c_eps * 1e-3, epsilon = 1e-18);
        assert_eq!(n, 4);
        // Low-information regime.
        let (h, eps, n) = hard_instance_params(1_000_000, 1e-6).unwrap();
        assert_abs_diff_eq!(h, 1e-2 / 24.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eps, c_eps * 1e-2, epsilon = 1e-15);
        // |J|/h = 400 in exact arithmetic; the floor may shave one cell.
        assert!((399..=400).contains(&n), "n = {n}");
        assert!(hard_instance_params(0, 1.0).is_err());
        assert!(hard_instance_params(10, 0.0).is_err());
        // T = 1 sits exactly on the regime boundary: h = 1/24 tiles J into
        // exactly 4 cells, which the construction accepts.
        let (_, _, n) = hard_instance_params(1, 1.0).unwrap();
        assert_eq!(n, 4);
    }

    #[test]
    fn hard_instance_bump_geometry() {
        let inst = make_hard_instance(10_000, 0.5, Some(2), None).unwrap();
        let hp = inst.hard_params.unwrap();
        let l_a = HARD_INTERVAL.0 + (hp.cell - 1) as f64 * hp.h;
        // Peak utility 1/4 + eps at the cell center, 1/4 at the endpoints.
        let peak = utility(1.0, l_a + hp.h / 2.0, &inst.buyer_dist);
        assert_abs_diff_eq!(peak, 0.25 + hp.eps, epsilon = 1e-12);
        assert_abs_diff_eq!(utility(1.0, l_a, &inst.buyer_dist), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(
            utility(1.0, l_a + hp.h, &inst.buyer_dist),
            0.25,
            epsilon = 1e-12
        );
        // The buyer CDF with the bump still validates (monotone) and keeps
        // interval upper level sets: utility rises, stays flat with one
        // unimodal bump, and falls, so {u >= alpha} has no holes. (The raw
        // phi-monotonicity is not preserved on the bump's descending flank,
        // which is fine: the level-set structure is what elimination needs.)
        for alpha in [0.1, 0.2, 0.25, 0.25 + hp.eps / 2.0] {
            let grid = 20_001usize;
            let us: Vec<f64> = (0..grid)
                .map(|i| utility(1.0, i as f64 / (grid - 1) as f64, &inst.buyer_dist))
                .collect();
            let first = us.iter().position(|&u| u >= alpha);
            let last = us.iter().rposition(|&u| u >= alpha);
            if let (Some(a), Some(b)) = (first, last) {
                assert!(
                    us[a..=b].iter().all(|&u| u >= alpha - 1e-9),
                    "level set at {alpha} has holes"
                );
            }
        }
        // The unperturbed baseline does satisfy the phi condition.
        assert!(check_weak_rhr(&PiecewiseCdf::flat_plateau_baseline(), 10_001).holds);
    }

    #[test]
    fn bump_monotonicity_cap() {
        // F_base + bump stays a valid CDF whenever eps <= 9h/(64(C_b+2));
        // well beyond the cap, the descending flank overwhelms the baseline
        // density and construction fails.
        for h in [1.0 / 24.0, 1.0 / 100.0] {
            let l_a = HARD_INTERVAL.0;
            let build = |eps: f64| {
                PiecewiseCdf::new(
                    vec![
                        Segment {
                            lo: 0.0,
                            hi: l_a,
                            expr: Expr::Linear {
                                slope: 9.0 / 8.0,
                                intercept: 0.0,
                            },
                        },
                        Segment {
                            lo: l_a,
                            hi: l_a + h,
                            expr: Expr::Sum {
                                terms: vec![
                                    Expr::Reciprocal { numerator: 0.25 },
                                    Expr::SineBump {
                                        amplitude: eps,
                                        left: l_a,
                                        width: h,
                                    },
                                ],
                            },
                        },
                        Segment {
                            lo: l_a + h,
                            hi: 0.5,
                            expr: Expr::Reciprocal { numerator: 0.25 },
                        },
                        Segment {
                            lo: 0.5,
                            hi: 1.0,
                            expr: Expr::Constant { value: 0.5 },
                        },
                    ],
                    vec![(1.0, 0.5)],
                )
            };
            let cap = 9.0 / (64.0 * (BUMP_DERIVATIVE_CONSTANT + 2.0)) * h;
            assert!(build(cap).is_ok(), "cap eps must be monotone at h={h}");
            assert!(build(0.5 * cap).is_ok());
            assert!(
                matches!(build(8.0 * cap), Err(DistError::NotMonotone { .. })),
                "far beyond the cap the CDF must fail validation"
            );
        }
    }

    #[test]
    fn good_region_examples() {
        let inst = make_hard_instance(1_000_000, 1.0, Some(1), None).unwrap();
        let hp = inst.hard_params.unwrap();
        let (lo, hi) = good_region(&inst).unwrap();
        assert_abs_diff_eq!(lo, 1.0 / 3.0 + hp.h / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.0 / 3.0 + 3.0 * hp.h / 4.0, epsilon = 1e-15);
        // Inside the good region utility >= 1/4 + eps/2; outside the gap to
        // the peak is >= eps/2.
        for i in 0..=20 {
            let p = lo + (hi - lo) * i as f64 / 20.0;
            assert!(utility(1.0, p, &inst.buyer_dist) >= 0.25 + hp.eps / 2.0 - 1e-12);
        }
        let peak = 0.25 + hp.eps;
        for p in [lo - hp.h / 8.0, hi + hp.h / 8.0, 0.4, 0.45] {
            if p < lo || p > hi {
                assert!(peak - utility(1.0, p, &inst.buyer_dist) >= hp.eps / 2.0 - 1e-12);
            }
        }
        let plain = AuctionInstance::new(
            "plain",
            PiecewiseCdf::atom_at(1.0).unwrap(),
            PiecewiseCdf::uniform(),
            PiecewiseCdf::uniform(),
            None,
        )
        .unwrap();
        assert!(good_region(&plain).is_err());
    }

    #[test]
    fn instance_json_round_trip_is_lossless() {
        let inst = make_hard_instance(31_623, 0.37, Some(3), None).unwrap();
        let json = inst.to_json();
        let back = AuctionInstance::from_json(&json).unwrap();
        for i in 0..=257 {
            let p = i as f64 / 257.0;
            assert_eq!(
                inst.buyer_dist.eval(p).unwrap(),
                back.buyer_dist.eval(p).unwrap()
            );
            assert_eq!(
                inst.shill_dist.eval(p).unwrap(),
                back.shill_dist.eval(p).unwrap()
            );
        }
        assert_eq!(inst.hard_params, back.hard_params);
        assert_eq!(back.schema_version, INSTANCE_SCHEMA_VERSION);
    }
}
