//! Set-valued primitives and the selectors that turn them into
//! single-valued flows.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetError {
    #[error("point lies outside the set (margin {margin:.3e})")]
    PointOutsideSet { margin: f64 },
    #[error("weights must be non-negative and sum to one (sum = {sum})")]
    WeightContract { sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid set description: {0}")]
    InvalidSet(String),
    #[error("operation not supported for this set kind")]
    Unsupported,
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval bounds out of order");
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Rule for picking one point of an interval.
#[derive(Clone)]
pub enum Selector {
    MaxRate,
    MinRate,
    Constant(f64),
    /// Pseudo-random point, a deterministic function of the seed and the
    /// evaluation key.
    SeededUniform(u64),
    /// `f(lo, hi, key)`; results are clamped into the interval.
    Custom(Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::MaxRate => write!(f, "MaxRate"),
            Selector::MinRate => write!(f, "MinRate"),
            Selector::Constant(c) => write!(f, "Constant({c})"),
            Selector::SeededUniform(s) => write!(f, "SeededUniform({s})"),
            Selector::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Selector {
    /// Picks a point of `[lo, hi]`. `key` is usually the current state.
    pub fn pick(&self, lo: f64, hi: f64, key: &[f64]) -> f64 {
        let v = match self {
            Selector::MaxRate => hi,
            Selector::MinRate => lo,
            Selector::Constant(c) => *c,
            Selector::SeededUniform(seed) => lo + (hi - lo) * unit_uniform(key, *seed),
            Selector::Custom(f) => f(lo, hi, key),
        };
        v.clamp(lo, hi)
    }
}

pub fn interval_select(iv: Interval, sel: &Selector) -> f64 {
    sel.pick(iv.lo, iv.hi, &[])
}

fn key_hash(key: &[f64], seed: u64) -> u64 {
    // FNV-1a over the bit patterns, then a splitmix finalizer.
    let mut h = 0xcbf2_9ce4_8422_2325_u64 ^ seed;
    for v in key {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

fn unit_uniform(key: &[f64], seed: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(key_hash(key, seed)).random::<f64>()
}

/// Writes a point of the closed unit ball (uniform in volume) that depends
/// only on `key` and `seed`.
pub fn unit_ball_point(key: &[f64], seed: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(key_hash(key, seed));
    let mut norm2 = 0.0;
    for o in out.iter_mut() {
        *o = rng.sample(StandardNormal);
        norm2 += *o * *o;
    }
    let r = rng.random::<f64>().powf(1.0 / out.len() as f64);
    let scale = if norm2 > 0.0 { r / norm2.sqrt() } else { 0.0 };
    out.iter_mut().for_each(|o| *o *= scale);
}

/// Convex hull of the closed graph of `sign` at `z`.
pub fn sign_hull(z: f64) -> Interval {
    if z > 0.0 {
        Interval::new(1.0, 1.0)
    } else if z < 0.0 {
        Interval::new(-1.0, -1.0)
    } else {
        Interval::new(-1.0, 1.0)
    }
}

/// Selection from [`sign_hull`].
pub fn sign_select(z: f64, sel: &Selector, key: &[f64]) -> f64 {
    let iv = sign_hull(z);
    sel.pick(iv.lo, iv.hi, key)
}

/// `Σ wᵢ fᵢ(x)`.
pub fn convex_combination(
    fields: &[&dyn Fn(&[f64]) -> Vec<f64>],
    weights: &[f64],
    x: &[f64],
) -> Result<Vec<f64>, SetError> {
    if weights.len() != fields.len() || fields.is_empty() {
        return Err(SetError::DimensionMismatch {
            expected: fields.len(),
            got: weights.len(),
        });
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(SetError::WeightContract { sum });
    }
    let mut acc: Option<Vec<f64>> = None;
    for (f, &w) in fields.iter().zip(weights) {
        let v = f(x);
        match acc.as_mut() {
            None => acc = Some(v.iter().map(|vi| w * vi).collect()),
            Some(a) => {
                if a.len() != v.len() {
                    return Err(SetError::DimensionMismatch {
                        expected: a.len(),
                        got: v.len(),
                    });
                }
                a.iter_mut().zip(&v).for_each(|(ai, vi)| *ai += w * vi);
            }
        }
    }
    Ok(acc.unwrap())
}

/// Closed convex sets used as constraint or decision sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConvexSet {
    Interval { lo: f64, hi: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `{u : a_k·u ≤ b_k for all k}`.
    Halfspaces { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `{u ≥ 0 : Σu = 1}` in `dim` coordinates.
    Simplex { dim: usize },
    Hull { vertices: Vec<Vec<f64>> },
}

impl ConvexSet {
    pub fn validate(&self) -> Result<(), SetError> {
        let bad = |m: &str| Err(SetError::InvalidSet(m.to_string()));
        match self {
            ConvexSet::Interval { lo, hi } if !(lo <= hi) => bad("interval lo > hi"),
            ConvexSet::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    bad("box bounds have different lengths")
                } else if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    bad("box lower bound exceeds upper bound")
                } else {
                    Ok(())
                }
            }
            ConvexSet::Halfspaces { a, b } => {
                let n = a.first().map_or(0, Vec::len);
                if a.len() != b.len() || n == 0 || a.iter().any(|r| r.len() != n) {
                    bad("halfspace rows are inconsistent")
                } else if a.iter().any(|r| r.iter().all(|&v| v == 0.0)) {
                    bad("halfspace with zero normal")
                } else {
                    Ok(())
                }
            }
            ConvexSet::Simplex { dim } if *dim == 0 => bad("simplex dimension must be at least 1"),
            ConvexSet::Hull { vertices } => {
                let n = vertices.first().map_or(0, Vec::len);
                if n == 0 || vertices.iter().any(|v| v.len() != n) {
                    bad("hull vertices are inconsistent")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Interval { .. } => 1,
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Halfspaces { a, .. } => a.first().map_or(0, Vec::len),
            ConvexSet::Simplex { dim } => *dim,
            ConvexSet::Hull { vertices } => vertices.first().map_or(0, Vec::len),
        }
    }

    /// Signed margin, non-negative inside. Halfspace margins are Euclidean
    /// distances to each face; the hull margin is minus the distance.
    pub fn margin(&self, p: &[f64]) -> f64 {
        match self {
            ConvexSet::Interval { lo, hi } => (p[0] - lo).min(hi - p[0]),
            ConvexSet::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| (x - l).min(u - x))
                .fold(f64::INFINITY, f64::min),
            ConvexSet::Halfspaces { a, b } => a
                .iter()
                .zip(b)
                .map(|(row, bk)| halfspace_margin(row, *bk, p))
                .fold(f64::INFINITY, f64::min),
            ConvexSet::Simplex { .. } => {
                let s: f64 = p.iter().sum();
                p.iter().copied().fold(f64::INFINITY, f64::min).min(-(s - 1.0).abs())
            }
            ConvexSet::Hull { vertices } => -hull_distance(vertices, p),
        }
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        self.margin(p) >= -tol
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn halfspace_margin(a: &[f64], b: f64, p: &[f64]) -> f64 {
    (b - dot(a, p)) / dot(a, a).sqrt()
}

/// Euclidean distance from `p` to the convex hull of `vertices`, by
/// projected gradient on the barycentric weights.
fn hull_distance(vertices: &[Vec<f64>], p: &[f64]) -> f64 {
    let m = vertices.len();
    let n = p.len();
    let v = DMatrix::from_fn(n, m, |i, k| vertices[k][i]);
    let gram = v.transpose() * &v;
    let lip = gram.norm().max(1e-300);
    let target = DVector::from_column_slice(p);
    let vt_p = v.transpose() * &target;
    let mut w = DVector::from_element(m, 1.0 / m as f64);
    let mut wbuf = vec![0.0; m];
    for _ in 0..2000 {
        let grad = &gram * &w - &vt_p;
        let step = &w - grad / lip;
        wbuf.copy_from_slice(step.as_slice());
        project_onto_simplex(&mut wbuf);
        let next = DVector::from_column_slice(&wbuf);
        let moved = (&next - &w).norm();
        w = next;
        if moved < 1e-15 {
            break;
        }
    }
    (&v * w - target).norm()
}

/// Euclidean projection onto the unit simplex (sort-based).
pub fn project_onto_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Projection of `v` onto the tangent cone of `set` at `point`, treating
/// constraints with margin at most `1e-9` as active.
pub fn tangent_cone_project(set: &ConvexSet, point: &[f64], v: &[f64]) -> Result<Vec<f64>, SetError> {
    tangent_cone_project_tol(set, point, v, 1e-9)
}

/// As [`tangent_cone_project`] with an explicit activity band. A band wider
/// than one integration step's travel keeps fixed-step solutions inside the
/// set.
pub fn tangent_cone_project_tol(
    set: &ConvexSet,
    point: &[f64],
    v: &[f64],
    active_tol: f64,
) -> Result<Vec<f64>, SetError> {
    let n = set.dim();
    if point.len() != n || v.len() != n {
        return Err(SetError::DimensionMismatch {
            expected: n,
            got: point.len().max(v.len()),
        });
    }
    let margin = set.margin(point);
    if margin < -active_tol.max(1e-9) {
        return Err(SetError::PointOutsideSet { margin });
    }
    let mut d = v.to_vec();
    match set {
        ConvexSet::Interval { lo, hi } => {
            if (point[0] - lo <= active_tol && d[0] < 0.0) || (hi - point[0] <= active_tol && d[0] > 0.0) {
                d[0] = 0.0;
            }
        }
        ConvexSet::Box { lower, upper } => {
            for i in 0..n {
                if (point[i] - lower[i] <= active_tol && d[i] < 0.0)
                    || (upper[i] - point[i] <= active_tol && d[i] > 0.0)
                {
                    d[i] = 0.0;
                }
            }
        }
        ConvexSet::Halfspaces { a, b } => {
            let active: Vec<&[f64]> = a
                .iter()
                .zip(b)
                .filter(|(row, bk)| halfspace_margin(row, **bk, point) <= active_tol)
                .map(|(row, _)| row.as_slice())
                .collect();
            d = project_polyhedral_cone(&active, v);
        }
        ConvexSet::Simplex { .. } => {
            let active: Vec<bool> = point.iter().map(|&x| x <= active_tol).collect();
            d = project_simplex_cone(&active, v);
        }
        ConvexSet::Hull { .. } => return Err(SetError::Unsupported),
    }
    Ok(d)
}

/// Projection onto `{d : a_k·d ≤ 0}` by enumerating candidate active
/// subsets; the feasible candidate nearest to `v` is the projection.
fn project_polyhedral_cone(rows: &[&[f64]], v: &[f64]) -> Vec<f64> {
    let feasible = |d: &[f64]| rows.iter().all(|r| dot(r, d) <= 1e-12 * dot(r, r).sqrt().max(1.0));
    if feasible(v) {
        return v.to_vec();
    }
    let m = rows.len();
    assert!(m <= 16, "too many active constraints for enumeration");
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1u32 << m) {
        let sel: Vec<&[f64]> = (0..m).filter(|k| mask >> k & 1 == 1).map(|k| rows[k]).collect();
        let s = sel.len();
        if s > n {
            continue;
        }
        let a = DMatrix::from_fn(s, n, |i, j| sel[i][j]);
        let gram = &a * a.transpose();
        let rhs = &a * DVector::from_column_slice(v);
        let Some(lam) = gram.lu().solve(&rhs) else {
            continue;
        };
        let d = DVector::from_column_slice(v) - a.transpose() * lam;
        let d: Vec<f64> = d.iter().copied().collect();
        if !feasible(&d) {
            continue;
        }
        let dist: f64 = d.iter().zip(v).map(|(x, y)| (x - y).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| dist < *b) {
            best = Some((dist, d));
        }
    }
    best.map(|(_, d)| d).unwrap_or_else(|| vec![0.0; n])
}

/// Projection onto `{d : Σd = 0, d_i ≥ 0 where active_i}` by an active-set
/// loop that pins negative active coordinates; at most `n` passes.
fn project_simplex_cone(active: &[bool], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut free = vec![true; n];
    let mut d = vec![0.0; n];
    for _ in 0..=n {
        let count = free.iter().filter(|&&f| f).count();
        let mean = (0..n).filter(|&i| free[i]).map(|i| v[i]).sum::<f64>() / count.max(1) as f64;
        for i in 0..n {
            d[i] = if free[i] { v[i] - mean } else { 0.0 };
        }
        let mut changed = false;
        for i in 0..n {
            if free[i] && active[i] && d[i] < 0.0 {
                free[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    d
}

/// Simplex vertex `e_k` with `k` the first maximizer of `payoff`.
pub fn best_response(payoff: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; payoff.len()];
    best_response_into(payoff, &mut out);
    out
}

/// Allocation-free [`best_response`].
pub fn best_response_into(payoff: &[f64], out: &mut [f64]) {
    let mut k = 0;
    for (i, &p) in payoff.iter().enumerate() {
        if p > payoff[k] {
            k = i;
        }
    }
    out.iter_mut().for_each(|o| *o = 0.0);
    if !out.is_empty() {
        out[k] = 1.0;
    }
}

/// Switching rule between the cost and constraint gradient estimates with
/// the boundary weight fixed at `λ = 0.5`.
pub fn sliding_rule(c: f64, xi_j: &[f64], xi_c: &[f64], k: f64) -> Vec<f64> {
    sliding_rule_with(c, xi_j, xi_c, k, 0.5)
}

pub fn sliding_rule_with(c: f64, xi_j: &[f64], xi_c: &[f64], k: f64, lambda: f64) -> Vec<f64> {
    let lambda = if c < 0.0 {
        1.0
    } else if c > 0.0 {
        0.0
    } else {
        lambda.clamp(0.0, 1.0)
    };
    xi_j.iter()
        .zip(xi_c)
        .map(|(j, c)| -k * (lambda * j + (1.0 - lambda) * c))
        .collect()
}
