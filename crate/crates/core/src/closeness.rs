//! Graphical `(τ, ε)`-closeness of hybrid arcs.
//!
//! Matching times `s` range over the other arc's stored samples and the
//! straight segments between them, so a match may fall between samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::{simulate, HybridArc, HybridError, HybridSystem, SolverConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosenessError {
    #[error("arcs have different state dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("coordinate mask entry {0} out of range")]
    BadMask(usize),
    #[error("epsilon grid must be non-empty, positive and ascending")]
    BadGrid,
    #[error(transparent)]
    Simulation(#[from] HybridError),
}

/// Marker serialized as the string `"exceeds grid"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exceeds {
    #[serde(rename = "exceeds grid")]
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MinEps {
    Certified(f64),
    Flag(Exceeds),
}

impl MinEps {
    pub fn value(&self) -> Option<f64> {
        match self {
            MinEps::Certified(v) => Some(*v),
            MinEps::Flag(_) => None,
        }
    }
}

/// Match found for one sample `(t, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// `"a"`: sample of the first arc matched in the second; `"b"`: reverse.
    pub from: char,
    pub t: f64,
    pub j: usize,
    pub s: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    pub tau: f64,
    pub eps_grid: Vec<f64>,
    pub min_eps: MinEps,
    pub witnesses: Vec<Witness>,
}

fn check(a: &HybridArc, b: &HybridArc, mask: Option<&[usize]>) -> Result<(), ClosenessError> {
    if a.dim() != b.dim() {
        return Err(ClosenessError::DimensionMismatch(a.dim(), b.dim()));
    }
    if let Some(&bad) = mask.and_then(|m| m.iter().find(|&&c| c >= a.dim())) {
        return Err(ClosenessError::BadMask(bad));
    }
    Ok(())
}

fn dist2(x: &[f64], y: &[f64], mask: Option<&[usize]>) -> f64 {
    match mask {
        None => x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum(),
        Some(m) => m.iter().map(|&c| (x[c] - y[c]) * (x[c] - y[c])).sum(),
    }
}

/// Smallest distance from `p` to the segment `x + w(y − x)`, `w ∈ [w0, w1]`.
fn segment_distance(p: &[f64], x: &[f64], y: &[f64], w0: f64, w1: f64, mask: Option<&[usize]>) -> (f64, f64) {
    fn run(coords: impl Iterator<Item = usize> + Clone, p: &[f64], x: &[f64], y: &[f64], w0: f64, w1: f64) -> (f64, f64) {
        let (mut num, mut den) = (0.0, 0.0);
        for c in coords.clone() {
            let d = y[c] - x[c];
            num += (p[c] - x[c]) * d;
            den += d * d;
        }
        let w = if den > 0.0 { (num / den).clamp(w0, w1) } else { w0 };
        let acc: f64 = coords
            .map(|c| {
                let r = p[c] - (x[c] + w * (y[c] - x[c]));
                r * r
            })
            .sum();
        (w, acc.sqrt())
    }
    match mask {
        None => run(0..p.len(), p, x, y, w0, w1),
        Some(m) => run(m.iter().copied(), p, x, y, w0, w1),
    }
}

/// Searches piece `j` of `b` for some `s` with `|t − s| ≤ eps` and state
/// distance `< eps`, scanning outward from `t`. Returns `(s, distance)`.
fn find_match(b: &HybridArc, t: f64, j: usize, p: &[f64], eps: f64, mask: Option<&[usize]>) -> Option<(f64, f64)> {
    let piece = b.piece(j)?;
    let n = b.dim();
    let (lo, hi) = ((t - eps).max(piece.t_start()), (t + eps).min(piece.t_end()));
    if lo > hi {
        return None;
    }
    let times = &piece.times;
    if times.len() == 1 {
        let d = dist2(p, piece.state(0, n), mask).sqrt();
        return (d < eps).then_some((times[0], d));
    }
    // Segment k spans [times[k], times[k + 1]].
    let segs = times.len() - 1;
    let centre = times.partition_point(|&s| s <= t.clamp(lo, hi)).clamp(1, segs) - 1;
    let probe = |k: usize| -> Option<(f64, f64)> {
        let (s0, s1) = (times[k], times[k + 1]);
        if s1 < lo || s0 > hi {
            return None;
        }
        let (x, y) = (piece.state(k, n), piece.state(k + 1, n));
        if s1 == s0 {
            let d = dist2(p, x, mask).sqrt().min(dist2(p, y, mask).sqrt());
            return (d < eps).then_some((s0, d));
        }
        let w0 = ((lo - s0) / (s1 - s0)).max(0.0);
        let w1 = ((hi - s0) / (s1 - s0)).min(1.0);
        let (w, d) = segment_distance(p, x, y, w0, w1, mask);
        (d < eps).then_some((s0 + w * (s1 - s0), d))
    };
    if let Some(m) = probe(centre) {
        return Some(m);
    }
    let (mut left, mut right) = (centre, centre + 1);
    loop {
        let mut alive = false;
        if left > 0 && times[left] >= lo {
            left -= 1;
            alive = true;
            if let Some(m) = probe(left) {
                return Some(m);
            }
        }
        if right < segs && times[right] <= hi {
            alive = true;
            if let Some(m) = probe(right) {
                return Some(m);
            }
            right += 1;
        }
        if !alive {
            return None;
        }
    }
}

fn direction(
    a: &HybridArc,
    b: &HybridArc,
    tau: f64,
    eps: f64,
    mask: Option<&[usize]>,
    from: char,
    mut sink: Option<&mut Vec<Witness>>,
) -> bool {
    for (t, j, x) in a.samples() {
        if t + j as f64 > tau {
            continue;
        }
        match find_match(b, t, j, x, eps, mask) {
            Some((s, distance)) => {
                if let Some(w) = sink.as_deref_mut() {
                    w.push(Witness { from, t, j, s, distance });
                }
            }
            None => return false,
        }
    }
    true
}

/// `(τ, ε)`-closeness on the full state.
pub fn tau_eps_close(a: &HybridArc, b: &HybridArc, tau: f64, eps: f64) -> Result<bool, ClosenessError> {
    tau_eps_close_masked(a, b, tau, eps, None)
}

/// `(τ, ε)`-closeness measuring state distance on `mask` coordinates only.
pub fn tau_eps_close_masked(
    a: &HybridArc,
    b: &HybridArc,
    tau: f64,
    eps: f64,
    mask: Option<&[usize]>,
) -> Result<bool, ClosenessError> {
    check(a, b, mask)?;
    assert!(eps > 0.0, "eps must be positive");
    Ok(direction(a, b, tau, eps, mask, 'a', None) && direction(b, a, tau, eps, mask, 'b', None))
}

pub fn min_epsilon(a: &HybridArc, b: &HybridArc, tau: f64, eps_grid: &[f64]) -> Result<ClosenessReport, ClosenessError> {
    min_epsilon_masked(a, b, tau, eps_grid, None)
}

/// Smallest grid value certifying closeness, found by bisection over the
/// grid (the predicate is monotone in `ε`).
pub fn min_epsilon_masked(
    a: &HybridArc,
    b: &HybridArc,
    tau: f64,
    eps_grid: &[f64],
    mask: Option<&[usize]>,
) -> Result<ClosenessReport, ClosenessError> {
    check(a, b, mask)?;
    if eps_grid.is_empty() || eps_grid[0] <= 0.0 || eps_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ClosenessError::BadGrid);
    }
    let holds = |eps: f64| direction(a, b, tau, eps, mask, 'a', None) && direction(b, a, tau, eps, mask, 'b', None);
    let report = |min_eps, witnesses| ClosenessReport {
        tau,
        eps_grid: eps_grid.to_vec(),
        min_eps,
        witnesses,
    };
    let last = eps_grid.len() - 1;
    if !holds(eps_grid[last]) {
        return Ok(report(MinEps::Flag(Exceeds::Grid), Vec::new()));
    }
    let (mut lo, mut hi) = (0usize, last);
    if holds(eps_grid[0]) {
        hi = 0;
    } else {
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if holds(eps_grid[mid]) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let eps = eps_grid[hi];
    let mut witnesses = Vec::new();
    direction(a, b, tau, eps, mask, 'a', Some(&mut witnesses));
    direction(b, a, tau, eps, mask, 'b', Some(&mut witnesses));
    Ok(report(MinEps::Certified(eps), witnesses))
}

/// Log-spaced grid of `count` values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let r = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (r * k as f64).exp()).collect()
}

/// What [`closeness_curve`] compares for each parameter value.
#[derive(Debug, Clone, Default)]
pub struct CurveOptions<'a> {
    /// Coordinates of the simulated arc kept before comparison.
    pub project: Option<&'a [usize]>,
    /// Coordinates used for the state distance after projection.
    pub mask: Option<&'a [usize]>,
}

/// Simulates `build(p)` for every parameter and measures its closeness to
/// `reference`. Runs in parallel.
#[allow(clippy::too_many_arguments)]
pub fn closeness_curve<B>(
    build: B,
    params: &[f64],
    x0: &[f64],
    config: &SolverConfig,
    reference: &HybridArc,
    tau: f64,
    eps_grid: &[f64],
    opts: &CurveOptions<'_>,
) -> Result<Vec<(f64, ClosenessReport)>, ClosenessError>
where
    B: Fn(f64) -> HybridSystem + Sync,
{
    params
        .par_iter()
        .map(|&p| {
            let sol = simulate(&build(p), x0, config)?;
            let arc = match opts.project {
                Some(c) => sol.arc.project(c),
                None => sol.arc,
            };
            Ok((p, min_epsilon_masked(&arc, reference, tau, eps_grid, opts.mask)?))
        })
        .collect()
}
