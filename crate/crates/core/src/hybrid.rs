//! Hybrid systems `H = {C, F, D, G}` and their numerical solutions.
//!
//! Flow and jump sets are signed margins (non-negative inside). Flow and
//! jump maps are single-valued selections written into caller-owned
//! buffers so the integration loop never allocates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::set_valued::unit_ball_point;

/// Signed membership margin: `>= 0` inside, `< 0` outside.
pub type MarginFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Vector field selection: writes `F(x)` into the output slice.
pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// In-place state correction applied after every integration step.
pub type GuardFn = Arc<dyn Fn(&mut [f64]) + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HybridError {
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("({t}, {j}) is outside the hybrid time domain")]
    OutOfDomain { t: f64, j: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Margin of the empty set.
pub fn empty_set() -> MarginFn {
    Arc::new(|_| f64::NEG_INFINITY)
}

/// Margin of the whole space.
pub fn whole_space() -> MarginFn {
    Arc::new(|_| f64::INFINITY)
}

/// Identity jump map.
pub fn identity_map() -> FieldFn {
    Arc::new(|x, out| out.copy_from_slice(x))
}

/// The data `{C, F, D, G}` over a fixed state dimension.
#[derive(Clone)]
pub struct HybridSystem {
    dim: usize,
    flow_set: MarginFn,
    flow_map: FieldFn,
    jump_set: MarginFn,
    jump_map: FieldFn,
    guard: Option<GuardFn>,
}

impl fmt::Debug for HybridSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HybridSystem")
            .field("dim", &self.dim)
            .field("guarded", &self.guard.is_some())
            .finish()
    }
}

impl HybridSystem {
    pub fn new(
        dim: usize,
        flow_set: MarginFn,
        flow_map: FieldFn,
        jump_set: MarginFn,
        jump_map: FieldFn,
    ) -> Self {
        assert!(dim > 0, "state dimension must be positive");
        Self {
            dim,
            flow_set,
            flow_map,
            jump_set,
            jump_map,
            guard: None,
        }
    }

    /// Flow-only system (`D = ∅`).
    pub fn continuous(dim: usize, flow_set: MarginFn, flow_map: FieldFn) -> Self {
        Self::new(dim, flow_set, flow_map, empty_set(), identity_map())
    }

    /// Attach a post-step correction, e.g. renormalizing oscillator pairs
    /// back onto the unit circle.
    pub fn with_guard(mut self, guard: GuardFn) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flow_margin(&self, x: &[f64]) -> f64 {
        (self.flow_set)(x)
    }

    pub fn jump_margin(&self, x: &[f64]) -> f64 {
        (self.jump_set)(x)
    }

    pub fn flow(&self, x: &[f64], dx: &mut [f64]) {
        (self.flow_map)(x, dx)
    }

    pub fn jump(&self, x: &[f64], out: &mut [f64]) {
        (self.jump_map)(x, out)
    }

    /// Allocating convenience around [`HybridSystem::flow`].
    pub fn flow_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.dim];
        self.flow(x, &mut dx);
        dx
    }

    /// Allocating convenience around [`HybridSystem::jump`].
    pub fn jump_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.jump(x, &mut out);
        out
    }

    pub fn guard(&self) -> Option<&GuardFn> {
        self.guard.as_ref()
    }

    pub(crate) fn parts(&self) -> (MarginFn, FieldFn, MarginFn, FieldFn) {
        (
            self.flow_set.clone(),
            self.flow_map.clone(),
            self.jump_set.clone(),
            self.jump_map.clone(),
        )
    }
}

/// Which branch wins at points of `C ∩ D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum JumpPolicy {
    #[default]
    JumpFirst,
    FlowFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// RK4 step (seconds).
    pub h: f64,
    pub jump_policy: JumpPolicy,
    pub j_max: usize,
    pub t_max: f64,
    pub tol_mem: f64,
    pub tol_event: f64,
    /// Forwarded to seeded selectors when scenarios are built.
    pub rng_seed: u64,
    /// Keep every `sample_stride`-th step; interval endpoints are always kept.
    pub sample_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            h: 1e-2,
            jump_policy: JumpPolicy::JumpFirst,
            j_max: 1000,
            t_max: 10.0,
            tol_mem: 1e-9,
            tol_event: 1e-10,
            rng_seed: 0,
            sample_stride: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), HybridError> {
        let bad = |m: &str| Err(HybridError::InvalidConfig(m.to_string()));
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h must be positive");
        }
        if !(self.tol_event > 0.0 && self.tol_event < self.h) {
            return bad("tol_event must lie in (0, h)");
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be finite and non-negative");
        }
        if !(self.tol_mem >= 0.0) {
            return bad("tol_mem must be non-negative");
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    HorizonTime,
    HorizonJumps,
    FlowSetExit,
    NoDynamicsFromPoint,
}

/// `[t_start, t_end] × {j}` pieces of a compact hybrid time domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridTimeDomain {
    pub intervals: Vec<(f64, f64, usize)>,
}

impl HybridTimeDomain {
    pub fn jump_count(&self) -> usize {
        self.intervals.len().saturating_sub(1)
    }

    /// Times at which jumps happen, in order.
    pub fn jump_times(&self) -> Vec<f64> {
        self.intervals
            .iter()
            .skip(1)
            .map(|&(t0, _, _)| t0)
            .collect()
    }

    pub fn contains(&self, t: f64, j: usize) -> bool {
        self.intervals
            .get(j)
            .is_some_and(|&(a, b, _)| t >= a && t <= b)
    }

    /// Checks the structural invariants; returns the first violation.
    pub fn check(&self) -> Result<(), String> {
        let Some(first) = self.intervals.first() else {
            return Err("empty domain".into());
        };
        if first.0 != 0.0 || first.2 != 0 {
            return Err("domain must start at (0, 0)".into());
        }
        for (k, w) in self.intervals.iter().enumerate() {
            if !(w.1 >= w.0) {
                return Err(format!("interval {k} has t_end < t_start"));
            }
            if w.2 != k {
                return Err(format!("interval {k} carries jump index {}", w.2));
            }
            if k > 0 && self.intervals[k - 1].1 != w.0 {
                return Err(format!("interval {k} does not start where {} ends", k - 1));
            }
        }
        Ok(())
    }
}

/// Flow samples of one interval `I_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPiece {
    pub j: usize,
    pub times: Vec<f64>,
    /// Row-major, `times.len() × dim`.
    pub states: Vec<f64>,
}

impl FlowPiece {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn state(&self, k: usize, dim: usize) -> &[f64] {
        &self.states[k * dim..(k + 1) * dim]
    }
}

/// A sampled hybrid arc. Jump `j → j+1` maps the last sample of piece `j`
/// to the first sample of piece `j+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridArc {
    dim: usize,
    pieces: Vec<FlowPiece>,
}

/// One jump of an arc.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord<'a> {
    pub t: f64,
    pub j: usize,
    pub x_pre: &'a [f64],
    pub x_post: &'a [f64],
}

impl HybridArc {
    /// Builds an arc from pieces, validating ordering and shapes.
    pub fn from_pieces(dim: usize, pieces: Vec<FlowPiece>) -> Result<Self, HybridError> {
        let bad = |m: String| Err(HybridError::InvalidConfig(m));
        if dim == 0 || pieces.is_empty() {
            return bad("arc needs a positive dimension and at least one piece".into());
        }
        for (k, p) in pieces.iter().enumerate() {
            if p.j != k || p.times.is_empty() || p.states.len() != p.times.len() * dim {
                return bad(format!("malformed piece {k}"));
            }
            if p.times.windows(2).any(|w| !(w[1] >= w[0])) {
                return bad(format!("piece {k} times are not ordered"));
            }
            if k > 0 && pieces[k - 1].t_end() != p.t_start() {
                return bad(format!("piece {k} starts away from the previous jump time"));
            }
        }
        if pieces[0].t_start() != 0.0 {
            return bad("arc must start at t = 0".into());
        }
        Ok(Self { dim, pieces })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[FlowPiece] {
        &self.pieces
    }

    pub fn piece(&self, j: usize) -> Option<&FlowPiece> {
        self.pieces.get(j)
    }

    pub fn jump_count(&self) -> usize {
        self.pieces.len() - 1
    }

    pub fn domain(&self) -> HybridTimeDomain {
        HybridTimeDomain {
            intervals: self
                .pieces
                .iter()
                .map(|p| (p.t_start(), p.t_end(), p.j))
                .collect(),
        }
    }

    pub fn jumps(&self) -> impl Iterator<Item = JumpRecord<'_>> {
        let n = self.dim;
        self.pieces.windows(2).map(move |w| JumpRecord {
            t: w[1].t_start(),
            j: w[0].j,
            x_pre: w[0].state(w[0].len() - 1, n),
            x_post: w[1].state(0, n),
        })
    }

    pub fn initial(&self) -> &[f64] {
        self.pieces[0].state(0, self.dim)
    }

    pub fn terminal(&self) -> &[f64] {
        let p = self.pieces.last().unwrap();
        p.state(p.len() - 1, self.dim)
    }

    pub fn terminal_time(&self) -> f64 {
        self.pieces.last().unwrap().t_end()
    }

    /// Every stored `(t, j, x)` in hybrid-time order.
    pub fn samples(&self) -> impl Iterator<Item = (f64, usize, &[f64])> {
        let n = self.dim;
        self.pieces.iter().flat_map(move |p| {
            p.times
                .iter()
                .enumerate()
                .map(move |(k, &t)| (t, p.j, p.state(k, n)))
        })
    }

    pub fn sample_count(&self) -> usize {
        self.pieces.iter().map(FlowPiece::len).sum()
    }

    /// Restricts the arc to the listed coordinates.
    pub fn project(&self, coords: &[usize]) -> HybridArc {
        assert!(!coords.is_empty() && coords.iter().all(|&c| c < self.dim));
        let pieces = self
            .pieces
            .iter()
            .map(|p| FlowPiece {
                j: p.j,
                times: p.times.clone(),
                states: (0..p.len())
                    .flat_map(|k| {
                        let x = p.state(k, self.dim);
                        coords.iter().map(move |&c| x[c])
                    })
                    .collect(),
            })
            .collect();
        HybridArc {
            dim: coords.len(),
            pieces,
        }
    }

    /// Time series of one coordinate over the whole arc.
    pub fn coordinate(&self, c: usize) -> Vec<(f64, usize, f64)> {
        self.samples().map(|(t, j, x)| (t, j, x[c])).collect()
    }
}

/// Linear interpolation of the arc at `(t, j)`.
pub fn sample_at(arc: &HybridArc, t: f64, j: usize) -> Result<Vec<f64>, HybridError> {
    let out = HybridError::OutOfDomain { t, j };
    let p = arc.piece(j).ok_or(out.clone())?;
    if !(t >= p.t_start() && t <= p.t_end()) {
        return Err(out);
    }
    let n = arc.dim();
    let k = p.times.partition_point(|&s| s <= t);
    if k == 0 {
        return Ok(p.state(0, n).to_vec());
    }
    let lo = k - 1;
    if lo + 1 >= p.len() || p.times[lo] == t {
        return Ok(p.state(lo, n).to_vec());
    }
    let (t0, t1) = (p.times[lo], p.times[lo + 1]);
    let w = (t - t0) / (t1 - t0);
    let (a, b) = (p.state(lo, n), p.state(lo + 1, n));
    Ok(a.iter().zip(b).map(|(a, b)| a + w * (b - a)).collect())
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub arc: HybridArc,
    pub termination: Termination,
    pub steps: usize,
    /// Jumps preceded by less than `10 · tol_event` of flow.
    pub zeno_warnings: usize,
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// One classical RK4 step of size `h` from `x` into `out`.
    fn rk4(&mut self, sys: &HybridSystem, x: &[f64], h: f64, out: &mut [f64]) {
        sys.flow(x, &mut self.k1);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        sys.flow(&self.tmp, &mut self.k2);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        sys.flow(&self.tmp, &mut self.k3);
        for i in 0..x.len() {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        sys.flow(&self.tmp, &mut self.k4);
        for i in 0..x.len() {
            out[i] = x[i] + h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        if let Some(g) = sys.guard() {
            g(out);
        }
    }
}

struct Recorder {
    dim: usize,
    stride: usize,
    pieces: Vec<FlowPiece>,
    since_kept: usize,
}

impl Recorder {
    fn open(&mut self, t: f64, x: &[f64]) {
        let j = self.pieces.len();
        self.pieces.push(FlowPiece {
            j,
            times: vec![t],
            states: x.to_vec(),
        });
        self.since_kept = 0;
    }

    fn push(&mut self, t: f64, x: &[f64], force: bool) {
        self.since_kept += 1;
        if force || self.since_kept >= self.stride {
            let p = self.pieces.last_mut().unwrap();
            p.times.push(t);
            p.states.extend_from_slice(x);
            self.since_kept = 0;
        }
    }

    /// Makes sure the last accepted state is stored before a jump or stop.
    fn close(&mut self, t: f64, x: &[f64]) {
        let p = self.pieces.last_mut().unwrap();
        if p.t_end() != t {
            p.times.push(t);
            p.states.extend_from_slice(x);
        }
        self.since_kept = 0;
    }

    fn finish(self) -> HybridArc {
        HybridArc {
            dim: self.dim,
            pieces: self.pieces,
        }
    }
}

#[inline]
fn inside(m: f64, tol: f64) -> bool {
    m >= -tol
}

/// Computes one solution of `sys` from `x0`.
///
/// Flow uses fixed-step RK4. A step that enters `D` (jump-first) or leaves
/// `C` is shortened by bisection until the event is bracketed within
/// `tol_event`. A point reached by leaving `C` counts as a jump point when
/// `D` is within `tol_mem` plus the margin change over the final bracket.
pub fn simulate(
    sys: &HybridSystem,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution, HybridError> {
    let n = sys.dim();
    if x0.len() != n {
        return Err(HybridError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    cfg.validate()?;
    let tol = cfg.tol_mem;
    let mut rec = Recorder {
        dim: n,
        stride: cfg.sample_stride,
        pieces: Vec::new(),
        since_kept: 0,
    };
    rec.open(0.0, x0);

    let mut ws = Workspace::new(n);
    let mut x = x0.to_vec();
    let mut x_new = vec![0.0; n];
    let mut x_lo = vec![0.0; n];
    let mut x_hi = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut t = 0.0_f64;
    let mut jumps = 0usize;
    let mut steps = 0usize;
    let mut zeno_warnings = 0usize;
    // Start of the current interval I_j.
    let mut interval_start = 0.0_f64;
    // Step times are counted from `base_t` to avoid drift from repeated sums.
    let mut base_t = 0.0_f64;
    let mut base_steps = 0u64;
    // Set when the current point was reached by bisecting an exit from C;
    // holds the extra slack granted to D at that point.
    let mut exit_slack: Option<f64> = None;

    let termination = loop {
        let c = sys.flow_margin(&x);
        let d = sys.jump_margin(&x);
        let in_c = inside(c, tol);
        let at_exit = exit_slack.is_some();
        let in_d = inside(d, tol + exit_slack.take().unwrap_or(0.0));

        if in_d && (at_exit || !in_c || cfg.jump_policy == JumpPolicy::JumpFirst) {
            if jumps >= cfg.j_max {
                rec.close(t, &x);
                break Termination::HorizonJumps;
            }
            if jumps > 0 && t - interval_start < 10.0 * cfg.tol_event {
                zeno_warnings += 1;
                if zeno_warnings == 1 {
                    log::warn!(
                        "jump {} follows {:.3e} s of flow; solution is likely Zeno",
                        jumps + 1,
                        t - interval_start
                    );
                }
            }
            rec.close(t, &x);
            sys.jump(&x, &mut scratch);
            std::mem::swap(&mut x, &mut scratch);
            jumps += 1;
            interval_start = t;
            base_t = t;
            base_steps = 0;
            rec.open(t, &x);
            continue;
        }
        if !in_c || at_exit {
            rec.close(t, &x);
            let stuck = rec.pieces.last().is_none_or(|p| p.len() == 1) && !at_exit;
            break if stuck {
                Termination::NoDynamicsFromPoint
            } else {
                Termination::FlowSetExit
            };
        }
        let remaining = cfg.t_max - t;
        if remaining <= 1e-12 * cfg.t_max.max(1.0) {
            rec.close(t, &x);
            break Termination::HorizonTime;
        }
        let last = remaining <= cfg.h * (1.0 + 1e-9);
        let step = if last { remaining } else { cfg.h };
        ws.rk4(sys, &x, step, &mut x_new);
        steps += 1;
        let c_new = sys.flow_margin(&x_new);
        let d_new = sys.jump_margin(&x_new);
        let enters_d = cfg.jump_policy == JumpPolicy::JumpFirst && !in_d && inside(d_new, tol);
        let leaves_c = !inside(c_new, tol);

        if !(enters_d || leaves_c) {
            base_steps += 1;
            std::mem::swap(&mut x, &mut x_new);
            t = if last {
                cfg.t_max
            } else {
                base_t + base_steps as f64 * cfg.h
            };
            rec.push(t, &x, last);
            continue;
        }

        // Bisect for the earliest event in (0, step]: `lo` is event-free,
        // `hi` is not. Thresholds are clipped at the start/end margins so a
        // point that starts marginally outside C, or a thin D reached only
        // within tolerance, does not collapse the bracket onto 0.
        let c_floor = c.min(0.0);
        let d_ceil = d_new.min(0.0);
        let (mut lo, mut hi) = (0.0, step);
        x_lo.copy_from_slice(&x);
        x_hi.copy_from_slice(&x_new);
        while hi - lo > cfg.tol_event {
            let mid = 0.5 * (lo + hi);
            ws.rk4(sys, &x, mid, &mut scratch);
            let hit = (enters_d && sys.jump_margin(&scratch) >= d_ceil)
                || sys.flow_margin(&scratch) < c_floor;
            if hit {
                hi = mid;
                x_hi.copy_from_slice(&scratch);
            } else {
                lo = mid;
                x_lo.copy_from_slice(&scratch);
            }
        }
        let d_hi = sys.jump_margin(&x_hi);
        let c_hi = sys.flow_margin(&x_hi);
        if enters_d && inside(d_hi, tol) && inside(c_hi, tol) {
            x.copy_from_slice(&x_hi);
            t += hi;
        } else {
            x.copy_from_slice(&x_lo);
            t += lo;
            let dc = (c_hi - sys.flow_margin(&x_lo)).abs();
            let dd = (d_hi - sys.jump_margin(&x_lo)).abs();
            exit_slack = Some(if dc.is_finite() && dd.is_finite() { dc + dd } else { 0.0 });
        }
        base_t = t;
        base_steps = 0;
        rec.push(t, &x, true);
    };

    Ok(Solution {
        arc: rec.finish(),
        termination,
        steps,
        zeno_warnings,
    })
}

/// Nonnegative state-dependent inflation weight `σ(x)`.
pub type WeightFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The `ρ`-inflated system. Margins of `C` and `D` are relaxed by `ρσ(x)`;
/// flow and jump values are perturbed by `ρσ(·)d` with `d` a point of the
/// unit ball chosen by hashing the evaluation point with `seed`. This is a
/// selection from the inflated maps, not the full hull.
pub fn inflate(sys: &HybridSystem, rho: f64, sigma: WeightFn, seed: u64) -> HybridSystem {
    assert!(rho >= 0.0, "inflation radius must be non-negative");
    let (c, f, d, g) = sys.parts();
    let n = sys.dim();
    let s1 = sigma.clone();
    let s2 = sigma.clone();
    let s3 = sigma.clone();
    let flow_set: MarginFn = Arc::new(move |x| c(x) + rho * s1(x));
    let jump_set: MarginFn = Arc::new(move |x| d(x) + rho * s2(x));
    let flow_map: FieldFn = Arc::new(move |x, dx| {
        f(x, dx);
        let r = rho * sigma(x);
        if r > 0.0 {
            add_ball_point(dx, r, x, seed);
        }
    });
    let jump_map: FieldFn = Arc::new(move |x, out| {
        g(x, out);
        let r = rho * s3(out);
        if r > 0.0 {
            add_ball_point(out, r, x, seed ^ 0x9e37_79b9_7f4a_7c15);
        }
    });
    let mut inflated = HybridSystem::new(n, flow_set, flow_map, jump_set, jump_map);
    if let Some(guard) = sys.guard() {
        inflated = inflated.with_guard(guard.clone());
    }
    inflated
}

fn add_ball_point(v: &mut [f64], r: f64, key: &[f64], seed: u64) {
    let n = v.len();
    // Up to a few dimensions on the stack; fall back to the heap otherwise.
    let mut buf = [0.0; 16];
    if n <= buf.len() {
        unit_ball_point(key, seed, &mut buf[..n]);
        for (vi, di) in v.iter_mut().zip(&buf[..n]) {
            *vi += r * di;
        }
    } else {
        let mut d = vec![0.0; n];
        unit_ball_point(key, seed, &mut d);
        for (vi, di) in v.iter_mut().zip(&d) {
            *vi += r * di;
        }
    }
}

/// Period average of `f(x, ·)` by the composite trapezoid rule on
/// `quad_points` panels.
pub fn empirical_average<F>(f: F, period: f64, x: &[f64], quad_points: usize) -> Vec<f64>
where
    F: Fn(&[f64], f64) -> Vec<f64>,
{
    assert!(period > 0.0, "period must be positive");
    assert!(quad_points >= 8, "need at least 8 quadrature panels");
    let dt = period / quad_points as f64;
    let mut acc = f(x, 0.0);
    acc.iter_mut().for_each(|a| *a *= 0.5);
    for k in 1..quad_points {
        for (a, v) in acc.iter_mut().zip(f(x, k as f64 * dt)) {
            *a += v;
        }
    }
    for (a, v) in acc.iter_mut().zip(f(x, period)) {
        *a += 0.5 * v;
    }
    acc.iter_mut().for_each(|a| *a *= dt / period);
    acc
}
