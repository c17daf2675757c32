//! Timers, monitors and hysteresis logic that restrict when and how often
//! modes may switch.
//!
//! Each constructor returns a small value exposing its flow rate, margins
//! and jump map so scenarios can splice it into larger states, plus a
//! `system()` for simulating it on its own.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::hybrid::{HybridArc, HybridSystem, HybridTimeDomain};
use crate::set_valued::{tangent_cone_project, unit_ball_point, ConvexSet, Selector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SupervisorError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("thresholds must satisfy c0 > c10 > 0 (got c0 = {c0}, c10 = {c10})")]
    ThresholdOrderViolation { c0: f64, c10: f64 },
    #[error("obstacle data violates the separation requirement: {0}")]
    SeparationViolated(String),
}

fn invalid<T>(msg: &str) -> Result<T, SupervisorError> {
    Err(SupervisorError::InvalidParams(msg.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwellParams {
    pub n0: f64,
    pub eta1: f64,
}

impl DwellParams {
    pub fn validate(&self) -> Result<(), SupervisorError> {
        if !(self.n0 >= 1.0) || !(self.eta1 > 0.0) {
            return invalid("need N0 >= 1 and eta1 > 0");
        }
        Ok(())
    }
}

/// `τ̇₁ ∈ [0, η₁]` on `[0, N₀]`, `τ₁⁺ = τ₁ − 1` on `[1, N₀]`.
#[derive(Debug, Clone)]
pub struct DwellTimer {
    pub params: DwellParams,
    pub selector: Selector,
}

pub fn dwell_time_automaton(params: DwellParams, selector: Selector) -> Result<DwellTimer, SupervisorError> {
    params.validate()?;
    Ok(DwellTimer { params, selector })
}

impl DwellTimer {
    /// Selected rate; `key` identifies the evaluation point.
    pub fn rate(&self, key: &[f64]) -> f64 {
        self.selector.pick(0.0, self.params.eta1, key)
    }

    pub fn flow_margin(&self, tau: f64) -> f64 {
        tau.min(self.params.n0 - tau)
    }

    pub fn jump_margin(&self, tau: f64) -> f64 {
        (tau - 1.0).min(self.params.n0 - tau)
    }

    pub fn jump(&self, tau: f64) -> f64 {
        tau - 1.0
    }

    /// The automaton alone, with state `τ₁`.
    pub fn system(&self) -> HybridSystem {
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        let d = self.clone();
        HybridSystem::new(
            1,
            Arc::new(move |x| a.flow_margin(x[0])),
            Arc::new(move |x, dx| dx[0] = b.rate(x)),
            Arc::new(move |x| c.jump_margin(x[0])),
            Arc::new(move |x, out| out[0] = d.jump(x[0])),
        )
    }
}

/// Whether every pair `(s, i) ≤ (t, j)` of the domain satisfies
/// `j − i ≤ η₁(t − s) + N₀`.
pub fn adt_verify(domain: &HybridTimeDomain, p: &DwellParams) -> bool {
    let jumps = domain.jump_times();
    // The tightest pairs start just before one jump and end just after a
    // later one.
    for a in 0..jumps.len() {
        for b in a..jumps.len() {
            let count = (b - a + 1) as f64;
            if count > p.eta1 * (jumps[b] - jumps[a]) + p.n0 + 1e-9 {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationParams {
    pub t0: f64,
    pub eta2: f64,
    pub unstable_modes: Vec<i64>,
}

impl ActivationParams {
    pub fn validate(&self) -> Result<(), SupervisorError> {
        if !(self.t0 >= 0.0) || !(0.0..1.0).contains(&self.eta2) {
            return invalid("need T0 >= 0 and eta2 in [0, 1)");
        }
        Ok(())
    }

    pub fn is_unstable(&self, q: f64) -> bool {
        self.unstable_modes.contains(&(q.round() as i64))
    }
}

/// `τ̇₂ ∈ [0, η₂] − 1{q ∈ 𝒬_u}` on `[0, T₀]`, `τ₂⁺ = τ₂`.
///
/// At `τ₂ = T₀` the selected rate is lowered to the indicator so the
/// monitor saturates instead of leaving its flow set; [`clamp`] removes the
/// overshoot of a single integration step.
///
/// [`clamp`]: ActivationMonitor::clamp
#[derive(Debug, Clone)]
pub struct ActivationMonitor {
    pub params: ActivationParams,
    pub selector: Selector,
}

pub fn activation_monitor(params: ActivationParams, selector: Selector) -> Result<ActivationMonitor, SupervisorError> {
    params.validate()?;
    Ok(ActivationMonitor { params, selector })
}

impl ActivationMonitor {
    pub fn rate(&self, tau2: f64, q: f64, key: &[f64]) -> f64 {
        let ind = if self.params.is_unstable(q) { 1.0 } else { 0.0 };
        let mut s = self.selector.pick(0.0, self.params.eta2, key);
        if tau2 >= self.params.t0 {
            s = s.min(ind);
        }
        s - ind
    }

    pub fn flow_margin(&self, tau2: f64) -> f64 {
        tau2.min(self.params.t0 - tau2)
    }

    pub fn jump_margin(&self, tau2: f64) -> f64 {
        self.flow_margin(tau2)
    }

    pub fn clamp(&self, tau2: f64) -> f64 {
        tau2.min(self.params.t0)
    }

    /// Monitor with a frozen mode, state `(τ₂, q)`.
    pub fn system(&self) -> HybridSystem {
        let (a, b, c) = (self.clone(), self.clone(), self.clone());
        HybridSystem::continuous(
            2,
            Arc::new(move |x| a.flow_margin(x[0])),
            Arc::new(move |x, dx| {
                dx[0] = b.rate(x[0], x[1], x);
                dx[1] = 0.0;
            }),
        )
        .with_guard(Arc::new(move |x| x[0] = c.clamp(x[0])))
    }
}

/// Whether the mode trace stored in coordinate `q` of `arc` keeps the
/// unstable activation time below `T₀ + η₂(t − s)` on every interval.
pub fn activation_verify(arc: &HybridArc, q: usize, p: &ActivationParams) -> bool {
    // g(t) = A(t) − η₂t is piecewise linear, so max over s ≤ t of
    // g(t) − g(s) is attained at breakpoints.
    let start = arc.pieces().first().map_or(0.0, |p| p.t_start());
    let (mut acc, mut g_min) = (0.0, -p.eta2 * start);
    for piece in arc.pieces() {
        let (t0, t1) = (piece.t_start(), piece.t_end());
        let mode = piece.state(0, arc.dim())[q];
        let g0 = acc - p.eta2 * t0;
        g_min = g_min.min(g0);
        if p.is_unstable(mode) {
            acc += t1 - t0;
        }
        let g1 = acc - p.eta2 * t1;
        if g1 - g_min > p.t0 + 1e-9 {
            return false;
        }
        g_min = g_min.min(g1);
    }
    true
}

/// `ẋ₁ = 1` on `[0, T]`, `x₁⁺ = 0` at `x₁ = T`.
pub fn periodic_reset_timer(period: f64) -> Result<HybridSystem, SupervisorError> {
    if !(period > 0.0) {
        return invalid("period must be positive");
    }
    Ok(HybridSystem::new(
        1,
        Arc::new(move |x| x[0].min(period - x[0])),
        Arc::new(|_, dx| dx[0] = 1.0),
        Arc::new(move |x| -(x[0] - period).abs()),
        Arc::new(|_, out| out[0] = 0.0),
    ))
}

pub type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Threshold sets for switching between a fine-tuning mode (`q = 0`) near
/// the optimal value and an exploration mode (`q = 1`) away from it.
#[derive(Clone)]
pub struct Hysteresis {
    pub cost: CostFn,
    pub j_star: f64,
    pub c0: f64,
    pub c10: f64,
}

impl fmt::Debug for Hysteresis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hysteresis")
            .field("j_star", &self.j_star)
            .field("c0", &self.c0)
            .field("c10", &self.c10)
            .finish()
    }
}

pub fn hysteresis_sets(cost: CostFn, j_star: f64, c0: f64, c10: f64) -> Result<Hysteresis, SupervisorError> {
    if !(c0 > c10 && c10 > 0.0) {
        return Err(SupervisorError::ThresholdOrderViolation { c0, c10 });
    }
    Ok(Hysteresis { cost, j_star, c0, c10 })
}

impl Hysteresis {
    fn gap(&self, u: &[f64]) -> f64 {
        (self.cost)(u) - self.j_star
    }

    /// Margin of `C_q`.
    pub fn flow_margin(&self, u: &[f64], q: u8) -> f64 {
        let g = self.gap(u);
        if q == 0 {
            self.c0 - g
        } else {
            g - self.c10
        }
    }

    /// Margin of `D_q`.
    pub fn jump_margin(&self, u: &[f64], q: u8) -> f64 {
        let g = self.gap(u);
        if q == 0 {
            g - self.c0
        } else {
            self.c10 - g
        }
    }
}

/// Sufficient condition for stability with unstable modes:
/// `λ_s > η₁ ln χ + η₂(λ_s + λ_u)`.
pub fn margin_check(lambda_s: f64, lambda_u: f64, chi: f64, eta1: f64, eta2: f64) -> bool {
    assert!(lambda_s > 0.0 && lambda_u > 0.0 && chi >= 1.0, "need λs, λu > 0 and χ ≥ 1");
    lambda_s > eta1 * chi.ln() + eta2 * (lambda_s + lambda_u)
}

/// Velocity rule for [`SlowDrift`].
#[derive(Clone)]
pub enum DriftSelector {
    Still,
    /// Hash-seeded point of the ball.
    Seeded(u64),
    /// Rotation about `center` at `omega` rad/s.
    Circular { center: Vec<f64>, omega: f64 },
    Custom(Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>),
}

impl fmt::Debug for DriftSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftSelector::Still => write!(f, "Still"),
            DriftSelector::Seeded(s) => write!(f, "Seeded({s})"),
            DriftSelector::Circular { center, omega } => write!(f, "Circular({center:?}, {omega})"),
            DriftSelector::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// `q̇ ∈ η₃𝔹`, `q⁺ ∈ q + η₃𝔹`, kept in a convex set.
#[derive(Debug, Clone)]
pub struct SlowDrift {
    pub eta3: f64,
    pub set: ConvexSet,
    pub selector: DriftSelector,
}

pub fn slow_drift(eta3: f64, set: ConvexSet, selector: DriftSelector) -> Result<SlowDrift, SupervisorError> {
    if !(eta3 >= 0.0) {
        return invalid("eta3 must be non-negative");
    }
    set.validate().map_err(|e| SupervisorError::InvalidParams(e.to_string()))?;
    Ok(SlowDrift { eta3, set, selector })
}

impl SlowDrift {
    fn raw(&self, q: &[f64], out: &mut [f64]) {
        match &self.selector {
            DriftSelector::Still => out.fill(0.0),
            DriftSelector::Seeded(seed) => {
                unit_ball_point(q, *seed, out);
                out.iter_mut().for_each(|o| *o *= self.eta3);
            }
            DriftSelector::Circular { center, omega } => {
                out[0] = -omega * (q[1] - center[1]);
                out[1] = omega * (q[0] - center[0]);
                out[2..].fill(0.0);
            }
            DriftSelector::Custom(f) => f(q, out),
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > self.eta3 {
            out.iter_mut().for_each(|o| *o *= self.eta3 / norm);
        }
    }

    /// Selected velocity, restricted to the tangent cone of the set.
    pub fn velocity(&self, q: &[f64], out: &mut [f64]) {
        self.raw(q, out);
        if self.set.margin(q) < 1e-9 {
            if let Ok(v) = tangent_cone_project(&self.set, q, out) {
                out.copy_from_slice(&v);
            }
        }
    }

    /// Jump `q + η₃d`, with the step halved until it lands in the set.
    pub fn jump(&self, q: &[f64], key_seed: u64, out: &mut [f64]) {
        unit_ball_point(q, key_seed, out);
        let mut scale = self.eta3;
        for _ in 0..60 {
            let cand: Vec<f64> = q.iter().zip(out.iter()).map(|(a, d)| a + scale * d).collect();
            if self.set.contains(&cand, 0.0) {
                out.copy_from_slice(&cand);
                return;
            }
            scale *= 0.5;
        }
        out.copy_from_slice(q);
    }

    /// The drift alone, flowing on the set.
    pub fn system(&self) -> HybridSystem {
        let (a, b) = (self.clone(), self.clone());
        HybridSystem::continuous(
            self.set.dim(),
            Arc::new(move |x| a.set.margin(x)),
            Arc::new(move |x, dx| b.velocity(x, dx)),
        )
    }
}

/// Barrier as a function of the distance `d > 0` to the region boundary.
#[derive(Clone)]
pub enum Barrier {
    Reciprocal { beta: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Barrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Barrier::Reciprocal { beta } => write!(f, "Reciprocal({beta})"),
            Barrier::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Barrier {
    fn eval(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return f64::INFINITY;
        }
        match self {
            Barrier::Reciprocal { beta } => beta / d,
            Barrier::Custom(f) => f(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleParams {
    pub p0: [f64; 2],
    pub rho: f64,
    pub chi: f64,
    pub lambda: f64,
    /// Location of the maximum of the field.
    pub u_star: [f64; 2],
    /// Clearance required around `u_star`.
    pub delta: f64,
}

/// Two overlapping regions around a diamond-shaped obstacle cover and the
/// mode-dependent potentials `Ĵ_q = −J + B_q` used to switch between them.
///
/// The field should peak at zero so that `Ĵ_q` stays positive.
#[derive(Clone)]
pub struct ObstaclePartition {
    pub params: ObstacleParams,
    pub field: CostFn,
    pub barrier: Barrier,
}

impl fmt::Debug for ObstaclePartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObstaclePartition")
            .field("params", &self.params)
            .field("barrier", &self.barrier)
            .finish()
    }
}

const J_CAP: f64 = 1e300;

pub fn obstacle_partition(
    params: ObstacleParams,
    field: CostFn,
    barrier: Barrier,
) -> Result<ObstaclePartition, SupervisorError> {
    let p = &params;
    if !(p.rho > 0.0 && p.chi > 1.0 && p.lambda > 0.0 && p.lambda < p.chi - 1.0 && p.delta > 0.0) {
        return invalid("need rho > 0, chi > 1, 0 < lambda < chi - 1, delta > 0");
    }
    let part = ObstaclePartition { params, field, barrier };
    let p = &part.params;
    let dist = ((p.u_star[0] - p.p0[0]).powi(2) + (p.u_star[1] - p.p0[1]).powi(2)).sqrt();
    if dist <= part.radius() + p.delta {
        return Err(SupervisorError::SeparationViolated(format!(
            "|u* - p0| = {dist} but the cover radius plus clearance is {}",
            part.radius() + p.delta
        )));
    }
    if part.region_margin(1, &p.u_star) <= 0.0 || part.region_margin(2, &p.u_star) <= 0.0 {
        return Err(SupervisorError::SeparationViolated("u* must lie in both regions".into()));
    }
    Ok(part)
}

impl ObstaclePartition {
    /// `2ρ√2`, the 1-norm radius of the cover.
    pub fn radius(&self) -> f64 {
        2.0 * self.params.rho * SQRT_2
    }

    /// Signed distances to the four open half-planes outside the diamond:
    /// below-left, below-right, above-left, above-right.
    pub fn half_planes(&self, u: &[f64]) -> [f64; 4] {
        let [a, b] = self.params.p0;
        let r = self.radius();
        let (x, y) = (u[0] - a, u[1] - b);
        [
            (-x - y - r) / SQRT_2,
            (x - y - r) / SQRT_2,
            (y - x - r) / SQRT_2,
            (x + y - r) / SQRT_2,
        ]
    }

    /// Margin of `𝓛_q`, positive inside.
    pub fn region_margin(&self, q: u8, u: &[f64]) -> f64 {
        let h = self.half_planes(u);
        if q == 1 {
            h[0].max(h[1])
        } else {
            h[2].max(h[3])
        }
    }

    /// Margin of the diamond `ℬ`, positive inside.
    pub fn diamond_margin(&self, u: &[f64]) -> f64 {
        let [a, b] = self.params.p0;
        (self.radius() - (u[0] - a).abs() - (u[1] - b).abs()) / SQRT_2
    }

    /// `Ĵ_q(u)`, infinite outside `𝓛_q`.
    pub fn j_hat(&self, q: u8, u: &[f64]) -> f64 {
        let b = self.barrier.eval(self.region_margin(q, u));
        if b.is_infinite() {
            f64::INFINITY
        } else {
            b - (self.field)(u)
        }
    }

    fn log_j(&self, q: u8, u: &[f64]) -> f64 {
        self.j_hat(q, u).clamp(1e-300, J_CAP).ln()
    }

    /// Margin of `C_{u,q}` on a log scale: `ln χ + ln Ĵ_{3−q} − ln Ĵ_q`,
    /// combined with the closure of the complement of `ℬ`.
    pub fn flow_margin(&self, q: u8, u: &[f64]) -> f64 {
        let m = self.params.chi.ln() + self.log_j(3 - q, u) - self.log_j(q, u);
        m.min(-self.diamond_margin(u))
    }

    /// Margin of `D_{u,q}`: `ln Ĵ_q − ln(χ − λ) − ln Ĵ_{3−q}`.
    pub fn jump_margin(&self, q: u8, u: &[f64]) -> f64 {
        let m = self.log_j(q, u) - (self.params.chi - self.params.lambda).ln() - self.log_j(3 - q, u);
        m.min(-self.diamond_margin(u))
    }
}
