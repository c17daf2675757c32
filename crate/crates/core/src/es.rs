//! Extremum-seeking building blocks and closed-loop assembly.
//!
//! A loop couples decision dynamics acting on `x_uz = (û, z)` with a
//! derivative estimator driven by sinusoidal dithers. Assembled states are
//! laid out as `(x_uz, ξ, μ[, θ])`, or `(x_uz, τ[, θ])` when the dither is
//! generated by an unbounded timer.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use smallvec::SmallVec;
use thiserror::Error;

use crate::hybrid::{FieldFn, HybridSystem, MarginFn};

pub(crate) type Scratch = SmallVec<[f64; 32]>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("operation defined only for n = 2 (got n = {0})")]
    DimensionUnsupported(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("decision dynamics read ξ but no filter parameters were given")]
    MissingFilter,
}

/// Dither amplitude and frequencies `ωᵢ = κᵢ / ε_ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct DitherParams {
    pub n: usize,
    pub eps_a: f64,
    pub eps_omega: f64,
    pub kappa: Vec<f64>,
}

impl DitherParams {
    pub fn new(eps_a: f64, eps_omega: f64, kappa: Vec<f64>) -> Result<Self, EsError> {
        let bad = |m: &str| Err(EsError::InvalidParams(m.to_string()));
        if kappa.is_empty() {
            return bad("need at least one frequency");
        }
        if !(eps_a > 0.0 && eps_omega > 0.0) {
            return bad("eps_a and eps_omega must be positive");
        }
        if kappa.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
            return bad("frequencies must be positive");
        }
        for i in 0..kappa.len() {
            if kappa[..i].contains(&kappa[i]) {
                return bad("frequencies must be distinct");
            }
        }
        Ok(Self {
            n: kappa.len(),
            eps_a,
            eps_omega,
            kappa,
        })
    }

    /// `copies` blocks sharing the same frequencies, for agents whose
    /// estimators are demodulated separately ([`Measurement::Grouped`]).
    pub fn tiled(eps_a: f64, omegas: &[f64], copies: usize) -> Result<Self, EsError> {
        let block = Self::from_omegas(eps_a, omegas)?;
        if copies == 0 {
            return Err(EsError::InvalidParams("need at least one copy".into()));
        }
        let kappa = block.kappa.repeat(copies);
        Ok(Self {
            n: kappa.len(),
            kappa,
            ..block
        })
    }

    /// Frequencies given directly in rad/s (`ε_ω = 1`).
    pub fn from_omegas(eps_a: f64, omegas: &[f64]) -> Result<Self, EsError> {
        Self::new(eps_a, 1.0, omegas.to_vec())
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.kappa.iter().map(|k| k / self.eps_omega).collect()
    }

    pub fn max_omega(&self) -> f64 {
        self.omegas().into_iter().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub k_f: f64,
    pub eps_f: f64,
    pub lambda_xi: f64,
}

impl FilterParams {
    pub fn new(k_f: f64, eps_f: f64) -> Self {
        Self {
            k_f,
            eps_f,
            lambda_xi: 1e3,
        }
    }

    pub fn validate(&self) -> Result<(), EsError> {
        if self.k_f > 0.0 && self.eps_f > 0.0 && self.lambda_xi > 0.0 {
            Ok(())
        } else {
            Err(EsError::InvalidParams("filter parameters must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterStyle {
    /// `ξ̇ = −(k_f/ε_f)(ξ − (2/ε_a) y 𝔻μ)`, `ξ⁺ = ξ`.
    LowPass,
    /// `ξ̇ = −k_f(ξ − (2/ε_a) y 𝔻μ)` with a jump map for `ξ`.
    Hybrid,
    /// No filter; `ξ = y μ_εa(τ)` from a timer with `τ̇ = 1/ε_ω`.
    GrowingTimer,
}

/// Weight `γ(x_uz)` multiplying the filter input.
pub type GainFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct LoopConfig {
    pub k: f64,
    pub delta: f64,
    pub style: FilterStyle,
    pub filter_gain: Option<GainFn>,
}

impl fmt::Debug for LoopConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoopConfig")
            .field("k", &self.k)
            .field("delta", &self.delta)
            .field("style", &self.style)
            .field("filter_gain", &self.filter_gain.is_some())
            .finish()
    }
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            delta: 0.0,
            style: FilterStyle::LowPass,
            filter_gain: None,
        }
    }
}

/// Block-diagonal `diag(ωᵢ R₀)`, `R₀ = [[0, 1], [−1, 0]]`.
pub fn phi_matrix(dither: &DitherParams) -> DMatrix<f64> {
    let n = dither.n;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for (i, w) in dither.omegas().into_iter().enumerate() {
        m[(2 * i, 2 * i + 1)] = w;
        m[(2 * i + 1, 2 * i)] = -w;
    }
    m
}

/// `𝔻`, picking the first entry of every oscillator pair.
pub fn extraction_matrix(n: usize) -> DMatrix<f64> {
    assert!(n >= 1);
    DMatrix::from_fn(n, 2 * n, |i, j| if j == 2 * i { 1.0 } else { 0.0 })
}

pub fn oscillator_flow(mu: &[f64], dither: &DitherParams) -> Vec<f64> {
    let mut out = vec![0.0; mu.len()];
    oscillator_flow_into(&dither.omegas(), 1.0, mu, &mut out);
    out
}

pub(crate) fn oscillator_flow_into(omegas: &[f64], k: f64, mu: &[f64], out: &mut [f64]) {
    for (i, w) in omegas.iter().enumerate() {
        out[2 * i] = k * w * mu[2 * i + 1];
        out[2 * i + 1] = -k * w * mu[2 * i];
    }
}

/// `−(k_f/ε_f)(ξ − (2/ε_a) y 𝔻μ)`.
pub fn filter_flow(xi: &[f64], y: f64, mu: &[f64], filter: &FilterParams, dither: &DitherParams) -> Vec<f64> {
    let c = filter.k_f / filter.eps_f;
    xi.iter()
        .enumerate()
        .map(|(i, x)| -c * (x - 2.0 / dither.eps_a * y * mu[2 * i]))
        .collect()
}

/// `û + ε_a 𝔻μ`.
pub fn control_input(u_hat: &[f64], mu: &[f64], dither: &DitherParams) -> Vec<f64> {
    u_hat
        .iter()
        .enumerate()
        .map(|(i, u)| u + dither.eps_a * mu[2 * i])
        .collect()
}

/// Hessian-estimating matrix for two inputs, built from the cosine-phase
/// entries `μ[0]` and `μ[2]`.
pub fn newton_matrix(mu: &[f64], dither: &DitherParams) -> Result<Matrix2<f64>, EsError> {
    if dither.n != 2 || mu.len() != 4 {
        return Err(EsError::DimensionUnsupported(dither.n));
    }
    Ok(newton_matrix_raw(mu[0], mu[2], dither.eps_a))
}

pub(crate) fn newton_matrix_raw(m1: f64, m3: f64, eps_a: f64) -> Matrix2<f64> {
    let a = 16.0 / (eps_a * eps_a);
    let off = 4.0 / (eps_a * eps_a) * m1 * m3;
    Matrix2::new(a * (m1 * m1 - 0.5), off, off, a * (m3 * m3 - 0.5))
}

/// `μ_εa(τ) = (2/ε_a) sin(2π κᵢ τ)`.
pub fn growing_timer_dither(tau: f64, dither: &DitherParams) -> Vec<f64> {
    dither
        .kappa
        .iter()
        .map(|k| 2.0 / dither.eps_a * (2.0 * PI * k * tau).sin())
        .collect()
}

/// `−max |μᵢ|² − 1|` over oscillator pairs.
pub fn sphere_margin(mu: &[f64]) -> f64 {
    -mu.chunks_exact(2)
        .map(|p| (p[0] * p[0] + p[1] * p[1] - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Membership margin of the oscillator state: drift up to `1e-6` is
/// accepted. Rounding noise of order `1e-9` would otherwise make the
/// margins of `C` and `D` chatter around zero and trip event location.
pub fn oscillator_margin(mu: &[f64]) -> f64 {
    1e-6 + sphere_margin(mu)
}

/// Renormalizes oscillator pairs at `range` whose norm drifted by more
/// than `1e-9`.
pub fn renormalize_pairs(x: &mut [f64], range: std::ops::Range<usize>) {
    for p in x[range].chunks_exact_mut(2) {
        let r2 = p[0] * p[0] + p[1] * p[1];
        if (r2 - 1.0).abs() > 1e-9 && r2 > 0.0 {
            let r = r2.sqrt();
            p[0] /= r;
            p[1] /= r;
        }
    }
}

/// `λ − max |ξᵢ|`.
pub fn box_margin(v: &[f64], lambda: f64) -> f64 {
    lambda - v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Decision flow `F̂(x_uz, ξ)` writing into a slice of length `n + r`.
pub type DecisionFlow = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// Decision jump `Ĝ(x_uz, ξ)`, or `G_ξ(x_uz, ξ)` for hybrid filters.
pub type DecisionJump = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Hybrid decision-making fragment `{C_uz, F̂, D_uz, Ĝ}`.
#[derive(Clone)]
pub struct Decision {
    pub n: usize,
    pub r: usize,
    pub flow_set: MarginFn,
    pub flow: DecisionFlow,
    pub jump_set: MarginFn,
    pub jump: DecisionJump,
    /// Jump map for `ξ` (hybrid filters only); `None` holds `ξ`.
    pub filter_jump: Option<DecisionJump>,
}

impl Decision {
    /// `dû/dt = −ξ` on the whole space, no jumps.
    pub fn gradient(n: usize) -> Self {
        Self {
            n,
            r: 0,
            flow_set: crate::hybrid::whole_space(),
            flow: Arc::new(|_, xi, out| {
                for (o, x) in out.iter_mut().zip(xi) {
                    *o = -x;
                }
            }),
            jump_set: crate::hybrid::empty_set(),
            jump: Arc::new(|x, _, out| out.copy_from_slice(x)),
            filter_jump: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.n + self.r
    }
}

/// Inputs available to an output map.
pub struct Signals<'a> {
    pub u: &'a [f64],
    pub x_uz: &'a [f64],
    pub theta: &'a [f64],
}

pub type OutputFn = Arc<dyn Fn(&Signals<'_>, &mut [f64]) + Send + Sync>;

/// How measured outputs drive the estimator.
#[derive(Clone)]
pub enum Measurement {
    /// `channels` outputs, each estimating a full `n`-gradient; `ξ` has
    /// `channels · n` entries.
    Shared { channels: usize, eval: OutputFn },
    /// One output per input coordinate (players of a game); output `i` is
    /// demodulated by dither `i` only.
    PerCoordinate { eval: OutputFn },
    /// One output per block of consecutive inputs; output `g` is
    /// demodulated by the dithers of block `g`.
    Grouped { sizes: Vec<usize>, eval: OutputFn },
}

impl Measurement {
    /// Single output `y = J(u)`.
    pub fn cost<F>(j: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Measurement::Shared {
            channels: 1,
            eval: Arc::new(move |s, y| y[0] = j(s.u)),
        }
    }

    pub fn outputs(&self, n: usize) -> usize {
        match self {
            Measurement::Shared { channels, .. } => *channels,
            Measurement::PerCoordinate { .. } => n,
            Measurement::Grouped { sizes, .. } => sizes.len(),
        }
    }

    fn eval(&self) -> &OutputFn {
        match self {
            Measurement::Shared { eval, .. }
            | Measurement::PerCoordinate { eval }
            | Measurement::Grouped { eval, .. } => eval,
        }
    }

    fn xi_dim(&self, n: usize) -> usize {
        match self {
            Measurement::Shared { channels, .. } => channels * n,
            _ => n,
        }
    }

    /// Output index demodulated by each input coordinate, or `None` when
    /// every output is demodulated by every dither.
    fn owners(&self, n: usize) -> Result<Option<Vec<usize>>, EsError> {
        match self {
            Measurement::Shared { .. } => Ok(None),
            Measurement::PerCoordinate { .. } => Ok(Some((0..n).collect())),
            Measurement::Grouped { sizes, .. } => {
                if sizes.iter().sum::<usize>() != n || sizes.contains(&0) {
                    return Err(EsError::DimensionMismatch(format!(
                        "group sizes {sizes:?} do not partition {n} inputs"
                    )));
                }
                Ok(Some(
                    sizes.iter().enumerate().flat_map(|(g, &s)| std::iter::repeat_n(g, s)).collect(),
                ))
            }
        }
    }
}

/// Plant between the control input and the measurement.
#[derive(Clone)]
pub enum Plant {
    Static(Measurement),
    Dynamic {
        m: usize,
        /// `θ̇ = P(θ, u)`.
        flow: FieldFnU,
        /// Margin of `Λ_θ`.
        flow_set: MarginFn,
        output: Measurement,
    },
}

/// `P(θ, u)` writing into a slice of length `m`.
pub type FieldFnU = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

impl Plant {
    fn measurement(&self) -> &Measurement {
        match self {
            Plant::Static(m) => m,
            Plant::Dynamic { output, .. } => output,
        }
    }

    fn theta_dim(&self) -> usize {
        match self {
            Plant::Static(_) => 0,
            Plant::Dynamic { m, .. } => *m,
        }
    }
}

/// Offsets of the assembled state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub x_uz: std::ops::Range<usize>,
    pub xi: std::ops::Range<usize>,
    pub mu: std::ops::Range<usize>,
    pub tau: Option<usize>,
    pub theta: std::ops::Range<usize>,
    pub dim: usize,
}

impl Layout {
    /// Component names in state order.
    pub fn labels(&self) -> Vec<String> {
        let mut out = vec![String::new(); self.dim];
        for (k, i) in self.x_uz.clone().enumerate() {
            out[i] = if k < self.n {
                format!("u_hat{k}")
            } else {
                format!("z{}", k - self.n)
            };
        }
        for (k, i) in self.xi.clone().enumerate() {
            out[i] = format!("xi{k}");
        }
        for (k, i) in self.mu.clone().enumerate() {
            out[i] = format!("mu{k}");
        }
        if let Some(t) = self.tau {
            out[t] = "tau".into();
        }
        for (k, i) in self.theta.clone().enumerate() {
            out[i] = format!("theta{k}");
        }
        out
    }

    /// Initial state with the given decision state, zero filter, dithers at
    /// phase zero (`μᵢ = (1, 0)` or `τ = 0`) and plant state `theta`.
    pub fn initial_state(&self, x_uz: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        x[self.x_uz.clone()].copy_from_slice(x_uz);
        for i in self.mu.clone().step_by(2) {
            x[i] = 1.0;
        }
        x[self.theta.clone()].copy_from_slice(theta);
        x
    }
}

pub struct Assembled {
    pub system: HybridSystem,
    pub layout: Layout,
}

/// Interconnects decision dynamics, plant, dither and estimator.
pub fn assemble_loop(
    decision: Decision,
    plant: Plant,
    dither: &DitherParams,
    filter: Option<FilterParams>,
    cfg: &LoopConfig,
) -> Result<Assembled, EsError> {
    let n = decision.n;
    if dither.n != n {
        return Err(EsError::DimensionMismatch(format!(
            "decision has {n} inputs, dither has {}",
            dither.n
        )));
    }
    if !(cfg.k > 0.0) {
        return Err(EsError::InvalidParams("loop gain k must be positive".into()));
    }
    let nz = decision.dim();
    let m = plant.theta_dim();
    let meas = plant.measurement().clone();
    let outputs = meas.outputs(n);
    let omegas = dither.omegas();
    let eps_a = dither.eps_a;
    let k = cfg.k;
    let gamma = cfg.filter_gain.clone();
    let (plant_flow, plant_set) = match &plant {
        Plant::Static(_) => (None, None),
        Plant::Dynamic { flow, flow_set, .. } => (Some(flow.clone()), Some(flow_set.clone())),
    };

    if cfg.style == FilterStyle::GrowingTimer {
        let layout = Layout {
            n,
            x_uz: 0..nz,
            xi: nz..nz,
            mu: nz..nz,
            tau: Some(nz),
            theta: nz + 1..nz + 1 + m,
            dim: nz + 1 + m,
        };
        let kappa = dither.kappa.clone();
        let tau_rate = 1.0 / dither.eps_omega;
        let eval = meas.eval().clone();
        let owners = meas.owners(n)?;
        if outputs != 1 && owners.is_none() {
            return Err(EsError::InvalidParams("timer-driven loops take a single output".into()));
        }
        let (dflow, lay) = (decision.flow.clone(), layout.clone());
        let flow: FieldFn = Arc::new(move |x, dx| {
            let tau = x[lay.tau.unwrap()];
            let mut u = Scratch::with_capacity(n);
            let mut dith = Scratch::with_capacity(n);
            for i in 0..n {
                let s = 2.0 / eps_a * (2.0 * PI * kappa[i] * tau).sin();
                dith.push(s);
                u.push(x[i] + 0.5 * eps_a * eps_a * s);
            }
            let theta = &x[lay.theta.clone()];
            let mut y = Scratch::from_elem(0.0, outputs);
            eval(&Signals { u: &u, x_uz: &x[..nz], theta }, &mut y);
            let g = gamma.as_ref().map_or(1.0, |g| g(&x[..nz]));
            let xi: Scratch = (0..n)
                .map(|i| g * dith[i] * owners.as_ref().map_or(y[0], |o| y[o[i]]))
                .collect();
            dflow(&x[..nz], &xi, &mut dx[..nz]);
            dx[..nz].iter_mut().for_each(|d| *d *= k);
            dx[nz] = k * tau_rate;
            if let Some(p) = &plant_flow {
                p(theta, &u, &mut dx[lay.theta.clone()]);
            }
        });
        let (cset, lay) = (decision.flow_set.clone(), layout.clone());
        let pset = plant_set.clone();
        let flow_set: MarginFn = Arc::new(move |x| {
            let mut c = cset(&x[..nz]).min(x[nz]);
            if let Some(p) = &pset {
                c = c.min(p(&x[lay.theta.clone()]));
            }
            c
        });
        let (dset, lay) = (decision.jump_set.clone(), layout.clone());
        let jump_set: MarginFn = Arc::new(move |x| {
            let mut d = dset(&x[..nz]).min(x[nz]);
            if let Some(p) = &plant_set {
                d = d.min(p(&x[lay.theta.clone()]));
            }
            d
        });
        let djump = decision.jump.clone();
        let jump: FieldFn = Arc::new(move |x, out| {
            out.copy_from_slice(x);
            djump(&x[..nz], &[], &mut out[..nz]);
        });
        return Ok(Assembled {
            system: HybridSystem::new(layout.dim, flow_set, flow, jump_set, jump),
            layout,
        });
    }

    let filter = filter.ok_or(EsError::MissingFilter)?;
    filter.validate()?;
    let nxi = meas.xi_dim(n);
    let layout = Layout {
        n,
        x_uz: 0..nz,
        xi: nz..nz + nxi,
        mu: nz + nxi..nz + nxi + 2 * n,
        tau: None,
        theta: nz + nxi + 2 * n..nz + nxi + 2 * n + m,
        dim: nz + nxi + 2 * n + m,
    };
    let rate = match cfg.style {
        FilterStyle::LowPass => filter.k_f / filter.eps_f,
        _ => filter.k_f,
    };
    let lambda_xi = filter.lambda_xi;
    let eval = meas.eval().clone();
    let owners = meas.owners(n)?;
    let (dflow, lay) = (decision.flow.clone(), layout.clone());
    let flow: FieldFn = Arc::new(move |x, dx| {
        let (xuz, xi, mu) = (&x[..nz], &x[lay.xi.clone()], &x[lay.mu.clone()]);
        let theta = &x[lay.theta.clone()];
        let u: Scratch = (0..n).map(|i| xuz[i] + eps_a * mu[2 * i]).collect();
        let mut y = Scratch::from_elem(0.0, outputs);
        eval(&Signals { u: &u, x_uz: xuz, theta }, &mut y);
        let g = gamma.as_ref().map_or(1.0, |g| g(xuz));
        dflow(xuz, xi, &mut dx[..nz]);
        dx[..nz].iter_mut().for_each(|d| *d *= k);
        let base = lay.xi.start;
        if let Some(o) = &owners {
            for i in 0..n {
                dx[base + i] = -k * rate * (xi[i] - g * 2.0 / eps_a * y[o[i]] * mu[2 * i]);
            }
        } else {
            for c in 0..outputs {
                for i in 0..n {
                    let idx = c * n + i;
                    dx[base + idx] = -k * rate * (xi[idx] - g * 2.0 / eps_a * y[c] * mu[2 * i]);
                }
            }
        }
        oscillator_flow_into(&omegas, k, mu, &mut dx[lay.mu.clone()]);
        if let Some(p) = &plant_flow {
            p(theta, &u, &mut dx[lay.theta.clone()]);
        }
    });
    let (cset, lay) = (decision.flow_set.clone(), layout.clone());
    let pset = plant_set.clone();
    let flow_set: MarginFn = Arc::new(move |x| {
        let mut c = cset(&x[..nz])
            .min(box_margin(&x[lay.xi.clone()], lambda_xi))
            .min(oscillator_margin(&x[lay.mu.clone()]));
        if let Some(p) = &pset {
            c = c.min(p(&x[lay.theta.clone()]));
        }
        c
    });
    let (dset, lay) = (decision.jump_set.clone(), layout.clone());
    let jump_set: MarginFn = Arc::new(move |x| {
        let mut d = dset(&x[..nz])
            .min(box_margin(&x[lay.xi.clone()], lambda_xi))
            .min(oscillator_margin(&x[lay.mu.clone()]));
        if let Some(p) = &plant_set {
            d = d.min(p(&x[lay.theta.clone()]));
        }
        d
    });
    let djump = decision.jump.clone();
    let fjump = if cfg.style == FilterStyle::Hybrid {
        decision.filter_jump.clone()
    } else {
        None
    };
    let lay = layout.clone();
    let jump: FieldFn = Arc::new(move |x, out| {
        out.copy_from_slice(x);
        let xi = &x[lay.xi.clone()];
        djump(&x[..nz], xi, &mut out[..nz]);
        if let Some(g) = &fjump {
            g(&x[..nz], xi, &mut out[lay.xi.clone()]);
        }
    });
    let mu_range = layout.mu.clone();
    let system = HybridSystem::new(layout.dim, flow_set, flow, jump_set, jump)
        .with_guard(Arc::new(move |x| renormalize_pairs(x, mu_range.clone())));
    Ok(Assembled { system, layout })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_blocks() {
        let d = DitherParams::from_omegas(0.1, &[2.0]).unwrap();
        assert_eq!(phi_matrix(&d), DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]));
        let d = DitherParams::from_omegas(0.1, &[1.0, 3.0]).unwrap();
        let p = phi_matrix(&d);
        assert_eq!(p[(0, 1)], 1.0);
        assert_eq!(p[(3, 2)], -3.0);
        assert_eq!(p[(0, 3)], 0.0);
    }

    #[test]
    fn extraction() {
        assert_eq!(extraction_matrix(1), DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        let d = extraction_matrix(2);
        assert_eq!(d, DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        assert_eq!(&d * d.transpose(), DMatrix::identity(2, 2));
    }

    #[test]
    fn rejects_repeated_frequencies() {
        assert!(DitherParams::new(0.1, 1.0, vec![1.0, 1.0]).is_err());
        assert!(DitherParams::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(DitherParams::new(0.1, 1.0, vec![0.0]).is_err());
    }

    #[test]
    fn formulas() {
        let d = DitherParams::from_omegas(0.01, &[1.0]).unwrap();
        assert_eq!(oscillator_flow(&[1.0, 0.0], &d), vec![0.0, -1.0]);
        let f = FilterParams::new(1.0, 0.1);
        let v = filter_flow(&[0.0], 1.0, &[0.6, 0.8], &f, &d);
        assert!((v[0] - 1200.0).abs() < 1e-9);
        let xi_eq = [2.0 / 0.01 * 3.0 * 0.6];
        assert!(filter_flow(&xi_eq, 3.0, &[0.6, 0.8], &f, &d)[0].abs() < 1e-9);
        let d = DitherParams::from_omegas(0.1, &[1.0]).unwrap();
        assert!((control_input(&[2.0], &[1.0, 0.0], &d)[0] - 2.1).abs() < 1e-15);
        assert_eq!(control_input(&[2.0], &[0.0, 1.0], &d), vec![2.0]);
    }

    #[test]
    fn newton_entries() {
        let d = DitherParams::from_omegas(1.0, &[1.0, 2.0]).unwrap();
        let m = newton_matrix(&[1.0, 0.0, 0.0, 1.0], &d).unwrap();
        assert_eq!(m, Matrix2::new(8.0, 0.0, 0.0, -8.0));
        let m = newton_matrix(&[0.0, 1.0, 0.0, 1.0], &d).unwrap();
        assert_eq!(m, Matrix2::new(-8.0, 0.0, 0.0, -8.0));
        let m = newton_matrix(&[0.6, 0.8, -0.3, 0.2], &d).unwrap();
        assert_eq!(m[(0, 1)], m[(1, 0)]);
        let d1 = DitherParams::from_omegas(1.0, &[1.0]).unwrap();
        assert_eq!(newton_matrix(&[1.0, 0.0], &d1), Err(EsError::DimensionUnsupported(1)));
    }

    #[test]
    fn timer_dither() {
        let d = DitherParams::new(2.0, 1.0, vec![1.0, 3.0]).unwrap();
        assert_eq!(growing_timer_dither(0.0, &d), vec![0.0, 0.0]);
        assert!((growing_timer_dither(0.25, &d)[0] - 1.0).abs() < 1e-15);
        let (a, b) = (growing_timer_dither(0.1, &d), growing_timer_dither(0.1 + 1.0 / 3.0, &d));
        assert!((a[1] - b[1]).abs() < 1e-12);
    }
}
