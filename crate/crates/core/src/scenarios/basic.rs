//! Timers, bouncing balls, intermittent sources and the timer-driven loop.

use std::sync::Arc;

use super::{config, meta, scalar, step_for, vector, Origin, Params, Scenario, ScenarioError};
use crate::es::{assemble_loop, renormalize_pairs, Decision, DitherParams, FilterStyle, LoopConfig, Measurement, Plant};
use crate::hybrid::{whole_space, HybridArc, HybridSystem};

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub(crate) mod periodic_reset {
    use super::*;

    pub fn params() -> Vec<super::super::ParamSpec> {
        vec![
            scalar("period", 10.0, Origin::Stated, "reset period T"),
            scalar("gamma", 0.1, Origin::Stated, "decay rate of x2"),
            vector("x0", &[0.0, 10.0], Origin::Derived, "initial (timer, x2)"),
        ]
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let period = p.require("period", "must be positive", |v| v > 0.0)?;
        let gamma = p.scalar("gamma");
        let x0 = p.vector("x0").to_vec();
        if !(0.0..=period).contains(&x0[0]) {
            return super::super::invalid(format!("timer start {} outside [0, {period}]", x0[0]));
        }
        let system = HybridSystem::new(
            2,
            Arc::new(move |x| x[0].min(period - x[0])),
            Arc::new(move |x, dx| {
                dx[0] = 1.0;
                dx[1] = -gamma * x[1];
            }),
            Arc::new(move |x| -(x[0] - period).abs()),
            Arc::new(|x, out| {
                out[0] = 0.0;
                out[1] = 0.5 * x[1];
            }),
        );
        Ok(Scenario {
            system,
            x0,
            config: config(0.01, 3.0 * period, 1000, 1, 0),
            meta: meta(strings(&["x1", "x2"]), vec![], None),
        })
    }
}

/// Ball with gravity `g(x)`; the state may carry extra trailing entries.
fn ball(dim: usize, lambda: f64, gravity: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, omega: f64) -> HybridSystem {
    HybridSystem::new(
        dim,
        Arc::new(|x| x[0]),
        Arc::new(move |x, dx| {
            dx[0] = x[1];
            dx[1] = -gravity(x);
            if dx.len() > 2 {
                dx[2] = omega;
            }
        }),
        Arc::new(|x| (-x[0]).min(-x[1])),
        Arc::new(move |x, out| {
            out.copy_from_slice(x);
            out[0] = 0.0;
            out[1] = -lambda * x[1];
        }),
    )
}

fn ball_params(with_omega: bool) -> Vec<super::ParamSpec> {
    let mut v = vec![
        scalar("gamma_bar", 10.0, Origin::Stated, "nominal gravity"),
        scalar("lambda", 0.8, Origin::Derived, "restitution coefficient"),
        vector("x0", &[10.0, 0.0], Origin::Derived, "initial (height, velocity)"),
        scalar("t_max", 20.0, Origin::Derived, "recommended horizon"),
    ];
    if with_omega {
        v.insert(1, scalar("omega", 100.0, Origin::Stated, "gravity oscillation frequency"));
    }
    v
}

fn ball_common(p: &Params) -> Result<(f64, f64, Vec<f64>, f64), ScenarioError> {
    let g = p.require("gamma_bar", "must be positive", |v| v > 0.0)?;
    let lambda = p.require("lambda", "must lie in (0, 1)", |v| v > 0.0 && v < 1.0)?;
    let x0 = p.vector("x0").to_vec();
    if x0[0] < 0.0 {
        return super::invalid("initial height must be non-negative");
    }
    let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
    Ok((g, lambda, x0, t_max))
}

pub(crate) mod bouncing_seeker {
    use super::*;

    pub fn params() -> Vec<super::super::ParamSpec> {
        ball_params(true)
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let (g, lambda, x0, t_max) = ball_common(p)?;
        let omega = p.require("omega", "must be positive", |v| v > 0.0)?;
        let system = ball(3, lambda, Arc::new(move |x| 2.0 * g * x[2].sin().powi(2)), omega);
        let mut m = meta(strings(&["x1", "x2", "tau"]), vec![], None);
        m.counterpart = Some(vec![0, 1]);
        Ok(Scenario {
            system,
            x0: vec![x0[0], x0[1], 0.0],
            config: config(step_for(omega, 0.05, 0.01), t_max, 200, 1, 0),
            meta: m,
        })
    }

    /// The constant-gravity ball over the same horizon and step.
    pub fn reference(p: &Params) -> Result<HybridArc, ScenarioError> {
        let sc = build(p)?;
        let avg = super::bouncing_average::build(p)?;
        super::super::reference_run(&avg.system, &avg.x0, &sc.config, &[0, 1])
    }
}

pub(crate) mod bouncing_average {
    use super::*;

    pub fn params() -> Vec<super::super::ParamSpec> {
        ball_params(false)
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let (g, lambda, x0, t_max) = ball_common(p)?;
        let mut m = meta(strings(&["x1", "x2"]), vec![], None);
        m.counterpart = Some(vec![0, 1]);
        Ok(Scenario {
            system: ball(2, lambda, Arc::new(move |_| g), 0.0),
            x0,
            config: config(0.01, t_max, 200, 1, 0),
            meta: m,
        })
    }

    pub fn reference(p: &Params) -> Result<HybridArc, ScenarioError> {
        let sc = build(p)?;
        super::super::reference_run(&sc.system, &sc.x0, &sc.config, &[0, 1])
    }
}

pub(crate) mod source_surveillance {
    use super::*;
    use crate::set_valued::Selector;
    use crate::supervisors::{dwell_time_automaton, DwellParams};

    pub fn params() -> Vec<super::super::ParamSpec> {
        vec![
            scalar("eps_a", 0.01, Origin::Stated, "dither amplitude"),
            scalar("omega", 1000.0, Origin::Stated, "dither frequency"),
            scalar("eta_d", 0.01, Origin::Stated, "maximal timer rate"),
            scalar("n0", 1.0, Origin::Stated, "timer ceiling N0"),
            scalar("rate_fraction", 1.0, Origin::Trivial, "selected timer rate as a fraction of eta_d"),
            scalar("curvature", 0.1, Origin::Derived, "fields are -c |x - source|^2"),
            vector("source0", &[1.0, 0.0], Origin::Derived, "peak of the first field"),
            vector("source1", &[-1.0, 0.0], Origin::Derived, "peak of the second field"),
            vector("x0", &[0.5, 1.0], Origin::Derived, "initial vehicle position"),
            scalar("t_max", 300.0, Origin::Derived, "recommended horizon"),
        ]
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let omega = p.require("omega", "must be positive", |v| v > 0.0)?;
        let eta_d = p.scalar("eta_d");
        let frac = p.require("rate_fraction", "must lie in [0, 1]", |v| (0.0..=1.0).contains(&v))?;
        let timer = dwell_time_automaton(
            DwellParams {
                n0: p.scalar("n0"),
                eta1: eta_d,
            },
            Selector::Constant(frac * eta_d),
        )
        .map_err(|e| ScenarioError::InvalidOverride(e.to_string()))?;
        let sources = [p.vector("source0").to_vec(), p.vector("source1").to_vec()];
        let curv = p.require("curvature", "must be positive", |v| v > 0.0)?;
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;

        // State (x1, x2, μ1, μ2, q, τ).
        let (t1, t2, t3) = (timer.clone(), timer.clone(), timer.clone());
        let n0 = timer.params.n0;
        let system = HybridSystem::new(
            6,
            Arc::new(move |x| t1.flow_margin(x[5])),
            Arc::new(move |x, dx| {
                let s = &sources[x[4].round() as usize];
                let field = -curv * ((x[0] - s[0]).powi(2) + (x[1] - s[1]).powi(2));
                let (m1, m2) = (x[2], x[3]);
                dx[0] = eps_a * omega * m2 + 2.0 / eps_a * field * m1;
                dx[1] = -eps_a * omega * m1 + 2.0 / eps_a * field * m2;
                dx[2] = omega * m2;
                dx[3] = -omega * m1;
                dx[4] = 0.0;
                dx[5] = if x[5] >= n0 { 0.0 } else { t2.rate(x) };
            }),
            Arc::new(move |x| t3.jump_margin(x[5])),
            Arc::new(move |x, out| {
                out.copy_from_slice(x);
                out[4] = 1.0 - x[4].round();
                out[5] = timer.jump(x[5]);
            }),
        )
        .with_guard(Arc::new(move |x| {
            renormalize_pairs(x, 2..4);
            x[5] = x[5].min(n0);
        }));
        let x0 = p.vector("x0");
        Ok(Scenario {
            system,
            x0: vec![x0[0], x0[1], 1.0, 0.0, 0.0, 0.0],
            config: config(step_for(omega, 0.1, 0.01), t_max, 10_000, 100, 0),
            meta: meta(strings(&["x1", "x2", "mu1", "mu2", "q", "tau"]), vec![0, 1], None),
        })
    }
}

pub(crate) mod growing_timer_es {
    use super::*;
    use std::f64::consts::PI;

    pub fn params() -> Vec<super::super::ParamSpec> {
        vec![
            scalar("eps_a", 0.2, Origin::Derived, "dither amplitude"),
            scalar("omega", 4000.0, Origin::Derived, "dither frequency (rad/s)"),
            scalar("curvature", 1.0, Origin::Derived, "a in J(u) = a (u - u*)^2"),
            scalar("u_star", 0.0, Origin::Derived, "minimizer of J"),
            scalar("u0", 2.0, Origin::Derived, "initial estimate"),
            scalar("t_max", 3.0, Origin::Derived, "recommended horizon"),
        ]
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let omega = p.require("omega", "must be positive", |v| v > 0.0)?;
        let a = p.require("curvature", "must be positive", |v| v > 0.0)?;
        let u_star = p.scalar("u_star");
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
        let dither = DitherParams::new(eps_a, 2.0 * PI / omega, vec![1.0])
            .map_err(|e| ScenarioError::InvalidOverride(e.to_string()))?;
        let lp = assemble_loop(
            Decision::gradient(1),
            Plant::Static(Measurement::cost(move |u| a * (u[0] - u_star).powi(2))),
            &dither,
            None,
            &LoopConfig {
                style: FilterStyle::GrowingTimer,
                ..LoopConfig::default()
            },
        )
        .map_err(|e| ScenarioError::InvalidOverride(e.to_string()))?;
        let x0 = lp.layout.initial_state(&[p.scalar("u0")], &[]);
        let mut m = meta(lp.layout.labels(), vec![0], Some(vec![u_star]));
        m.counterpart = Some(vec![0]);
        Ok(Scenario {
            system: lp.system,
            x0,
            config: config(step_for(omega, 0.1, 0.01), t_max, 10, 10, 0),
            meta: m,
        })
    }

    /// Gradient flow `û̇ = −2a(û − u*)`.
    pub fn reference(p: &Params) -> Result<HybridArc, ScenarioError> {
        let sc = build(p)?;
        let (a, u_star) = (p.scalar("curvature"), p.scalar("u_star"));
        let flow = HybridSystem::continuous(
            1,
            whole_space(),
            Arc::new(move |x, dx| dx[0] = -2.0 * a * (x[0] - u_star)),
        );
        let cfg = config(1e-3, sc.config.t_max, 0, 1, 0);
        super::super::reference_run(&flow, &[p.scalar("u0")], &cfg, &[0])
    }
}
