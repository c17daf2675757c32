//! Seeking through dynamic plants.

use std::sync::Arc;

use super::{config, meta, scalar, step_for, Origin, ParamSpec, Params, Scenario, ScenarioError};
use crate::es::{assemble_loop, box_margin, Decision, DitherParams, FilterParams, LoopConfig, Measurement, Plant};

fn es_err(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::InvalidOverride(e.to_string())
}

/// Scalar gradient loop around `plant`; the horizon is `units / k`.
fn scalar_loop(p: &Params, plant: Plant, theta0: &[f64], target: f64) -> Result<Scenario, ScenarioError> {
    let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
    let omega = p.require("omega", "must be positive", |v| v > 0.0)?;
    let k = p.require("k", "must be positive", |v| v > 0.0)?;
    let units = p.require("horizon_units", "must be positive", |v| v > 0.0)?;
    let gain = p.require("gain", "must be positive", |v| v > 0.0)?;
    let dither = DitherParams::from_omegas(eps_a, &[omega]).map_err(es_err)?;
    let mut decision = Decision::gradient(1);
    decision.flow = Arc::new(move |_, xi, out| out[0] = -gain * xi[0]);
    let lp = assemble_loop(
        decision,
        plant,
        &dither,
        Some(FilterParams::new(p.scalar("k_f"), p.scalar("eps_f"))),
        &LoopConfig {
            k,
            ..LoopConfig::default()
        },
    )
    .map_err(es_err)?;
    let h = step_for(k * omega, 0.05, p.scalar("h_max"));
    let t_max = units / k;
    Ok(Scenario {
        x0: lp.layout.initial_state(&[p.scalar("u0")], theta0),
        system: lp.system,
        config: config(h, t_max, 10, ((0.1 / h) as usize).max(1), 0),
        meta: meta(lp.layout.labels(), vec![0], Some(vec![target])),
    })
}

fn loop_params(eps_a: f64, omega: f64, k: f64, gain: f64, u0: f64) -> Vec<ParamSpec> {
    vec![
        scalar("eps_a", eps_a, Origin::Derived, "dither amplitude"),
        scalar("gain", gain, Origin::Derived, "descent gain on the filtered gradient"),
        scalar("omega", omega, Origin::Derived, "dither frequency"),
        scalar("k", k, Origin::Derived, "loop gain; smaller separates the loop from the plant"),
        scalar("k_f", 1.0, Origin::Derived, "filter gain"),
        scalar("eps_f", 1.0, Origin::Derived, "filter time constant"),
        scalar("u0", u0, Origin::Derived, "initial estimate"),
        scalar("horizon_units", 40.0, Origin::Derived, "horizon in units of 1/k"),
        scalar("h_max", 1e-3, Origin::Derived, "largest step; the plant may switch faster than the dither"),
    ]
}

pub(crate) mod coulomb_plant_loop {
    use super::*;

    pub fn params() -> Vec<ParamSpec> {
        let mut v = vec![
            scalar("b_fric", 1.0, Origin::Derived, "friction coefficient B"),
            scalar("k_spring", 1.0, Origin::Derived, "spring constant K"),
            scalar("mass", 1.0, Origin::Derived, "mass M"),
            scalar("theta_bound", 100.0, Origin::Derived, "plant state bound"),
            scalar("setpoint", 1.0, Origin::Derived, "velocity that minimizes the output"),
        ];
        v.extend(loop_params(0.1, 50.0, 0.2, 1.0, -1.0));
        v
    }

    /// `θ̇ = (θ₂ − u, −(B/M) sgn(θ₂ − u) − (K/M) θ₁)` with `sgn 0 = 0`.
    pub(crate) fn plant_flow(b: f64, kk: f64, m: f64) -> impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + Clone {
        move |th, u, out| {
            let slip = th[1] - u[0];
            let s = if slip > 0.0 {
                1.0
            } else if slip < 0.0 {
                -1.0
            } else {
                0.0
            };
            out[0] = slip;
            out[1] = -b / m * s - kk / m * th[0];
        }
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let b = p.require("b_fric", "must be positive", |v| v > 0.0)?;
        let kk = p.require("k_spring", "must be positive", |v| v > 0.0)?;
        let m = p.require("mass", "must be positive", |v| v > 0.0)?;
        let bound = p.scalar("theta_bound");
        if !(bound > b / kk) {
            return super::super::invalid("theta_bound must exceed B/K");
        }
        let set = p.scalar("setpoint");
        let plant = Plant::Dynamic {
            m: 2,
            flow: Arc::new(plant_flow(b, kk, m)),
            flow_set: Arc::new(move |th| box_margin(th, bound)),
            output: Measurement::Shared {
                channels: 1,
                eval: Arc::new(move |s, y| y[0] = (s.theta[1] - set).powi(2)),
            },
        };
        let u0 = p.scalar("u0");
        scalar_loop(p, plant, &[0.0, u0], set)
    }
}

pub(crate) mod switched_plant_loop {
    use super::*;
    use crate::set_valued::Selector;

    pub fn params() -> Vec<ParamSpec> {
        let mut v = vec![
            scalar("theta_bound", 100.0, Origin::Derived, "plant state bound"),
            scalar("setpoint", 2.0, Origin::Derived, "value of theta1 that minimizes the output"),
        ];
        v.extend(loop_params(0.5, 10.0, 0.1, 0.2, 0.0));
        v
    }

    /// Convex combination of the two modes, `p = α + 2(1 − α)`.
    pub(crate) fn plant_flow(th: &[f64], u: f64, alpha: f64, out: &mut [f64]) {
        let q = alpha + 2.0 * (1.0 - alpha);
        out[0] = -th[0] + (1.5 - 1.25 * q) * th[1] + u;
        out[1] = (-2.25 + 1.25 * q) * th[0] - th[1] + (2.25 - 1.25 * q) * u;
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let bound = p.require("theta_bound", "must be positive", |v| v > 0.0)?;
        let set = p.scalar("setpoint");
        let sel = Selector::SeededUniform(p.seed);
        let plant = Plant::Dynamic {
            m: 2,
            flow: Arc::new(move |th, u, out| plant_flow(th, u[0], sel.pick(0.0, 1.0, th), out)),
            flow_set: Arc::new(move |th| box_margin(th, bound)),
            output: Measurement::Shared {
                channels: 1,
                eval: Arc::new(move |s, y| y[0] = (s.theta[0] - set).powi(2)),
            },
        };
        let u0 = p.scalar("u0");
        scalar_loop(p, plant, &[u0, 0.0], set)
    }
}
