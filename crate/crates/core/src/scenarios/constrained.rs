//! Seeking under known, measured and topological constraints.

use std::sync::Arc;

use super::{config, meta, scalar, step_for, vector, Origin, ParamSpec, Params, Scenario, ScenarioError};
use crate::es::{assemble_loop, Decision, DitherParams, FilterParams, LoopConfig, Measurement, Plant};
use crate::hybrid::{empty_set, whole_space};

fn es_err(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::InvalidOverride(e.to_string())
}

/// Shared drifting-optimum parameters.
fn drift_params() -> Vec<ParamSpec> {
    vec![
        scalar("drift_omega", 0.001, Origin::Stated, "angular rate of the drifting optimum"),
        vector("q0", &[1.5, 0.0], Origin::Derived, "initial unconstrained optimum"),
        scalar("lambda_xi", 1e4, Origin::Derived, "filter state bound"),
        scalar("t_max", 1000.0, Origin::Derived, "recommended horizon"),
    ]
}

/// Unconstrained optimum at time `t`: `q̇ = ω R₀ q`, `R₀ = [[0, 1], [−1, 0]]`.
fn drift_at(q0: &[f64], omega: f64, t: f64) -> [f64; 2] {
    let (s, c) = (omega * t).sin_cos();
    [c * q0[0] + s * q0[1], -s * q0[0] + c * q0[1]]
}

/// Decision `(û, q)` with the optimum drifting as part of `x_uz`; rates
/// are divided by the loop gain.
fn drifting(
    k: f64,
    omega: f64,
    flow_set: crate::hybrid::MarginFn,
    descent: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
) -> Decision {
    Decision {
        n: 2,
        r: 2,
        flow_set,
        flow: Arc::new(move |z, xi, out| {
            descent(z, xi, &mut out[..2]);
            out[2] = omega / k * z[3];
            out[3] = -omega / k * z[2];
        }),
        jump_set: empty_set(),
        jump: Arc::new(|z, _, out| out.copy_from_slice(z)),
        filter_jump: None,
    }
}

fn tracking_cost(s: &crate::es::Signals<'_>) -> f64 {
    (s.u[0] - s.x_uz[2]).powi(2) + (s.u[1] - s.x_uz[3]).powi(2)
}

pub(crate) mod projected_tracking {
    use super::*;
    use crate::set_valued::{tangent_cone_project_tol, ConvexSet};

    /// `|u₁| + |u₂| ≤ 1`.
    pub(crate) fn rotated_box() -> ConvexSet {
        ConvexSet::Halfspaces {
            a: vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]],
            b: vec![1.0; 4],
        }
    }

    /// Euclidean projection onto the unit 1-norm ball.
    pub(crate) fn project_l1(v: [f64; 2]) -> [f64; 2] {
        if v[0].abs() + v[1].abs() <= 1.0 {
            return v;
        }
        let (a, b) = (v[0].abs(), v[1].abs());
        // Soft threshold so that the shrunk magnitudes sum to one.
        let theta = ((a + b - 1.0) / 2.0).max(a - 1.0).max(b - 1.0);
        let (pa, pb) = ((a - theta).max(0.0), (b - theta).max(0.0));
        [pa.copysign(v[0]), pb.copysign(v[1])]
    }

    pub fn params() -> Vec<ParamSpec> {
        let mut v = vec![
            scalar("eps_a", 0.01, Origin::Stated, "dither amplitude"),
            vector("omega", &[100.0, 150.0], Origin::Stated, "dither frequencies"),
            scalar("k_f", 1.0, Origin::Stated, "filter gain"),
            scalar("k", 0.2, Origin::Stated, "loop gain"),
            scalar("band", 5e-3, Origin::Derived, "activity band of the tangent-cone projection"),
            vector("u0", &[0.0, 0.0], Origin::Derived, "initial estimate"),
        ];
        v.extend(drift_params());
        v
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let k = p.require("k", "must be positive", |v| v > 0.0)?;
        let band = p.require("band", "must be positive", |v| v > 0.0)?;
        let omega_q = p.scalar("drift_omega");
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
        let omegas = p.require_all("omega", "must be positive", |v| v > 0.0)?;
        let set = rotated_box();
        let u0 = p.vector("u0");
        if set.margin(u0) < 0.0 {
            return super::super::invalid("u0 must lie in the box");
        }
        let (s1, s2) = (set.clone(), set.clone());
        let decision = drifting(
            k,
            omega_q,
            Arc::new(move |z| s1.margin(&z[..2]) + band),
            move |z, xi, out| {
                let v = [-xi[0], -xi[1]];
                match tangent_cone_project_tol(&s2, &z[..2], &v, band) {
                    Ok(d) => out.copy_from_slice(&d),
                    Err(_) => out.fill(0.0),
                }
            },
        );
        let dither = DitherParams::from_omegas(eps_a, omegas).map_err(es_err)?;
        let mut filter = FilterParams::new(p.scalar("k_f"), 1.0);
        filter.lambda_xi = p.scalar("lambda_xi");
        let lp = assemble_loop(
            decision,
            Plant::Static(Measurement::Shared {
                channels: 1,
                eval: Arc::new(|s, y| y[0] = tracking_cost(s)),
            }),
            &dither,
            Some(filter),
            &LoopConfig {
                k,
                ..LoopConfig::default()
            },
        )
        .map_err(es_err)?;
        let q0 = p.vector("q0");
        let mut labels = lp.layout.labels();
        labels[2] = "q1".into();
        labels[3] = "q2".into();
        let h = step_for(k * dither.max_omega(), 0.05, 0.01);
        let target = project_l1(drift_at(q0, omega_q, t_max));
        Ok(Scenario {
            x0: lp.layout.initial_state(&[u0[0], u0[1], q0[0], q0[1]], &[]),
            system: lp.system,
            config: config(h, t_max, 10, ((1.0 / h) as usize).max(1), 0),
            meta: meta(labels, vec![0, 1], Some(target.to_vec())),
        })
    }
}

pub(crate) mod unknown_constraints {
    use super::*;
    use crate::set_valued::sliding_rule;

    pub fn params() -> Vec<ParamSpec> {
        let mut v = vec![
            scalar("eps_a", 0.01, Origin::Stated, "dither amplitude"),
            vector("omega", &[100.0, 250.0], Origin::Stated, "dither frequencies"),
            scalar("k_f", 1.0, Origin::Stated, "filter gain"),
            scalar("eps_f", 10.0, Origin::Derived, "filter time constant; slow enough to average out the dither ripple"),
            scalar("k", 0.1, Origin::Stated, "loop gain"),
            vector("a", &[-1.0, -2.0], Origin::Stated, "constraint normal in c(u) = a.u + b"),
            scalar("b", 2.0, Origin::Stated, "constraint offset"),
            vector("u0", &[0.0, 0.0], Origin::Derived, "initial estimate (infeasible)"),
        ];
        v.extend(drift_params());
        v
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let k = p.require("k", "must be positive", |v| v > 0.0)?;
        let omega_q = p.scalar("drift_omega");
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
        let omegas = p.require_all("omega", "must be positive", |v| v > 0.0)?;
        let a = p.vector("a").to_vec();
        let b = p.scalar("b");
        if a.iter().all(|v| *v == 0.0) {
            return super::super::invalid("constraint normal must be nonzero");
        }
        let (a1, a2) = (a.clone(), a.clone());
        let c = move |u: &[f64]| a1[0] * u[0] + a1[1] * u[1] + b;
        // The gain sits in the rule itself; filter and dither keep their rates.
        let decision = drifting(1.0, omega_q, whole_space(), move |z, xi, out| {
            out.copy_from_slice(&sliding_rule(c(&z[..2]), &xi[0..2], &xi[2..4], k));
        });
        let dither = DitherParams::from_omegas(eps_a, omegas).map_err(es_err)?;
        let mut filter = FilterParams::new(p.scalar("k_f"), p.scalar("eps_f"));
        filter.lambda_xi = p.scalar("lambda_xi");
        let lp = assemble_loop(
            decision,
            Plant::Static(Measurement::Shared {
                channels: 2,
                eval: Arc::new(move |s, y| {
                    y[0] = tracking_cost(s);
                    y[1] = a2[0] * s.u[0] + a2[1] * s.u[1] + b;
                }),
            }),
            &dither,
            Some(filter),
            &LoopConfig::default(),
        )
        .map_err(es_err)?;
        let (q0, u0) = (p.vector("q0"), p.vector("u0"));
        let mut labels = lp.layout.labels();
        labels[2] = "q1".into();
        labels[3] = "q2".into();
        let h = step_for(dither.max_omega(), 0.05, 0.01);
        // Projection of the final unconstrained optimum onto {c ≤ 0}.
        let q = drift_at(q0, omega_q, t_max);
        let cq = a[0] * q[0] + a[1] * q[1] + b;
        let scale = cq.max(0.0) / (a[0] * a[0] + a[1] * a[1]);
        let target = vec![q[0] - scale * a[0], q[1] - scale * a[1]];
        Ok(Scenario {
            x0: lp.layout.initial_state(&[u0[0], u0[1], q0[0], q0[1]], &[]),
            system: lp.system,
            config: config(h, t_max, 10, ((1.0 / h) as usize).max(1), 0),
            meta: meta(labels, vec![0, 1], Some(target)),
        })
    }
}

pub(crate) mod obstacle_avoid {
    use super::*;
    use crate::supervisors::{obstacle_partition, Barrier, ObstacleParams};

    pub fn params() -> Vec<ParamSpec> {
        vec![
            vector("p0", &[0.0, 0.0], Origin::Derived, "obstacle center"),
            scalar("rho", 0.5, Origin::Derived, "obstacle size"),
            scalar("chi", 1.5, Origin::Derived, "hysteresis ratio"),
            scalar("lambda", 0.2, Origin::Derived, "hysteresis margin"),
            scalar("delta", 0.5, Origin::Derived, "clearance around the optimum"),
            vector("u_star", &[3.0, 0.0], Origin::Derived, "peak of the field"),
            vector("u0", &[-3.0, 0.0], Origin::Derived, "initial position"),
            scalar("q0", 1.0, Origin::Derived, "initial region (1 or 2)"),
            scalar("beta", 0.1, Origin::Derived, "barrier weight"),
            scalar("eps_a", 0.1, Origin::Derived, "dither amplitude"),
            vector("omega", &[400.0, 530.0], Origin::Derived, "dither frequencies"),
            scalar("gain", 0.1, Origin::Derived, "ascent gain on the filtered gradient"),
            scalar("k_f", 1.0, Origin::Derived, "filter gain"),
            scalar("eps_f", 0.2, Origin::Derived, "filter time constant"),
            scalar("cap", 1e3, Origin::Derived, "saturation of the measured potential"),
            scalar("lambda_xi", 1e6, Origin::Derived, "filter state bound"),
            scalar("t_max", 30.0, Origin::Derived, "recommended horizon"),
        ]
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let pv = |n: &str| [p.vector(n)[0], p.vector(n)[1]];
        let params = ObstacleParams {
            p0: pv("p0"),
            rho: p.scalar("rho"),
            chi: p.scalar("chi"),
            lambda: p.scalar("lambda"),
            u_star: pv("u_star"),
            delta: p.scalar("delta"),
        };
        let u_star = params.u_star;
        let beta = p.require("beta", "must be positive", |v| v > 0.0)?;
        let part = obstacle_partition(
            params,
            Arc::new(move |u| -((u[0] - u_star[0]).powi(2) + (u[1] - u_star[1]).powi(2))),
            Barrier::Reciprocal { beta },
        )
        .map_err(es_err)?;
        let q0 = p.require("q0", "must be 1 or 2", |v| v == 1.0 || v == 2.0)?;
        let u0 = pv("u0");
        if part.region_margin(q0 as u8, &u0) <= 0.0 || part.diamond_margin(&u0) >= 0.0 {
            return super::super::invalid("u0 must lie in region q0 outside the obstacle");
        }
        let cap = p.require("cap", "must be positive", |v| v > 0.0)?;
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
        let omegas = p.require_all("omega", "must be positive", |v| v > 0.0)?;

        let gain = p.require("gain", "must be positive", |v| v > 0.0)?;
        let mode = |z: &[f64]| z[2].round() as u8;
        let (pa, pb, pc) = (part.clone(), part.clone(), part.clone());
        let decision = Decision {
            n: 2,
            r: 1,
            flow_set: Arc::new(move |z| pa.flow_margin(mode(z), &z[..2])),
            flow: Arc::new(move |_, xi, out| {
                out[0] = gain * xi[0];
                out[1] = gain * xi[1];
                out[2] = 0.0;
            }),
            jump_set: Arc::new(move |z| pb.jump_margin(mode(z), &z[..2])),
            jump: Arc::new(move |z, _, out| {
                out.copy_from_slice(z);
                out[2] = f64::from(3 - mode(z));
            }),
            filter_jump: None,
        };
        let measure = Measurement::Shared {
            channels: 1,
            eval: Arc::new(move |s, y| y[0] = -pc.j_hat(mode(s.x_uz), s.u).min(cap)),
        };
        let dither = DitherParams::from_omegas(eps_a, omegas).map_err(es_err)?;
        let mut filter = FilterParams::new(p.scalar("k_f"), p.scalar("eps_f"));
        filter.lambda_xi = p.scalar("lambda_xi");
        let lp = assemble_loop(decision, Plant::Static(measure), &dither, Some(filter), &LoopConfig::default())
            .map_err(es_err)?;
        let mut labels = lp.layout.labels();
        labels[2] = "q".into();
        let h = step_for(dither.max_omega(), 0.05, 0.01);
        Ok(Scenario {
            x0: lp.layout.initial_state(&[u0[0], u0[1], q0], &[]),
            system: lp.system,
            config: config(h, t_max, 1000, 10, 0),
            meta: meta(labels, vec![0, 1], Some(u_star.to_vec())),
        })
    }
}
