//! Loops that switch modes: adversarial sign flips, momentum restarts and
//! Newton/gradient uniting.

use std::sync::Arc;

use super::{config, meta, scalar, step_for, vector, Origin, ParamSpec, Params, Scenario, ScenarioError};
use crate::es::{assemble_loop, box_margin, renormalize_pairs, oscillator_margin, Decision, DitherParams, FilterParams, LoopConfig, Measurement, Plant};
use crate::hybrid::{empty_set, HybridArc, HybridSystem};

fn es_err(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::InvalidOverride(e.to_string())
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub(crate) mod attack_gradient {
    use super::*;
    use crate::set_valued::Selector;
    use crate::supervisors::{activation_monitor, ActivationParams};

    const Q: [[f64; 2]; 2] = [[1.0, 0.5], [0.5, 1.5]];
    const B: [f64; 2] = [0.1, 0.1];

    fn cost(u: &[f64]) -> f64 {
        let qu = [Q[0][0] * u[0] + Q[0][1] * u[1], Q[1][0] * u[0] + Q[1][1] * u[1]];
        0.01 * (u[0] * qu[0] + u[1] * qu[1]) + B[0] * u[0] + B[1] * u[1]
    }

    pub fn params() -> Vec<ParamSpec> {
        vec![
            vector("omega", &[810.0, 420.0], Origin::Stated, "dither frequencies"),
            scalar("eps_a", 0.1, Origin::Stated, "dither amplitude"),
            scalar("eps_f", 1.0, Origin::Stated, "filter time constant"),
            scalar("k_f", 1.0, Origin::Derived, "filter gain"),
            scalar("gain", 100.0, Origin::Derived, "descent gain on the estimate"),
            scalar("t0", 1.0, Origin::Derived, "activation budget T0"),
            scalar("eta2", 0.05, Origin::Derived, "activation ratio of the corrupted mode"),
            vector("u0", &[-3.0, -1.0], Origin::Derived, "initial estimate"),
            scalar("lambda_xi", 1e6, Origin::Derived, "filter state bound"),
            scalar("t_max", 60.0, Origin::Derived, "recommended horizon"),
        ]
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let gain = p.require("gain", "must be positive", |v| v > 0.0)?;
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
        let omegas = p.require_all("omega", "must be positive", |v| v > 0.0)?;
        let monitor = activation_monitor(
            ActivationParams {
                t0: p.scalar("t0"),
                eta2: p.scalar("eta2"),
                unstable_modes: vec![-1],
            },
            Selector::MaxRate,
        )
        .map_err(es_err)?;
        let t0 = monitor.params.t0;

        // x_uz = (û₁, û₂, q, τ₂); the adversary corrupts the output as soon
        // and for as long as the monitor allows.
        let (m1, m2, m3) = (monitor.clone(), monitor.clone(), monitor.clone());
        let decision = Decision {
            n: 2,
            r: 2,
            flow_set: Arc::new(move |z| m1.flow_margin(z[3])),
            flow: Arc::new(move |z, xi, out| {
                out[0] = -gain * xi[0];
                out[1] = -gain * xi[1];
                out[2] = 0.0;
                out[3] = m2.rate(z[3], z[2], z);
            }),
            jump_set: Arc::new(move |z| if z[2] > 0.0 { z[3] - t0 } else { -z[3] }),
            jump: Arc::new(|z, _, out| {
                out.copy_from_slice(z);
                out[2] = -z[2];
            }),
            filter_jump: None,
        };
        let measure = Measurement::Shared {
            channels: 1,
            eval: Arc::new(|s, y| y[0] = s.x_uz[2] * cost(s.u)),
        };
        let dither = DitherParams::from_omegas(eps_a, omegas).map_err(es_err)?;
        let mut filter = FilterParams::new(p.scalar("k_f"), p.scalar("eps_f"));
        filter.lambda_xi = p.scalar("lambda_xi");
        let lp = assemble_loop(decision, Plant::Static(measure), &dither, Some(filter), &LoopConfig::default())
            .map_err(es_err)?;
        let sys = super::super::add_guard(lp.system, Arc::new(move |x| x[3] = m3.clamp(x[3]).max(0.0)));
        let u0 = p.vector("u0");
        let mut labels = lp.layout.labels();
        labels[2] = "q".into();
        labels[3] = "tau2".into();
        let h = step_for(dither.max_omega(), 0.1, 0.01);
        Ok(Scenario {
            x0: lp.layout.initial_state(&[u0[0], u0[1], -1.0, t0], &[]),
            system: sys,
            config: config(h, t_max, 10_000, 20, 0),
            meta: meta(labels, vec![0, 1], Some(vec![-4.0, -2.0])),
        })
    }
}

pub(crate) mod momentum_reset {
    use super::*;

    fn grad(u: &[f64]) -> [f64; 2] {
        [0.2 * (u[0] - 1.0), 0.1 * (u[1] - 1.0)]
    }

    fn cost(u: &[f64]) -> f64 {
        0.1 * (u[0] - 1.0).powi(2) + 0.05 * (u[1] - 1.0).powi(2)
    }

    pub fn params() -> Vec<ParamSpec> {
        vec![
            scalar("rho", 0.5, Origin::Stated, "timer rate"),
            scalar("alpha", 1.0, Origin::Stated, "fraction of momentum removed at resets"),
            scalar("t0", 1.0, Origin::Derived, "timer value after a reset"),
            scalar("t_reset", 5.0, Origin::Derived, "timer value that triggers a reset"),
            scalar("k2", 1.0, Origin::Derived, "gradient weight"),
            scalar("eps_a", 0.1, Origin::Derived, "dither amplitude"),
            vector("omega", &[50.0, 70.0], Origin::Derived, "dither frequencies"),
            scalar("k", 1.0, Origin::Derived, "gain of the plain gradient loop"),
            scalar("use_momentum", 1.0, Origin::Trivial, "0 runs the plain gradient loop instead"),
            vector("u0", &[0.0, 2.0], Origin::Derived, "initial estimate"),
            scalar("t_max", 40.0, Origin::Derived, "recommended horizon"),
        ]
    }

    struct Data {
        rho: f64,
        alpha: f64,
        t0: f64,
        t_reset: f64,
        c2: f64,
        k: f64,
        momentum: bool,
    }

    fn data(p: &Params) -> Result<Data, ScenarioError> {
        let rho = p.require("rho", "must be positive", |v| v > 0.0)?;
        let t0 = p.require("t0", "must be positive", |v| v > 0.0)?;
        let t_reset = p.scalar("t_reset");
        if !(t_reset > t0) {
            return super::super::invalid("t_reset must exceed t0");
        }
        Ok(Data {
            rho,
            alpha: p.require("alpha", "must lie in [0, 1]", |v| (0.0..=1.0).contains(&v))?,
            t0,
            t_reset,
            c2: 4.0 * p.require("k2", "must be positive", |v| v > 0.0)?,
            k: p.require("k", "must be positive", |v| v > 0.0)?,
            momentum: p.flag("use_momentum"),
        })
    }

    /// `(û, τ, ξ)` driven by `g(x)`, a gradient or its estimate. Any
    /// trailing coordinates flow by `extra` and must keep `extra_margin`.
    fn system(
        d: Data,
        dim: usize,
        g: impl Fn(&[f64]) -> [f64; 2] + Send + Sync + 'static,
        extra: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        extra_margin: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> HybridSystem {
        let Data { rho, alpha, t0, t_reset, c2, k, momentum } = d;
        let c1 = 2.0 + rho;
        let flow = Arc::new(move |x: &[f64], dx: &mut [f64]| {
            let gv = g(x);
            if momentum {
                dx[0] = x[3];
                dx[1] = x[4];
                dx[2] = rho;
                dx[3] = -c1 / x[2] * x[3] - c2 * gv[0];
                dx[4] = -c1 / x[2] * x[4] - c2 * gv[1];
            } else {
                dx[0] = -k * gv[0];
                dx[1] = -k * gv[1];
                dx[2..5].fill(0.0);
            }
            extra(x, &mut dx[5..]);
        });
        HybridSystem::new(
            dim,
            Arc::new(move |x| (x[2] - t0).min(t_reset - x[2]).min(extra_margin(x))),
            flow,
            if momentum {
                Arc::new(move |x: &[f64]| -(x[2] - t_reset).abs())
            } else {
                empty_set()
            },
            Arc::new(move |x, out| {
                out.copy_from_slice(x);
                out[2] = t0;
                out[3] = (1.0 - alpha) * x[3];
                out[4] = (1.0 - alpha) * x[4];
            }),
        )
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let d = data(p)?;
        let t0 = d.t0;
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let omegas = p.require_all("omega", "must be positive", |v| v > 0.0)?;
        let dither = DitherParams::from_omegas(eps_a, omegas).map_err(es_err)?;
        let w = dither.omegas();
        // State (û, τ, ξ, μ); ξ is the momentum driven by the raw estimate.
        let estimate = move |x: &[f64]| {
            let (m1, m3) = (x[5], x[7]);
            let y = cost(&[x[0] + eps_a * m1, x[1] + eps_a * m3]);
            [2.0 / eps_a * y * m1, 2.0 / eps_a * y * m3]
        };
        let sys = system(
            d,
            9,
            estimate,
            move |x, dmu| {
                dmu[0] = w[0] * x[6];
                dmu[1] = -w[0] * x[5];
                dmu[2] = w[1] * x[8];
                dmu[3] = -w[1] * x[7];
            },
            |x| oscillator_margin(&x[5..9]),
        )
        .with_guard(Arc::new(|x| renormalize_pairs(x, 5..9)));
        let u0 = p.vector("u0");
        let mut m = meta(
            strings(&["u_hat0", "u_hat1", "tau", "xi0", "xi1", "mu0", "mu1", "mu2", "mu3"]),
            vec![0, 1],
            Some(vec![1.0, 1.0]),
        );
        m.counterpart = Some(vec![0, 1, 2, 3, 4]);
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
        let h = step_for(dither.max_omega(), 0.05, 0.01);
        Ok(Scenario {
            x0: vec![u0[0], u0[1], t0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            system: sys,
            config: config(h, t_max, 10_000, 10, 0),
            meta: m,
        })
    }

    /// The same dynamics driven by the exact gradient.
    pub fn reference(p: &Params) -> Result<HybridArc, ScenarioError> {
        let sc = build(p)?;
        let d = data(p)?;
        let t0 = d.t0;
        let sys = system(d, 5, grad, |_, _| {}, |_| f64::INFINITY);
        let u0 = p.vector("u0");
        super::super::reference_run(&sys, &[u0[0], u0[1], t0, 0.0, 0.0], &sc.config, &[0, 1, 2, 3, 4])
    }
}

pub(crate) mod newton_gradient_switch {
    use super::*;
    use crate::es::newton_matrix_raw;
    use crate::supervisors::hysteresis_sets;

    fn cost(u: &[f64]) -> f64 {
        let (a, b) = (u[0] - 1.0, u[1] - 1.0);
        a * a + 2.0 * b * b + 0.5 * a * b
    }

    pub fn params() -> Vec<ParamSpec> {
        vec![
            scalar("eps_a", 0.1, Origin::Derived, "dither amplitude"),
            vector("omega", &[1000.0, 1400.0], Origin::Derived, "dither frequencies"),
            scalar("k", 1.0, Origin::Derived, "decision gain"),
            scalar("k_f", 2.0, Origin::Derived, "gradient filter gain"),
            scalar("k_h", 0.5, Origin::Derived, "Newton estimator gain"),
            scalar("c0", 1.0, Origin::Derived, "cost gap that forces gradient mode"),
            scalar("c10", 0.2, Origin::Derived, "cost gap that allows Newton mode"),
            vector("u0", &[-2.0, 3.0], Origin::Derived, "initial estimate"),
            scalar("z0", 1.0, Origin::Derived, "initial mode (1 gradient, 0 Newton)"),
            scalar("mode_lock", 0.0, Origin::Trivial, "0 switches, 1 gradient only, 2 Newton only"),
            scalar("t_max", 15.0, Origin::Derived, "recommended horizon"),
        ]
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let k = p.require("k", "must be positive", |v| v > 0.0)?;
        let k_f = p.require("k_f", "must be positive", |v| v > 0.0)?;
        let k_h = p.require("k_h", "must be positive", |v| v > 0.0)?;
        let lock = p.require("mode_lock", "must be 0, 1 or 2", |v| [0.0, 1.0, 2.0].contains(&v))? as u8;
        let mut z0 = p.require("z0", "must be 0 or 1", |v| v == 0.0 || v == 1.0)?;
        if lock > 0 {
            z0 = if lock == 1 { 1.0 } else { 0.0 };
        }
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
        let omegas = p.require_all("omega", "must be positive", |v| v > 0.0)?;
        if omegas.len() != 2 {
            return super::super::invalid("Newton seeking needs exactly two frequencies");
        }
        let dither = DitherParams::from_omegas(eps_a, omegas).map_err(es_err)?;
        let w = dither.omegas();
        let hyst = hysteresis_sets(Arc::new(cost), 0.0, p.scalar("c0"), p.scalar("c10")).map_err(es_err)?;
        let (h1, h2) = (hyst.clone(), hyst);

        // State (û, z, ξ₁, ξ₂, μ): z = 1 follows the gradient estimate ξ₁,
        // z = 0 the Newton estimate ξ₂ ≈ H⁻¹∇J.
        let flow = Arc::new(move |x: &[f64], dx: &mut [f64]| {
            let z = x[2];
            let (m1, m3) = (x[7], x[9]);
            let y = cost(&[x[0] + eps_a * m1, x[1] + eps_a * m3]);
            let g = [2.0 / eps_a * y * m1, 2.0 / eps_a * y * m3];
            for i in 0..2 {
                dx[i] = -k * (z * x[3 + i] + (1.0 - z) * x[5 + i]);
                dx[3 + i] = -k_f * (x[3 + i] - g[i]);
            }
            dx[2] = 0.0;
            let hx = y * newton_matrix_raw(m1, m3, eps_a) * nalgebra::Vector2::new(x[5], x[6]);
            for i in 0..2 {
                dx[5 + i] = -(1.0 - z) * k_h * (hx[i] - g[i]);
            }
            dx[7] = w[0] * x[8];
            dx[8] = -w[0] * x[7];
            dx[9] = w[1] * x[10];
            dx[10] = -w[1] * x[9];
        });
        let bounded = |x: &[f64]| box_margin(&x[0..2], 1e6).min(box_margin(&x[3..7], 1e9));
        let mode = |x: &[f64]| x[2].round() as u8;
        let system = HybridSystem::new(
            11,
            Arc::new(move |x| {
                let c = bounded(x).min(oscillator_margin(&x[7..11]));
                if lock > 0 {
                    c
                } else {
                    c.min(h1.flow_margin(&x[0..2], mode(x)))
                }
            }),
            flow,
            if lock > 0 {
                empty_set()
            } else {
                Arc::new(move |x: &[f64]| h2.jump_margin(&x[0..2], mode(x)))
            },
            Arc::new(|x, out| {
                out.copy_from_slice(x);
                out[2] = 1.0 - x[2].round();
                if x[2].round() == 1.0 {
                    // Entering Newton mode: restart its estimate from the gradient one.
                    out[5] = x[3];
                    out[6] = x[4];
                }
            }),
        )
        .with_guard(Arc::new(|x| renormalize_pairs(x, 7..11)));
        let u0 = p.vector("u0");
        let h = step_for(dither.max_omega(), 0.2, 0.01);
        Ok(Scenario {
            x0: vec![u0[0], u0[1], z0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            system,
            config: config(h, t_max, 10_000, 20, 0),
            meta: meta(
                strings(&["u_hat0", "u_hat1", "z", "xi1_0", "xi1_1", "xi2_0", "xi2_1", "mu0", "mu1", "mu2", "mu3"]),
                vec![0, 1],
                Some(vec![1.0, 1.0]),
            ),
        })
    }
}
