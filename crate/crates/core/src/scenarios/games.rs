//! Games and multi-agent loops.

use std::sync::Arc;

use super::{config, meta, scalar, step_for, vector, Origin, ParamSpec, Params, Scenario, ScenarioError};
use crate::es::{assemble_loop, Decision, DitherParams, FilterParams, LoopConfig, Measurement, Plant};
use crate::hybrid::whole_space;

fn es_err(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::InvalidOverride(e.to_string())
}

pub(crate) mod rps_nash {
    use super::*;
    use crate::set_valued::best_response_into;

    pub fn params() -> Vec<ParamSpec> {
        vec![
            scalar("eps_a", 0.01, Origin::Stated, "dither amplitude"),
            scalar("k", 0.005, Origin::Stated, "loop gain"),
            scalar("kf_over_epsf", 10.0, Origin::Stated, "filter rate k_f / eps_f"),
            vector("omega", &[1.85e5, 2.0e5, 2.53e5], Origin::Stated, "dither frequencies"),
            vector("x0", &[0.4, 0.3, 0.3], Origin::Derived, "initial mixed strategy"),
            scalar("step_rad", 1.5, Origin::Derived, "RK4 step times the largest dither frequency"),
            scalar(
                "flip_second",
                0.0,
                Origin::Trivial,
                "1 uses J2 = u2 (u1 - u3) instead of the zero-sum J2 = u2 (u3 - u1)",
            ),
            scalar("t_max", 300.0, Origin::Derived, "recommended horizon"),
        ]
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let k = p.require("k", "must be positive", |v| v > 0.0)?;
        let rate = p.require("kf_over_epsf", "must be positive", |v| v > 0.0)?;
        let omegas = p.require_all("omega", "must be positive", |v| v > 0.0)?.to_vec();
        let x0 = p.require_all("x0", "must be non-negative", |v| v >= 0.0)?;
        if (x0.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return super::super::invalid("x0 must sum to 1");
        }
        let s2 = if p.flag("flip_second") { -1.0 } else { 1.0 };
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;

        let decision = Decision {
            flow: Arc::new(move |u, xi, out| {
                best_response_into(xi, out);
                for (o, v) in out.iter_mut().zip(u) {
                    *o = k * (*o - v);
                }
            }),
            ..Decision::gradient(3)
        };
        let payoffs = Measurement::PerCoordinate {
            eval: Arc::new(move |s, y| {
                let u = s.u;
                y[0] = u[0] * (u[1] - u[2]);
                y[1] = s2 * u[1] * (u[2] - u[0]);
                y[2] = u[2] * (u[0] - u[1]);
            }),
        };
        let dither = DitherParams::from_omegas(eps_a, &omegas).map_err(es_err)?;
        let lp = assemble_loop(
            decision,
            Plant::Static(payoffs),
            &dither,
            Some(FilterParams::new(rate, 1.0)),
            &LoopConfig::default(),
        )
        .map_err(es_err)?;
        let h = step_for(dither.max_omega(), p.scalar("step_rad"), 0.01);
        let stride = ((0.05 / h).round() as usize).max(1);
        Ok(Scenario {
            x0: lp.layout.initial_state(x0, &[]),
            system: lp.system,
            config: config(h, t_max, 10, stride, 0),
            meta: meta(lp.layout.labels(), vec![0, 1, 2], Some(vec![1.0 / 3.0; 3])),
        })
    }
}

pub(crate) mod distributed_sign {
    use super::*;

    const AGENTS: usize = 5;
    const B: [[f64; 5]; AGENTS] = [
        [1.0, 2.0, 3.0, 4.0, 5.0],
        [5.0, 4.0, 3.0, 2.0, 1.0],
        [2.0, 3.0, 4.0, 5.0, 1.0],
        [3.0, 4.0, 5.0, 1.0, 2.0],
        [4.0, 5.0, 1.0, 2.0, 3.0],
    ];

    /// Ring, star around agent 0, path.
    fn neighbours(graph: usize, i: usize) -> Vec<usize> {
        let n = AGENTS;
        match graph {
            0 => vec![(i + n - 1) % n, (i + 1) % n],
            1 if i == 0 => (1..n).collect(),
            1 => vec![0],
            _ => [i.checked_sub(1), (i + 1 < n).then_some(i + 1)].into_iter().flatten().collect(),
        }
    }

    fn sign(z: f64) -> f64 {
        if z > 0.0 {
            1.0
        } else if z < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    pub fn params() -> Vec<ParamSpec> {
        vec![
            scalar("eps_a", 0.8, Origin::Stated, "dither amplitude"),
            scalar("k", 0.05, Origin::Stated, "loop gain"),
            scalar("k_f", 0.1, Origin::Stated, "filter gain"),
            scalar("eps_f", 0.1, Origin::Stated, "filter time constant"),
            vector(
                "omega",
                &[500.0 * 5.0 / 6.0, 500.0 * 3.0 / 8.0, 500.0 * 2.0 / 3.0, 500.0 * 4.0 / 5.0, 500.0 * 7.0 / 10.0],
                Origin::Stated,
                "per-coordinate dither frequencies shared by all agents",
            ),
            scalar("alpha", 15.0, Origin::Stated, "coupling gain k / delta"),
            scalar("gamma", 0.1, Origin::Stated, "gradient weight"),
            scalar("switch_period", 0.1, Origin::Stated, "seconds between graph changes"),
            scalar("lambda_xi", 1e7, Origin::Derived, "filter state bound"),
            scalar("t_max", 20.0, Origin::Derived, "recommended horizon"),
        ]
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let k = p.require("k", "must be positive", |v| v > 0.0)?;
        let alpha = p.require("alpha", "must be non-negative", |v| v >= 0.0)?;
        let gamma = p.scalar("gamma");
        let period = p.require("switch_period", "must be positive", |v| v > 0.0)?;
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
        let omegas = p.require_all("omega", "must be positive", |v| v > 0.0)?;
        let dither = DitherParams::tiled(eps_a, omegas, AGENTS).map_err(es_err)?;
        let n = AGENTS * 5;

        // x_uz = (û₁..û₅, τ_g, graph). Rates are divided by k because the
        // loop gain scales the whole decision flow.
        let decision = Decision {
            n,
            r: 2,
            flow_set: Arc::new(move |z| period - z[n]),
            flow: Arc::new(move |z, xi, out| {
                let graph = z[n + 1].round() as usize;
                for i in 0..AGENTS {
                    let nb = neighbours(graph, i);
                    for d in 0..5 {
                        let c = i * 5 + d;
                        let pull: f64 = nb.iter().map(|&j| sign(z[j * 5 + d] - z[c])).sum();
                        out[c] = alpha / k * pull - gamma * xi[c];
                    }
                }
                out[n] = 1.0 / k;
                out[n + 1] = 0.0;
            }),
            jump_set: Arc::new(move |z| z[n] - period),
            jump: Arc::new(move |z, _, out| {
                out.copy_from_slice(z);
                out[n] = 0.0;
                out[n + 1] = ((z[n + 1].round() as usize + 1) % 3) as f64;
            }),
            filter_jump: None,
        };
        let costs = Measurement::Grouped {
            sizes: vec![5; AGENTS],
            eval: Arc::new(|s, y| {
                for (i, b) in B.iter().enumerate() {
                    let u = &s.u[i * 5..i * 5 + 5];
                    y[i] = u.iter().zip(b).map(|(x, bb)| 0.5 * x * x - 100.0 * bb * x).sum();
                }
            }),
        };
        let mut filter = FilterParams::new(p.scalar("k_f"), p.scalar("eps_f"));
        filter.lambda_xi = p.scalar("lambda_xi");
        let lp = assemble_loop(
            decision,
            Plant::Static(costs),
            &dither,
            Some(filter),
            &LoopConfig {
                k,
                ..LoopConfig::default()
            },
        )
        .map_err(es_err)?;
        let mut x_uz: Vec<f64> = B.iter().flatten().copied().collect();
        x_uz.extend([0.0, 0.0]);
        let mut labels = lp.layout.labels();
        labels[n] = "tau_g".into();
        labels[n + 1] = "graph".into();
        let h = step_for(k * dither.max_omega(), 0.02, 2.5e-4);
        let target: Vec<f64> = (0..n).map(|c| 100.0 * B.iter().map(|b| b[c % 5]).sum::<f64>() / 5.0).collect();
        Ok(Scenario {
            x0: lp.layout.initial_state(&x_uz, &[]),
            system: lp.system,
            config: config(h, t_max, 100_000, 40, 0),
            meta: meta(labels, (0..n).collect(), Some(target)),
        })
    }
}

pub(crate) mod nash_intermittent {
    use super::*;
    use crate::set_valued::Selector;
    use crate::supervisors::{activation_monitor, dwell_time_automaton, ActivationParams, DwellParams};

    /// `(q₁, q₂)` for `ℓ = 1..4`.
    const UPDATES: [[f64; 2]; 4] = [[1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];

    pub fn params() -> Vec<ParamSpec> {
        vec![
            scalar("eps_a", 0.2, Origin::Derived, "dither amplitude"),
            vector("omega", &[10.0, 13.0], Origin::Derived, "dither frequencies before the loop gain"),
            scalar("k", 0.02, Origin::Derived, "loop gain; slows the controller below the plant"),
            scalar("gain", 0.1, Origin::Derived, "ascent gain"),
            scalar("k_f", 1.0, Origin::Derived, "filter gain"),
            scalar("eps_f", 2.0, Origin::Derived, "filter time constant"),
            scalar("n0", 2.0, Origin::Derived, "dwell-time chatter bound N0"),
            scalar("eta1", 0.2, Origin::Derived, "dwell-time rate"),
            scalar("t0", 5.0, Origin::Derived, "activation budget T0"),
            scalar("eta2", 0.3, Origin::Derived, "activation ratio"),
            vector("u0", &[-1.0, 2.0], Origin::Derived, "initial actions"),
            scalar("t_max", 3000.0, Origin::Derived, "recommended horizon"),
        ]
    }

    /// Player dynamics under a convex combination of the two plant modes.
    fn player(th: &[f64], u: f64, p: f64, out: &mut [f64]) {
        out[0] = -th[0] + (1.5 - 1.25 * p) * th[1] + u;
        out[1] = -th[1] + (-2.25 + 1.25 * p) * th[0] + (2.25 - 1.25 * p) * u;
    }

    pub fn build(p: &Params) -> Result<Scenario, ScenarioError> {
        let eps_a = p.require("eps_a", "must be positive", |v| v > 0.0)?;
        let omegas = p.require_all("omega", "must be positive", |v| v > 0.0)?;
        let gain = p.require("gain", "must be positive", |v| v > 0.0)?;
        let k = p.require("k", "must be positive", |v| v > 0.0)?;
        let t_max = p.require("t_max", "must be positive", |v| v > 0.0)?;
        let dwell = dwell_time_automaton(
            DwellParams {
                n0: p.scalar("n0"),
                eta1: p.scalar("eta1"),
            },
            Selector::MaxRate,
        )
        .map_err(es_err)?;
        let monitor = activation_monitor(
            ActivationParams {
                t0: p.scalar("t0"),
                eta2: p.scalar("eta2"),
                unstable_modes: vec![2, 3, 4],
            },
            Selector::MaxRate,
        )
        .map_err(es_err)?;
        let (n0, t0) = (dwell.params.n0, monitor.params.t0);
        let seed = p.seed;

        // x_uz = (û₁, û₂, ℓ, τ₁, τ₂).
        let (dw, mo) = (dwell.clone(), monitor.clone());
        let (dw2, mo2) = (dwell.clone(), monitor.clone());
        let decision = Decision {
            n: 2,
            r: 3,
            flow_set: Arc::new(move |z| dw.flow_margin(z[3]).min(mo.flow_margin(z[4]))),
            flow: Arc::new(move |z, xi, out| {
                let q = UPDATES[z[2].round() as usize - 1];
                out[0] = gain * q[0] * xi[0];
                out[1] = gain * q[1] * xi[1];
                out[2] = 0.0;
                // Timers run in plant time; the loop gain scales this whole flow.
                out[3] = if z[3] >= n0 { 0.0 } else { dw2.rate(z) / k };
                out[4] = mo2.rate(z[4], z[2], z) / k;
            }),
            jump_set: Arc::new(move |z| {
                if z[2].round() == 1.0 {
                    // Start an interruption once both budgets are full.
                    (z[3] - n0).min(z[4] - t0)
                } else {
                    // Resume once the activation budget is spent.
                    (z[3] - 1.0).min(-z[4])
                }
            }),
            jump: Arc::new(move |z, _, out| {
                out.copy_from_slice(z);
                out[3] = z[3] - 1.0;
                out[2] = if z[2].round() == 1.0 {
                    2.0 + (Selector::SeededUniform(seed).pick(0.0, 3.0, z).floor()).min(2.0)
                } else {
                    1.0
                };
            }),
            filter_jump: None,
        };
        let sel = Selector::SeededUniform(seed ^ 0x9e37_79b9);
        let plant = Plant::Dynamic {
            m: 4,
            flow: Arc::new(move |th, u, out| {
                let alpha = sel.pick(0.0, 1.0, th);
                let mode = 2.0 - alpha;
                player(&th[0..2], u[0], mode, &mut out[0..2]);
                player(&th[2..4], u[1], mode, &mut out[2..4]);
            }),
            flow_set: whole_space(),
            output: Measurement::PerCoordinate {
                eval: Arc::new(|s, y| {
                    let (a, b) = (s.theta[0], s.theta[2]);
                    y[0] = -a * a + 0.5 * a * b + a;
                    y[1] = -b * b + 0.5 * a * b + b;
                }),
            },
        };
        let dither = DitherParams::from_omegas(eps_a, omegas).map_err(es_err)?;
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
        let sys = super::super::add_guard(
            lp.system,
            Arc::new(move |x| {
                x[3] = x[3].min(n0);
                x[4] = x[4].clamp(0.0, t0);
            }),
        );
        let u0 = p.vector("u0");
        let x_uz = [u0[0], u0[1], 1.0, 0.0, t0];
        let mut labels = lp.layout.labels();
        labels[2] = "mode".into();
        labels[3] = "tau1".into();
        labels[4] = "tau2".into();
        let h = step_for(k * dither.max_omega(), 0.02, 0.01);
        Ok(Scenario {
            x0: lp.layout.initial_state(&x_uz, &[u0[0], 0.0, u0[1], 0.0]),
            system: sys,
            config: config(h, t_max, 10_000, 10, 0),
            meta: meta(labels, vec![0, 1], Some(vec![2.0 / 3.0, 2.0 / 3.0])),
        })
    }
}
