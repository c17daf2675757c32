use std::collections::BTreeMap;

use hyseek_core::scenarios::{
    build_scenario, build_scenario_seeded, list_scenarios, reference_arc, ParamValue, Scenario, ScenarioError,
};
use hyseek_core::{simulate, HybridArc, Termination};
use proptest::prelude::*;
use rayon::prelude::*;

fn ov(pairs: &[(&str, ParamValue)]) -> BTreeMap<String, ParamValue> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn s(v: f64) -> ParamValue {
    ParamValue::Scalar(v)
}

fn col(sc: &Scenario, label: &str) -> usize {
    sc.meta
        .labels
        .iter()
        .position(|l| l == label)
        .unwrap_or_else(|| panic!("no column {label}"))
}

/// `(−margin)` of the simplex: the most negative entry or the sum defect.
fn simplex_margin(u: &[f64]) -> f64 {
    let low = u.iter().copied().fold(f64::INFINITY, f64::min);
    low.min(-(u.iter().sum::<f64>() - 1.0).abs())
}

fn l1_box_margin(u: &[f64]) -> f64 {
    1.0 - u[0].abs() - u[1].abs()
}

fn jump_times(arc: &HybridArc) -> Vec<f64> {
    arc.jumps().map(|j| j.t).collect()
}

fn min_over(arc: &HybridArc, f: impl Fn(&[f64]) -> f64) -> f64 {
    arc.samples().map(|(_, _, x)| f(x)).fold(f64::INFINITY, f64::min)
}

#[test]
fn registry_has_sixteen_entries_with_unique_names() {
    let list = list_scenarios();
    assert_eq!(list.len(), 16);
    let mut names: Vec<_> = list.iter().map(|i| i.name.clone()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 16);
    for info in &list {
        assert!(!info.params.is_empty(), "{} lists no parameters", info.name);
    }
}

/// Every entry runs its recommended configuration; the same runs carry the
/// per-scenario invariants that need a full horizon.
#[test]
fn smoke_every_scenario_runs_its_horizon() {
    let names: Vec<String> = list_scenarios().into_iter().map(|i| i.name).collect();
    let failures: Vec<String> = names
        .par_iter()
        .filter_map(|name| {
            let sc = build_scenario(name, &BTreeMap::new()).unwrap();
            let sol = simulate(&sc.system, &sc.x0, &sc.config).unwrap();
            let arc = &sol.arc;
            let mut bad = Vec::new();
            if !matches!(sol.termination, Termination::HorizonTime | Termination::HorizonJumps) {
                bad.push(format!("terminated with {:?}", sol.termination));
            }
            if let Err(e) = arc.domain().check() {
                bad.push(e);
            }
            if arc.samples().any(|(_, _, x)| x.iter().any(|v| !v.is_finite())) {
                bad.push("non-finite state".into());
            }
            match name.as_str() {
                "rps_nash" => {
                    let m = min_over(arc, |x| simplex_margin(&x[..3]));
                    if m < -1e-6 {
                        bad.push(format!("simplex margin {m}"));
                    }
                    let u = arc.terminal();
                    let err = u[..3].iter().map(|v| (v - 1.0 / 3.0).powi(2)).sum::<f64>().sqrt();
                    if err > 0.05 {
                        bad.push(format!("terminal distance to the equilibrium {err}"));
                    }
                }
                "projected_tracking" => {
                    let m = min_over(arc, |x| l1_box_margin(&x[..2]));
                    if m < -1e-6 {
                        bad.push(format!("box margin {m}"));
                    }
                }
                _ => {}
            }
            (!bad.is_empty()).then(|| format!("{name}: {}", bad.join("; ")))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn periodic_reset_jumps_three_times_in_thirty_seconds() {
    let sc = build_scenario("periodic_reset", &BTreeMap::new()).unwrap();
    let sol = simulate(&sc.system, &sc.x0, &sc.config).unwrap();
    assert_eq!(sol.arc.jump_count(), 3);
    for (k, t) in jump_times(&sol.arc).iter().enumerate() {
        assert!((t - 10.0 * (k + 1) as f64).abs() < 1e-9, "jump {k} at {t}");
    }
}

#[test]
fn rps_state_layout() {
    let sc = build_scenario("rps_nash", &BTreeMap::new()).unwrap();
    assert_eq!(sc.system.dim(), 12);
    assert_eq!(sc.meta.decision, vec![0, 1, 2]);
    assert_eq!(sc.meta.target, Some(vec![1.0 / 3.0; 3]));
}

#[test]
fn distributed_agents_reach_consensus_under_switching_graphs() {
    let sc = build_scenario("distributed_sign", &BTreeMap::new()).unwrap();
    let sol = simulate(&sc.system, &sc.x0, &sc.config).unwrap();
    let graph = col(&sc, "graph");
    let mut graphs_seen = [false; 3];
    let mut reached = None;
    for (t, _, x) in sol.arc.samples() {
        assert!(x.iter().all(|v| v.is_finite()), "state diverged at {t}");
        graphs_seen[x[graph].round() as usize] = true;
        let mut gap = 0.0_f64;
        for i in 0..5 {
            for j in i + 1..5 {
                let d: f64 = (0..5).map(|c| (x[5 * i + c] - x[5 * j + c]).powi(2)).sum();
                gap = gap.max(d.sqrt());
            }
        }
        if gap < 1.0 && reached.is_none() {
            reached = Some(t);
        }
    }
    assert!(graphs_seen.iter().all(|s| *s));
    let t = reached.expect("agents never came within 1 of each other");
    assert!(t < sc.config.t_max);
    // Switches every 0.1 s.
    let times = jump_times(&sol.arc);
    for w in times.windows(2) {
        assert!((w[1] - w[0] - 0.1).abs() < 1e-6);
    }
}

#[test]
fn momentum_resets_at_the_ceiling_and_clears_momentum() {
    let sc = build_scenario("momentum_reset", &ov(&[("alpha", s(1.0))])).unwrap();
    let sol = simulate(&sc.system, &sc.x0, &sc.config).unwrap();
    let (tau, xi0) = (col(&sc, "tau"), col(&sc, "xi0"));
    let jumps: Vec<_> = sol.arc.jumps().collect();
    assert!(jumps.len() >= 3);
    for jr in jumps {
        assert!((jr.x_pre[tau] - 5.0).abs() < 1e-9, "reset at tau = {}", jr.x_pre[tau]);
        assert_eq!(jr.x_post[tau], 1.0);
        assert_eq!(&jr.x_post[xi0..xi0 + 2], &[0.0, 0.0]);
    }
}

#[test]
fn overrides_are_checked() {
    let e = build_scenario("no_such_thing", &BTreeMap::new()).unwrap_err();
    assert!(matches!(e, ScenarioError::UnknownScenario(_)));
    let cases = [
        ov(&[("nonexistent", s(1.0))]),
        ov(&[("x0", s(1.0))]),
        ov(&[("x0", ParamValue::Vector(vec![1.0, 2.0, 3.0]))]),
        ov(&[("gamma", s(f64::NAN))]),
        ov(&[("period", s(-1.0))]),
        ov(&[("x0", ParamValue::Vector(vec![11.0, 1.0]))]),
    ];
    for c in &cases {
        let e = build_scenario("periodic_reset", c).unwrap_err();
        assert!(matches!(e, ScenarioError::InvalidOverride(_)), "{c:?} gave {e:?}");
    }
}

#[test]
fn metadata_echoes_resolved_parameters() {
    let sc = build_scenario_seeded("attack_gradient", &ov(&[("eta2", s(0.3))]), 7).unwrap();
    assert_eq!(sc.meta.name, "attack_gradient");
    assert_eq!(sc.meta.params["eta2"], s(0.3));
    assert_eq!(sc.meta.params["eps_a"], s(0.1));
    assert_eq!(sc.config.rng_seed, 7);
    assert_eq!(sc.meta.labels.len(), sc.system.dim());
}

#[test]
fn stated_defaults_match_the_published_values() {
    let get = |name: &str, p: &str| {
        list_scenarios()
            .into_iter()
            .find(|i| i.name == name)
            .unwrap()
            .params
            .into_iter()
            .find(|q| q.name == p)
            .unwrap()
            .default
    };
    assert_eq!(get("periodic_reset", "period"), s(10.0));
    assert_eq!(get("periodic_reset", "gamma"), s(0.1));
    assert_eq!(get("bouncing_seeker", "omega"), s(100.0));
    assert_eq!(get("rps_nash", "k"), s(0.005));
    assert_eq!(get("rps_nash", "eps_a"), s(0.01));
    assert_eq!(get("rps_nash", "omega"), ParamValue::Vector(vec![1.85e5, 2.0e5, 2.53e5]));
    assert_eq!(get("attack_gradient", "omega"), ParamValue::Vector(vec![810.0, 420.0]));
    assert_eq!(get("unknown_constraints", "a"), ParamValue::Vector(vec![-1.0, -2.0]));
    assert_eq!(get("distributed_sign", "alpha"), s(15.0));
    assert_eq!(get("momentum_reset", "rho"), s(0.5));
    assert_eq!(get("source_surveillance", "eta_d"), s(0.01));
}

#[test]
fn scenarios_without_a_counterpart_say_so() {
    let e = reference_arc("periodic_reset", &BTreeMap::new()).unwrap_err();
    assert!(matches!(e, ScenarioError::NoCounterpart(_)));
    for info in list_scenarios() {
        assert_eq!(
            reference_arc(&info.name, &BTreeMap::new()).is_ok(),
            info.has_counterpart,
            "{}",
            info.name
        );
    }
}

#[test]
fn averaged_ball_bounces_on_a_geometric_schedule() {
    let arc = reference_arc("bouncing_average", &BTreeMap::new()).unwrap();
    let (g, lambda) = (10.0, 0.8_f64);
    let v1 = (2.0 * g * 10.0_f64).sqrt();
    let times = jump_times(&arc);
    assert!((times[0] - v1 / g).abs() < 1e-8);
    for k in 1..15 {
        let expect = 2.0 * lambda.powi(k as i32) * v1 / g;
        let got = times[k] - times[k - 1];
        assert!((got - expect).abs() < 1e-7, "interval {k}: {got} vs {expect}");
    }
}

#[test]
fn gradient_flow_reference_is_exponential() {
    let arc = reference_arc("growing_timer_es", &BTreeMap::new()).unwrap();
    for (t, _, x) in arc.samples() {
        let exact = 2.0 * (-2.0 * t).exp();
        assert!((x[0] - exact).abs() < 1e-10, "t = {t}: {} vs {exact}", x[0]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn periodic_reset_halves_and_decays(period in 2.0..20.0f64, gamma in 0.0..0.5f64, x2 in -10.0..10.0f64) {
        let o = ov(&[
            ("period", s(period)),
            ("gamma", s(gamma)),
            ("x0", ParamValue::Vector(vec![0.0, x2])),
        ]);
        let sc = build_scenario("periodic_reset", &o).unwrap();
        let sol = simulate(&sc.system, &sc.x0, &sc.config).unwrap();
        prop_assert_eq!(sol.arc.jump_count(), 3);
        for jr in sol.arc.jumps() {
            let k = (jr.j + 1) as i32;
            let expect = x2 * (-gamma * period * k as f64).exp() * 0.5f64.powi(k);
            prop_assert!((jr.x_post[1] - expect).abs() < 1e-7 * (1.0 + x2.abs()));
            prop_assert_eq!(jr.x_post[0], 0.0);
        }
    }

    #[test]
    fn scalar_overrides_round_trip(eta2 in 0.01..0.99f64, seed in any::<u64>()) {
        let sc = build_scenario_seeded("attack_gradient", &ov(&[("eta2", s(eta2))]), seed).unwrap();
        prop_assert_eq!(&sc.meta.params["eta2"], &s(eta2));
        prop_assert_eq!(sc.config.rng_seed, seed);
    }
}
