use std::sync::Arc;

use hyseek_core::hybrid::{empirical_average, inflate, sample_at, simulate, whole_space};
use hyseek_core::{HybridError, HybridSystem, JumpPolicy, SolverConfig, Termination};
use proptest::prelude::*;

fn periodic_reset(period: f64, gamma: f64) -> HybridSystem {
    HybridSystem::new(
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
    )
}

fn bouncing_average(gbar: f64, lambda: f64) -> HybridSystem {
    HybridSystem::new(
        2,
        Arc::new(|x| x[0]),
        Arc::new(move |x, dx| {
            dx[0] = x[1];
            dx[1] = -gbar;
        }),
        Arc::new(|x| (-x[0].abs()).min(-x[1])),
        Arc::new(move |x, out| {
            out[0] = 0.0;
            out[1] = -lambda * x[1];
        }),
    )
}

fn cfg(h: f64, t_max: f64) -> SolverConfig {
    SolverConfig {
        h,
        t_max,
        ..SolverConfig::default()
    }
}

#[test]
fn periodic_reset_first_jump() {
    let sol = simulate(&periodic_reset(10.0, 0.1), &[0.0, 10.0], &cfg(0.01, 15.0)).unwrap();
    let jump = sol.arc.jumps().next().unwrap();
    assert!((jump.t - 10.0).abs() < 1e-9);
    assert!((jump.x_pre[0] - 10.0).abs() < 1e-9);
    assert!((jump.x_pre[1] - 10.0 * (-1.0f64).exp()).abs() < 1e-6);
    assert_eq!(jump.x_post[0], 0.0);
    assert!((jump.x_post[1] - 5.0 * (-1.0f64).exp()).abs() < 1e-6);
    assert_eq!(sol.termination, Termination::HorizonTime);
}

#[test]
fn periodic_reset_oracle_five_jumps() {
    let sol = simulate(&periodic_reset(10.0, 0.1), &[0.0, 10.0], &cfg(0.01, 55.0)).unwrap();
    let jumps: Vec<_> = sol.arc.jumps().collect();
    assert!(jumps.len() >= 5);
    for (k, jump) in jumps.iter().take(5).enumerate() {
        let k1 = (k + 1) as f64;
        assert!((jump.t - 10.0 * k1).abs() < 1e-10, "jump {k1} at {}", jump.t);
        let oracle = 10.0 * (-k1).exp() * 0.5f64.powf(k1);
        assert!((jump.x_post[1] - oracle).abs() < 1e-4);
    }
}

#[test]
fn jumps_at_horizon_are_taken() {
    let sol = simulate(&periodic_reset(10.0, 0.1), &[0.0, 10.0], &cfg(0.01, 30.0)).unwrap();
    assert_eq!(sol.arc.jump_count(), 3);
}

#[test]
fn no_dynamics_outside_both_sets() {
    let sol = simulate(&periodic_reset(10.0, 0.1), &[-1.0, 1.0], &cfg(0.01, 1.0)).unwrap();
    assert_eq!(sol.termination, Termination::NoDynamicsFromPoint);
    assert_eq!(sol.arc.sample_count(), 1);
}

#[test]
fn dimension_mismatch_rejected() {
    let err = simulate(&periodic_reset(10.0, 0.1), &[0.0], &cfg(0.01, 1.0)).unwrap_err();
    assert_eq!(err, HybridError::DimensionMismatch { expected: 2, got: 1 });
}

#[test]
fn averaged_bounce_first_impact() {
    let sol = simulate(&bouncing_average(10.0, 0.8), &[10.0, 0.0], &cfg(1e-3, 2.0)).unwrap();
    let jump = sol.arc.jumps().next().unwrap();
    assert!((jump.t - 2f64.sqrt()).abs() < 1e-8, "{}", jump.t);
    assert!((jump.x_post[1] - 0.8 * 10.0 * 2f64.sqrt()).abs() < 1e-6);
}

#[test]
fn averaged_bounce_intervals_are_geometric() {
    let sol = simulate(
        &bouncing_average(10.0, 0.8),
        &[10.0, 0.0],
        &SolverConfig {
            j_max: 6,
            ..cfg(1e-3, 20.0)
        },
    )
    .unwrap();
    let times = sol.arc.domain().jump_times();
    let v1 = 10.0 * 2f64.sqrt();
    for k in 1..times.len() {
        let expected = 2.0 * 0.8f64.powi(k as i32) * v1 / 10.0;
        assert!((times[k] - times[k - 1] - expected).abs() < 1e-6);
    }
    assert_eq!(sol.termination, Termination::HorizonJumps);
    assert_eq!(sol.arc.jump_count(), 6);
}

#[test]
fn zeno_accumulation_hits_jump_budget() {
    let sol = simulate(
        &bouncing_average(10.0, 0.5),
        &[1.0, 0.0],
        &SolverConfig {
            j_max: 200,
            ..cfg(1e-3, 10.0)
        },
    )
    .unwrap();
    assert_eq!(sol.termination, Termination::HorizonJumps);
    assert_eq!(sol.arc.jump_count(), 200);
    assert!(sol.zeno_warnings > 0);
    sol.arc.domain().check().unwrap();
}

#[test]
fn flow_set_exit_is_reported() {
    let sys = HybridSystem::continuous(
        1,
        Arc::new(|x| 1.0 - x[0]),
        Arc::new(|_, dx| dx[0] = 1.0),
    );
    let sol = simulate(&sys, &[0.0], &cfg(0.1, 5.0)).unwrap();
    assert_eq!(sol.termination, Termination::FlowSetExit);
    assert!((sol.arc.terminal_time() - 1.0).abs() < 1e-9);
}

#[test]
fn flow_first_keeps_flowing_in_the_overlap() {
    let sys = HybridSystem::new(
        1,
        Arc::new(|x| 2.0 - x[0]),
        Arc::new(|_, dx| dx[0] = 1.0),
        Arc::new(|x| x[0] - 1.0),
        Arc::new(|_, out| out[0] = 0.0),
    );
    let jf = simulate(&sys, &[0.0], &cfg(0.01, 3.0)).unwrap();
    let ff = simulate(
        &sys,
        &[0.0],
        &SolverConfig {
            jump_policy: JumpPolicy::FlowFirst,
            ..cfg(0.01, 3.0)
        },
    )
    .unwrap();
    assert!((jf.arc.domain().jump_times()[0] - 1.0).abs() < 1e-9);
    assert!((ff.arc.domain().jump_times()[0] - 2.0).abs() < 1e-9);
}

#[test]
fn sample_at_cases() {
    let sol = simulate(&periodic_reset(10.0, 0.1), &[0.0, 10.0], &cfg(0.01, 12.0)).unwrap();
    let x = sample_at(&sol.arc, 5.0, 0).unwrap();
    assert!((x[0] - 5.0).abs() < 1e-9);
    assert!((x[1] - 10.0 * (-0.5f64).exp()).abs() < 1e-4);
    let p = sol.arc.piece(0).unwrap();
    let stored = p.state(17, 2).to_vec();
    assert_eq!(sample_at(&sol.arc, p.times[17], 0).unwrap(), stored);
    assert!(matches!(sample_at(&sol.arc, 11.0, 0), Err(HybridError::OutOfDomain { .. })));
    assert!(matches!(sample_at(&sol.arc, 1.0, 1), Err(HybridError::OutOfDomain { .. })));
    assert!(matches!(sample_at(&sol.arc, 1.0, 7), Err(HybridError::OutOfDomain { .. })));

    let still = HybridSystem::continuous(1, whole_space(), Arc::new(|_, dx| dx[0] = 0.0));
    let sol = simulate(&still, &[3.5], &cfg(0.1, 1.0)).unwrap();
    assert_eq!(sample_at(&sol.arc, 0.55, 0).unwrap(), vec![3.5]);
}

#[test]
fn stride_keeps_endpoints() {
    let sys = periodic_reset(10.0, 0.1);
    let full = simulate(&sys, &[0.0, 10.0], &cfg(0.01, 25.0)).unwrap();
    let thin = simulate(
        &sys,
        &[0.0, 10.0],
        &SolverConfig {
            sample_stride: 37,
            ..cfg(0.01, 25.0)
        },
    )
    .unwrap();
    assert!(thin.arc.sample_count() * 20 < full.arc.sample_count());
    assert_eq!(thin.arc.domain(), full.arc.domain());
    assert_eq!(thin.arc.terminal(), full.arc.terminal());
}

#[test]
fn rk4_is_fourth_order() {
    // Harmonic oscillator, compared with the exact rotation.
    let sys = HybridSystem::continuous(
        2,
        whole_space(),
        Arc::new(|x, dx| {
            dx[0] = x[1];
            dx[1] = -x[0];
        }),
    );
    let err = |h: f64| {
        let sol = simulate(&sys, &[1.0, 0.0], &cfg(h, 10.0)).unwrap();
        let x = sol.arc.terminal();
        ((x[0] - 10f64.cos()).powi(2) + (x[1] + 10f64.sin()).powi(2)).sqrt()
    };
    let (e1, e2) = (err(0.01), err(0.005));
    assert!((e1 / e2).log2() >= 3.5, "observed order {}", (e1 / e2).log2());
}

#[test]
fn inflation_zero_is_nominal() {
    let sys = periodic_reset(10.0, 0.1);
    let same = inflate(&sys, 0.0, Arc::new(|_| 1.0), 3);
    let a = simulate(&sys, &[0.0, 10.0], &cfg(0.01, 35.0)).unwrap();
    let b = simulate(&same, &[0.0, 10.0], &cfg(0.01, 35.0)).unwrap();
    assert_eq!(a.arc, b.arc);
}

#[test]
fn inflated_gradient_flow_derivative_bound() {
    let sys = HybridSystem::continuous(1, whole_space(), Arc::new(|x, dx| dx[0] = -x[0]));
    let fat = inflate(&sys, 0.1, Arc::new(|_| 1.0), 11);
    let sol = simulate(&fat, &[2.0], &cfg(0.01, 5.0)).unwrap();
    for (_, _, x) in sol.arc.samples() {
        let dx = fat.flow_vec(x);
        assert!((dx[0] + x[0]).abs() <= 0.1 + 1e-12);
    }
}

#[test]
fn inflated_margins_dominate() {
    let sys = periodic_reset(10.0, 0.1);
    let fat = inflate(&sys, 0.05, Arc::new(|x| 1.0 + x[1].abs()), 0);
    for k in 0..200 {
        let x = [k as f64 * 0.07 - 1.0, (k as f64).sin()];
        assert!(fat.flow_margin(&x) >= sys.flow_margin(&x));
        assert!(fat.jump_margin(&x) >= sys.jump_margin(&x));
    }
}

#[test]
fn inflated_periodic_reset_jump_shift() {
    let sys = periodic_reset(10.0, 0.1);
    let fat = inflate(&sys, 0.05, Arc::new(|_| 1.0), 5);
    let c = cfg(0.01, 30.0);
    let a = simulate(&sys, &[0.0, 10.0], &c).unwrap().arc.domain().jump_times();
    let b = simulate(&fat, &[0.0, 10.0], &c).unwrap().arc.domain().jump_times();
    for (ta, tb) in a.iter().zip(&b).take(3) {
        assert!((ta - tb).abs() <= 0.6, "{ta} vs {tb}");
    }
}

#[test]
fn averages() {
    let gbar = 10.0;
    let avg = empirical_average(
        |_, tau| vec![2.0 * gbar * tau.sin().powi(2)],
        2.0 * std::f64::consts::PI,
        &[0.0],
        8,
    );
    assert!((avg[0] - 10.0).abs() < 1e-9);

    let eps_a = 0.01;
    let avg = empirical_average(
        |x, tau| {
            let u = x[0] + eps_a * tau.sin();
            vec![-(2.0 / eps_a) * u * u * tau.sin()]
        },
        2.0 * std::f64::consts::PI,
        &[1.0],
        64,
    );
    assert!((avg[0] + 2.0).abs() < eps_a);

    let avg = empirical_average(|x, _| vec![x[0] * 3.0, 1.0], 0.7, &[2.0], 8);
    assert_eq!(avg, vec![6.0, 1.0]);
}

#[test]
fn deterministic_runs() {
    let sys = inflate(&bouncing_average(10.0, 0.8), 0.05, Arc::new(|_| 1.0), 9);
    let c = SolverConfig {
        j_max: 20,
        ..cfg(1e-3, 10.0)
    };
    let a = simulate(&sys, &[10.0, 0.0], &c).unwrap();
    let b = simulate(&sys, &[10.0, 0.0], &c).unwrap();
    assert_eq!(a.arc, b.arc);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn domains_are_well_formed(
        period in 0.2f64..3.0,
        gamma in 0.0f64..1.0,
        x1 in 0.0f64..1.0,
        x2 in -5.0f64..5.0,
        h in 0.005f64..0.05,
        lambda in 0.1f64..0.95,
        height in 0.1f64..5.0,
    ) {
        let c = SolverConfig { j_max: 50, ..cfg(h, 8.0) };
        for (sys, x0) in [
            (periodic_reset(period, gamma), vec![x1 * period, x2]),
            (bouncing_average(9.81, lambda), vec![height, x2]),
        ] {
            let sol = simulate(&sys, &x0, &c).unwrap();
            let dom = sol.arc.domain();
            prop_assert!(dom.check().is_ok(), "{:?}", dom.check());
            for p in sol.arc.pieces() {
                prop_assert!(p.times.windows(2).all(|w| w[1] >= w[0]));
                for k in 0..p.len() {
                    prop_assert!(sys.flow_margin(p.state(k, 2)) >= -1e-6);
                }
            }
            for jump in sol.arc.jumps() {
                prop_assert_eq!(sys.jump_vec(jump.x_pre), jump.x_post.to_vec());
            }
            match sol.termination {
                Termination::HorizonJumps => prop_assert_eq!(sol.arc.jump_count(), 50),
                Termination::HorizonTime => prop_assert!(sol.arc.terminal_time() >= 8.0 - h),
                other => prop_assert!(false, "unexpected {:?}", other),
            }
        }
    }
}
