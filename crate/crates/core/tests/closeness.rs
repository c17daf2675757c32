use hyseek_core::closeness::{
    log_grid, min_epsilon, min_epsilon_masked, tau_eps_close, tau_eps_close_masked, ClosenessError,
    ClosenessReport, MinEps,
};
use hyseek_core::hybrid::{FlowPiece, HybridArc};
use proptest::prelude::*;

/// Arc sampled every `dt` from `f(t, j)` with jumps at the given times.
fn arc_from(jump_times: &[f64], t_end: f64, dt: f64, dim: usize, f: impl Fn(f64, usize) -> Vec<f64>) -> HybridArc {
    let mut bounds = vec![0.0];
    bounds.extend_from_slice(jump_times);
    bounds.push(t_end);
    let pieces = bounds
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            let steps = ((w[1] - w[0]) / dt).ceil().max(1.0) as usize;
            let times: Vec<f64> = (0..=steps)
                .map(|k| if k == steps { w[1] } else { w[0] + k as f64 * dt })
                .collect();
            let states = times.iter().flat_map(|&t| f(t, j)).collect();
            FlowPiece { j, times, states }
        })
        .collect();
    HybridArc::from_pieces(dim, pieces).unwrap()
}

fn step_pair(shift: f64) -> HybridArc {
    arc_from(&[shift], 2.0, 0.05, 1, |_, j| vec![j as f64])
}

#[test]
fn reflexive() {
    let a = arc_from(&[0.7, 1.3], 3.0, 0.01, 2, |t, j| vec![t.sin() + j as f64, t.cos()]);
    for eps in [1e-9, 1e-3, 0.5] {
        assert!(tau_eps_close(&a, &a, 10.0, eps).unwrap());
    }
    let r = min_epsilon(&a, &a, 10.0, &[1e-6, 1e-3, 1.0]).unwrap();
    assert_eq!(r.min_eps, MinEps::Certified(1e-6));
    assert!(r.witnesses.iter().all(|w| w.t == w.s && w.distance == 0.0));
}

#[test]
fn shifted_jump() {
    let (a, b) = (step_pair(1.0), step_pair(1.2));
    assert!(!tau_eps_close(&a, &b, 10.0, 0.1).unwrap());
    assert!(tau_eps_close(&a, &b, 10.0, 0.25).unwrap());
    let r = min_epsilon(&a, &b, 10.0, &[0.05, 0.1, 0.19, 0.25, 0.5]).unwrap();
    assert_eq!(r.min_eps, MinEps::Certified(0.25));
    // The time condition is non-strict, so a shift of exactly one grid value
    // is already certified by that value.
    let r = min_epsilon(&a, &b, 10.0, &[0.05, 0.1, 0.2, 0.25, 0.5]).unwrap();
    assert_eq!(r.min_eps, MinEps::Certified(0.2));
    for w in &r.witnesses {
        assert!((w.t - w.s).abs() <= 0.2 && w.distance < 0.2);
    }
}

#[test]
fn jump_count_mismatch_fails() {
    let a = step_pair(1.0);
    let b = arc_from(&[], 2.0, 0.05, 1, |_, _| vec![0.0]);
    assert!(!tau_eps_close(&a, &b, 10.0, 5.0).unwrap());
    // Before the jump the arcs agree, so a short horizon passes.
    assert!(tau_eps_close(&a, &b, 0.9, 0.01).unwrap());
}

#[test]
fn exceeds_grid_flag_serializes() {
    let r = min_epsilon(&step_pair(0.5), &step_pair(1.5), 10.0, &[0.1, 0.2]).unwrap();
    assert_eq!(r.min_eps, MinEps::Flag(hyseek_core::closeness::Exceeds::Grid));
    let js = serde_json::to_string(&r).unwrap();
    assert!(js.contains("\"min_eps\":\"exceeds grid\""), "{js}");
    let back: ClosenessReport = serde_json::from_str(&js).unwrap();
    assert_eq!(back, r);

    let ok = min_epsilon(&step_pair(1.0), &step_pair(1.0), 3.0, &[0.1, 0.2]).unwrap();
    let js = serde_json::to_string(&ok).unwrap();
    assert!(js.contains("\"min_eps\":0.1"));
    assert_eq!(serde_json::from_str::<ClosenessReport>(&js).unwrap(), ok);
}

#[test]
fn masks_and_errors() {
    let a = arc_from(&[], 1.0, 0.1, 2, |t, _| vec![t, 0.0]);
    let b = arc_from(&[], 1.0, 0.1, 2, |t, _| vec![t, 5.0]);
    assert!(!tau_eps_close(&a, &b, 2.0, 0.5).unwrap());
    assert!(tau_eps_close_masked(&a, &b, 2.0, 1e-6, Some(&[0])).unwrap());
    let c = arc_from(&[], 1.0, 0.1, 1, |t, _| vec![t]);
    assert_eq!(tau_eps_close(&a, &c, 1.0, 0.1), Err(ClosenessError::DimensionMismatch(2, 1)));
    assert_eq!(
        min_epsilon_masked(&a, &b, 1.0, &[0.1], Some(&[4])).unwrap_err(),
        ClosenessError::BadMask(4)
    );
    assert_eq!(min_epsilon(&a, &b, 1.0, &[0.2, 0.1]).unwrap_err(), ClosenessError::BadGrid);
}

#[test]
fn matches_between_samples() {
    // A coarse ramp and a fine one: coarse samples miss the fine sample
    // times but the interpolated segments still match.
    let a = arc_from(&[], 1.0, 0.3, 1, |t, _| vec![t]);
    let b = arc_from(&[], 1.0, 0.001, 1, |t, _| vec![t]);
    assert!(tau_eps_close(&a, &b, 2.0, 1e-6).unwrap());
}

#[test]
fn log_grid_endpoints() {
    let g = log_grid(1e-3, 1.0, 4);
    assert!((g[0] - 1e-3).abs() < 1e-15 && (g[3] - 1.0).abs() < 1e-12);
    assert!(g.windows(2).all(|w| w[1] > w[0]));
}

fn arb_arc() -> impl Strategy<Value = HybridArc> {
    (
        prop::collection::vec(0.1f64..1.0, 0..3),
        0.02f64..0.2,
        -1.0f64..1.0,
        0.5f64..3.0,
    )
        .prop_map(|(gaps, dt, offset, freq)| {
            let mut jumps = Vec::new();
            let mut t = 0.0;
            for g in gaps {
                t += g;
                jumps.push(t);
            }
            arc_from(&jumps, t + 0.5, dt, 2, move |t, j| {
                vec![(freq * t).sin() + offset + j as f64, j as f64 * 0.5 - t]
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric(a in arb_arc(), b in arb_arc(), eps in 0.01f64..3.0, tau in 0.5f64..6.0) {
        prop_assert_eq!(tau_eps_close(&a, &b, tau, eps).unwrap(), tau_eps_close(&b, &a, tau, eps).unwrap());
    }

    #[test]
    fn monotone(a in arb_arc(), b in arb_arc(), eps in 0.01f64..3.0, tau in 0.5f64..6.0, k in 1.0f64..3.0) {
        if tau_eps_close(&a, &b, tau, eps).unwrap() {
            prop_assert!(tau_eps_close(&a, &b, tau, eps * k).unwrap());
            prop_assert!(tau_eps_close(&a, &b, tau / k, eps).unwrap());
        }
    }

    #[test]
    fn reflexive_random(a in arb_arc(), eps in 1e-9f64..1.0) {
        prop_assert!(tau_eps_close(&a, &a, 10.0, eps).unwrap());
    }

    #[test]
    fn refinement_keeps_verdict(shift in 0.0f64..0.3, dt in 0.01f64..0.1, eps in 0.05f64..1.0) {
        let f = |t: f64, _| vec![(2.0 * t).sin()];
        let g = move |t: f64, _| vec![(2.0 * t).sin() + shift];
        let coarse = (arc_from(&[], 3.0, dt, 1, f), arc_from(&[], 3.0, dt, 1, g));
        let fine = (arc_from(&[], 3.0, dt / 2.0, 1, f), arc_from(&[], 3.0, dt / 2.0, 1, g));
        // |d/dt sin 2t| ≤ 2, so one step moves the state by at most 2·dt.
        if eps > 4.0 * dt && tau_eps_close(&coarse.0, &coarse.1, 5.0, eps).unwrap() {
            prop_assert!(tau_eps_close(&fine.0, &fine.1, 5.0, eps).unwrap());
        }
    }
}
