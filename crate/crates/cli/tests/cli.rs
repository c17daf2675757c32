use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use hyseek_cli::arc_csv::{read_arc, write_arc};
use hyseek_core::hybrid::FlowPiece;
use hyseek_core::scenarios::build_scenario;
use hyseek_core::{simulate, HybridArc};
use proptest::prelude::*;

fn hyseek(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_hyseek"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HYSEEK_OUT_DIR")
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr);
    (o.status.code().unwrap(), text)
}

fn round_trip(labels: &[String], arc: &HybridArc) -> HybridArc {
    let mut buf = Vec::new();
    write_arc(&mut buf, labels, arc).unwrap();
    let (back_labels, back) = read_arc(buf.as_slice()).unwrap();
    assert_eq!(back_labels, labels);
    back
}

#[test]
fn exported_arcs_read_back_bit_exactly() {
    for name in ["periodic_reset", "bouncing_seeker", "attack_gradient"] {
        let sc = build_scenario(name, &BTreeMap::new()).unwrap();
        let arc = simulate(&sc.system, &sc.x0, &sc.config).unwrap().arc;
        let back = round_trip(&sc.meta.labels, &arc);
        assert_eq!(back, arc, "{name}");
    }
}

#[test]
fn labels_needing_quotes_survive() {
    let arc = HybridArc::from_pieces(
        2,
        vec![FlowPiece {
            j: 0,
            times: vec![0.0, 1.0],
            states: vec![1.0, 2.0, 3.0, 4.0],
        }],
    )
    .unwrap();
    let labels = vec!["a,b".to_string(), "say \"hi\"".to_string()];
    let mut buf = Vec::new();
    write_arc(&mut buf, &labels, &arc).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with("t,j,\"a,b\",\"say \"\"hi\"\"\""));
    assert_eq!(round_trip(&labels, &arc), arc);
}

proptest! {
    #[test]
    fn any_finite_arc_round_trips(
        vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 6..60),
        split in 1usize..4,
    ) {
        let dim = 2;
        let rows = vals.len() / dim;
        let cut = (rows / split).max(1).min(rows);
        let t: Vec<f64> = (0..rows).map(|k| k as f64 / 7.0).collect();
        let mut pieces = vec![FlowPiece { j: 0, times: t[..cut].to_vec(), states: vals[..cut * dim].to_vec() }];
        if cut < rows {
            // The second piece starts where the first ends.
            let mut times = vec![t[cut - 1]];
            times.extend_from_slice(&t[cut..]);
            let mut states = vals[(cut - 1) * dim..cut * dim].iter().map(|v| -v).collect::<Vec<_>>();
            states.extend_from_slice(&vals[cut * dim..rows * dim]);
            pieces.push(FlowPiece { j: 1, times, states });
        }
        let arc = HybridArc::from_pieces(dim, pieces).unwrap();
        let back = round_trip(&["x".into(), "y".into()], &arc);
        for ((_, _, a), (_, _, b)) in arc.samples().zip(back.samples()) {
            for (p, q) in a.iter().zip(b) {
                prop_assert_eq!(p.to_bits(), q.to_bits());
            }
        }
        prop_assert_eq!(back, arc);
    }
}

#[test]
fn run_writes_duplicated_jump_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = hyseek(&["run", "--scenario", "periodic_reset"], dir.path());
    assert_eq!(code, 0);
    let text = fs::read_to_string(dir.path().join("periodic_reset.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let dup: Vec<_> = rows.windows(2).filter(|w| w[0][0] == w[1][0]).collect();
    assert_eq!(dup.len(), 3);
    for (k, w) in dup.iter().enumerate() {
        assert_eq!(w[0][1], k.to_string());
        assert_eq!(w[1][1], (k + 1).to_string());
        // The reset halves x2 and zeroes the timer.
        let (pre, post): (f64, f64) = (w[0][3].parse().unwrap(), w[1][3].parse().unwrap());
        assert_eq!(post, pre / 2.0);
        assert_eq!(w[1][2].parse::<f64>().unwrap(), 0.0);
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("periodic_reset.json")).unwrap()).unwrap();
    assert_eq!(report["termination"], "HorizonTime");
    assert_eq!(report["jumps"], 3);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let args = ["run", "--scenario", "switched_plant_loop", "--seed", seed, "--set", "param.horizon_units=2"];
        assert_eq!(hyseek(&args, &out).0, 0);
        fs::read(out.join("switched_plant_loop.csv")).unwrap()
    };
    let (a, b, c) = (run("5", "a"), run("5", "b"), run("6", "c"));
    assert!(a == b, "same seed produced different files");
    assert!(a != c, "seed had no effect");
}

#[test]
fn exit_codes_follow_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(hyseek(&["run", "--scenario", "no_such_thing"], out).0, 1);
    assert_eq!(hyseek(&["run"], out).0, 1);
    assert_eq!(hyseek(&["run", "--scenario", "periodic_reset", "--set", "param.gamma=x"], out).0, 1);
    assert_eq!(hyseek(&["run", "--scenario", "periodic_reset", "--set", "solver.h=0"], out).0, 1);
    // A filter box too small to hold the initial state.
    let (code, text) = hyseek(
        &["run", "--scenario", "unknown_constraints", "--set", "param.lambda_xi=1e-9"],
        out,
    );
    assert_eq!(code, 2, "{text}");
    assert!(out.join("unknown_constraints.csv").exists());
    assert_eq!(hyseek(&["compare", "--scenario", "periodic_reset"], out).0, 1);
    let cfg = out.join("empty.cfg");
    fs::write(&cfg, "scenario.name = bouncing_seeker\nsweep.param = omega\nsweep.values = []\n").unwrap();
    assert_eq!(hyseek(&["sweep", "--config", cfg.to_str().unwrap()], out).0, 1);
}

fn summary(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            header.iter().map(str::to_string).zip(rec.iter().map(str::to_string)).collect()
        })
        .collect()
}

#[test]
fn omega_sweep_tightens_closeness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(
        &cfg,
        "scenario.name = bouncing_seeker\n\
         sweep.param = omega\n\
         sweep.values = 10, 100, 1000\n\
         compare.tau = 20\n\
         output.csv = false\n",
    )
    .unwrap();
    let (code, text) = hyseek(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "2"], dir.path());
    assert_eq!(code, 0, "{text}");
    let rows = summary(&dir.path().join("bouncing_seeker_sweep.csv"));
    let eps: Vec<f64> = rows.iter().map(|r| r["min_eps"].parse().unwrap()).collect();
    assert_eq!(eps.len(), 3);
    assert!(eps.windows(2).all(|w| w[1] <= w[0]), "{eps:?}");
    for k in 0..3 {
        assert!(dir.path().join(format!("bouncing_seeker_omega_{k}.json")).exists());
    }
}

#[test]
fn attack_sweep_flags_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = hyseek(
        &[
            "sweep",
            "--scenario",
            "attack_gradient",
            "--set",
            "sweep.param=eta2",
            "--set",
            "sweep.values=0.05,0.45",
        ],
        dir.path(),
    );
    assert_eq!(code, 0, "{text}");
    let rows = summary(&dir.path().join("attack_gradient_sweep.csv"));
    assert_eq!(rows[0]["diverged"], "false");
    assert_eq!(rows[1]["diverged"], "true");
    assert!(rows[0]["terminal_error"].parse::<f64>().unwrap() <= 0.2);
}

#[test]
fn compare_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = hyseek(
        &["compare", "--scenario", "bouncing_seeker", "--set", "param.omega=1000", "--set", "compare.tau=20"],
        dir.path(),
    );
    assert_eq!(code, 0, "{text}");
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bouncing_seeker_compare.json")).unwrap()).unwrap();
    assert_eq!(doc["tau"], 20.0);
    assert!(doc["min_eps"].as_f64().unwrap() <= 0.5);
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hyseek"))
        .args(["run", "--scenario", "periodic_reset"])
        .env("HYSEEK_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("periodic_reset.csv").exists());
}

#[test]
fn list_emits_the_registry_as_json() {
    let o = Command::new(env!("CARGO_BIN_EXE_hyseek"))
        .args(["list", "--json"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 16);
    assert!(v[0]["params"][0]["origin"].is_string());
}
