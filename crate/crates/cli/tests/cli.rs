//! End-to-end runs of the `csflab` binary.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use csflab::config::{Command as Sub, ExactArgs, Family, Mode, RunConfig, SimulateArgs};
use csflab::verify::VerifyOutcome;
use csflab_core::exact::ExactFamily;
use csflab_core::flow::{FlowMode, FlowTrajectory};
use csflab_core::gaussian::monotonicity_report;
use csflab_core::geometry::{AdaptiveSpacing, SpacingPolicy};
use csflab_core::io::{load_curve, read_csv, read_json, read_trajectory, write_trajectory};
use csflab_core::par::Exec;
use proptest::prelude::*;
use tempfile::TempDir;

fn csflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csflab"))
        .args(args)
        .env("CSFLAB_LOG", "error")
        .output()
        .expect("binary runs")
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Exact rescaled paper clip on `τ ∈ [-9, -5]`.
fn clip_trajectory(dir: &TempDir) -> PathBuf {
    let pol = SpacingPolicy::Adaptive(AdaptiveSpacing {
        angle_step: 0.02,
        h_min: 1e-5,
        h_max: 0.05,
        ..AdaptiveSpacing::default()
    });
    let taus: Vec<f64> = (0..=16).map(|k| -9.0 + 0.25 * k as f64).collect();
    let traj = ExactFamily::PaperClip
        .trajectory(&taus, FlowMode::Rescaled, &pol)
        .unwrap();
    let p = path(dir, "clip.jsonl");
    write_trajectory(&p, &traj, None).unwrap();
    p
}

#[test]
fn exact_circle_has_unit_radius() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "c.json");
    let o = csflab(&[
        "exact",
        "--family",
        "circle",
        "--time",
        "-0.5",
        "--n",
        "256",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1);
    let c = load_curve(&out).unwrap();
    assert_eq!(c.len(), 256);
    assert!(c.is_closed());
    assert!(c.points().iter().all(|p| (p.norm() - 1.0).abs() < 1e-12));
}

#[test]
fn oversized_time_step_is_rejected() {
    let dir = TempDir::new().unwrap();
    let c = path(&dir, "c.json");
    csflab(&[
        "exact",
        "--family",
        "circle",
        "--time",
        "-0.5",
        "--n",
        "128",
        "--out",
        s(&c),
    ]);
    let t = path(&dir, "t.jsonl");
    let o = csflab(&[
        "simulate",
        "--in",
        s(&c),
        "--horizon",
        "0.1",
        "--n",
        "128",
        "--dt",
        "0.05",
        "--max-halvings",
        "2",
        "--out",
        s(&t),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("StepRejected"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "c.json");
    for args in [
        vec![
            "exact",
            "--family",
            "circle",
            "--time",
            "-0.5",
            "--bogus",
            "--out",
            s(&out),
        ],
        vec![
            "exact",
            "--family",
            "hexagon",
            "--time",
            "-0.5",
            "--out",
            s(&out),
        ],
        vec!["teleport"],
        vec![],
        vec!["verify", "--suite", "0"],
        vec![
            "simulate",
            "--in",
            s(&out),
            "--horizon",
            "0",
            "--out",
            s(&out),
        ],
        vec![
            "exact",
            "--family",
            "circle",
            "--time",
            "-0.5",
            "--out",
            "/nonexistent/dir/c.json",
        ],
    ] {
        let o = csflab(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn module_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "c.json");
    let o = csflab(&[
        "exact",
        "--family",
        "circle",
        "--time",
        "0.5",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("OutOfDomain"), "{}", stderr(&o));
    let o = csflab(&["entropy", "--in", s(&path(&dir, "missing.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_rescale_and_export() {
    let dir = TempDir::new().unwrap();
    let c = path(&dir, "clip.json");
    let o = csflab(&[
        "exact",
        "--family",
        "paper-clip",
        "--time",
        "-3",
        "--n",
        "400",
        "--out",
        s(&c),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = path(&dir, "t.jsonl");
    let o = csflab(&[
        "simulate",
        "--in",
        s(&c),
        "--horizon",
        "0.5",
        "--n",
        "400",
        "--frame-interval",
        "0.1",
        "--out",
        s(&t),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = path(&dir, "r.jsonl");
    assert_eq!(
        csflab(&["rescale", "--traj", s(&t), "--out", s(&r)])
            .status
            .code(),
        Some(0)
    );

    let (header, traj) = read_trajectory(&r).unwrap();
    assert_eq!(header.frames, 6);
    assert_eq!(traj.mode(), Some(FlowMode::Rescaled));
    assert!((traj.start() + 3f64.ln()).abs() < 1e-12);

    let csv = path(&dir, "f.csv");
    assert_eq!(
        csflab(&["export", "--traj", s(&r), "--out", s(&csv)])
            .status
            .code(),
        Some(0)
    );
    let table = read_csv(&csv).unwrap();
    assert_eq!(table.header, ["tau", "F"]);
    let rep = monotonicity_report(&traj, Exec::Sequential).unwrap();
    assert_eq!(table.column("tau").unwrap(), rep.taus);
    assert_eq!(table.column("F").unwrap(), rep.values);
}

#[test]
fn empty_trajectory_exports_header_only() {
    let dir = TempDir::new().unwrap();
    let t = path(&dir, "empty.jsonl");
    write_trajectory(&t, &FlowTrajectory::from_frames(Vec::new()).unwrap(), None).unwrap();
    let csv = path(&dir, "f.csv");
    let o = csflab(&[
        "export",
        "--traj",
        s(&t),
        "--format",
        "csv",
        "--out",
        s(&csv),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), "tau,F\n");
}

#[test]
fn verify_report_round_trips_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    for p in [&a, &b] {
        let o = csflab(&["verify", "--suite", "11,14", "--seed", "3", "--out", s(p)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let stdout = String::from_utf8_lossy(&o.stdout).into_owned();
        assert_eq!(
            stdout
                .lines()
                .filter(|l| l.starts_with("criterion"))
                .count(),
            2,
            "{stdout}"
        );
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let rep: VerifyOutcome = read_json(&a).unwrap();
    assert_eq!(rep.seed, 3);
    assert!(rep.pass);
    assert_eq!(rep.exit_code, 0);
    let again = path(&dir, "again.json");
    let o = csflab(&[
        "export",
        "--report",
        s(&a),
        "--format",
        "json",
        "--out",
        s(&again),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(read_json::<VerifyOutcome>(&again).unwrap(), rep);

    let csv = path(&dir, "rep.csv");
    assert_eq!(
        csflab(&["export", "--report", s(&a), "--out", s(&csv)])
            .status
            .code(),
        Some(0)
    );
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("id,criterion,check,measured,expected,tolerance,pass\n"));
    let checks: usize = rep.criteria.iter().map(|c| c.checks.len()).sum();
    assert_eq!(text.lines().count(), checks + 1);
}

#[test]
fn saved_config_replays_byte_identically() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.json");
    let out = path(&dir, "clip.json");
    let o = csflab(&[
        "--save-config",
        s(&cfg),
        "exact",
        "--family",
        "paper-clip",
        "--time",
        "-2",
        "--rescaled",
        "--n",
        "300",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let first = std::fs::read(&out).unwrap();
    std::fs::remove_file(&out).unwrap();
    let o = csflab(&["--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read(&out).unwrap(), first);
    let loaded: RunConfig = read_json(&cfg).unwrap();
    assert!(matches!(
        loaded.command,
        Sub::Exact(ExactArgs {
            family: Family::PaperClip,
            rescaled: true,
            ..
        })
    ));
}

#[test]
fn spectral_table_feeds_the_decay_fit() {
    let dir = TempDir::new().unwrap();
    let traj = clip_trajectory(&dir);
    let table = path(&dir, "spectral.csv");
    let angle = format!("{}", -FRAC_PI_2);
    let o = csflab(&[
        "spectral",
        "--traj",
        s(&traj),
        "--r",
        "4",
        "--angle",
        &angle,
        "--out",
        s(&table),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = read_csv(&table).unwrap();
    assert_eq!(
        t.header,
        [
            "tau",
            "sheet",
            "a",
            "b",
            "stable_norm",
            "grad_norm",
            "c2_norm",
            "c2_radius"
        ]
    );
    assert_eq!(t.rows.len(), 17 * 2);

    let fit = path(&dir, "fit.json");
    let o = csflab(&["decay", "--in", s(&table), "--R", "3", "--out", s(&fit)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let fit: csflab_core::spectral::DecayFit = read_json(&fit).unwrap();
    assert!(fit.rate > 0.0 && fit.r2 > 0.95, "{fit:?}");

    let o = csflab(&["decay", "--in", s(&table), "--R", "2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn diagnose_and_verify_tables() {
    let dir = TempDir::new().unwrap();
    let traj = clip_trajectory(&dir);
    let (report, counts) = (path(&dir, "d.json"), path(&dir, "d.csv"));
    let o = csflab(&[
        "diagnose",
        "--traj",
        s(&traj),
        "--x0",
        "0,0",
        "--out",
        s(&report),
        "--csv",
        s(&counts),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let t = read_csv(&counts).unwrap();
    assert_eq!(
        t.header,
        [
            "tau",
            "knuckles",
            "tips",
            "sharp",
            "flat",
            "inflections",
            "bumpy"
        ]
    );
    assert_eq!(t.rows.len(), 17);
    for row in &t.rows {
        assert_eq!(&row[1..], &[2.0, 2.0, 2.0, 2.0, 0.0, 1.0]);
    }
    assert!(!std::fs::read_to_string(&report).unwrap().contains("NaN"));

    let vertex = path(&dir, "v.csv");
    let o = csflab(&["verify", "vertex", "--traj", s(&traj), "--out", s(&vertex)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = read_csv(&vertex).unwrap();
    assert_eq!(v.header, ["tau", "path", "chi", "c2_distance"]);
    assert_eq!(v.rows.len(), 2 * 17);
    assert!(v
        .column("chi")
        .unwrap()
        .iter()
        .all(|c| c.abs() >= std::f64::consts::FRAC_1_SQRT_2));

    let radius = path(&dir, "r.csv");
    let angle = format!("{}", -FRAC_PI_2);
    let o = csflab(&[
        "verify",
        "radius",
        "--traj",
        s(&traj),
        "--eps",
        "0.05",
        "--angle",
        &angle,
        "--out",
        s(&radius),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_csv(&radius).unwrap();
    assert_eq!(r.header, ["tau", "rho", "rho_hat", "bounds_hold"]);
    assert!(r.column("bounds_hold").unwrap().iter().all(|b| *b == 1.0));
}

#[test]
fn density_and_entropy_summaries() {
    let dir = TempDir::new().unwrap();
    let c = path(&dir, "c.json");
    csflab(&[
        "exact",
        "--family",
        "circle",
        "--time",
        "-0.5",
        "--n",
        "256",
        "--out",
        s(&c),
    ]);
    let rep = path(&dir, "e.json");
    let o = csflab(&["entropy", "--in", s(&c), "--out", s(&rep)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let e: csflab_core::gaussian::DensityReport = read_json(&rep).unwrap();
    assert!((e.value - (2.0 * std::f64::consts::PI / std::f64::consts::E).sqrt()).abs() < 5e-3);

    let t = path(&dir, "t.jsonl");
    let o = csflab(&[
        "simulate",
        "--in",
        s(&c),
        "--horizon",
        "0.2",
        "--n",
        "256",
        "--frame-interval",
        "0.01",
        "--out",
        s(&t),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = csflab(&[
        "density",
        "--traj",
        s(&t),
        "--x0",
        "-0.5,0.3",
        "--t0",
        "-0.3",
        "--r",
        "0.3",
        "--localized",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("density: ThetaLocalized"));
}

fn simulate_config() -> impl Strategy<Value = RunConfig> {
    (
        any::<u64>(),
        prop::option::of(1usize..64),
        -1e3..0.0f64,
        1e-6..1.0f64,
        1e-9..1e-2f64,
        any::<bool>(),
    )
        .prop_map(|(seed, threads, start, horizon, dt, adaptive)| RunConfig {
            seed,
            threads,
            command: Sub::Simulate(SimulateArgs {
                input: "in.json".into(),
                mode: if adaptive {
                    Mode::Rescaled
                } else {
                    Mode::Physical
                },
                horizon,
                start: Some(start),
                n: 512,
                adaptive,
                angle_step: horizon / 7.0,
                dt,
                frame_interval: horizon / 3.0,
                cfl: 0.25,
                max_halvings: 20,
                remesh_every: 1,
                kappa_cap: 1e4,
                out: "out.jsonl".into(),
            }),
        })
}

proptest! {
    #[test]
    fn run_config_round_trips_bit_exactly(cfg in simulate_config()) {
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        if let (Sub::Simulate(a), Sub::Simulate(b)) = (&cfg.command, &back.command) {
            prop_assert_eq!(a.dt.to_bits(), b.dt.to_bits());
            prop_assert_eq!(a.angle_step.to_bits(), b.angle_step.to_bits());
        }
    }
}
