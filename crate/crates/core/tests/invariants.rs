//! Convergence orders and structural invariants checked against exact
//! solutions.

use std::f64::consts::TAU;

use csflab_core::asymptotics::tip_relations_check;
use csflab_core::critical::{
    detect_critical, distance_profile, zero_monotonicity_check, ZeroField, MULTIPLE_TOL, VERTEX_TOL,
};
use csflab_core::exact::ExactFamily;
use csflab_core::flow::{evolve, EvolveControls, FlowMode, FlowState, StepControls};
use csflab_core::gaussian::{entropy, theta, EntropySearch};
use csflab_core::geometry::{AdaptiveSpacing, DiscreteCurve, SpacingPolicy, Vec2};
use csflab_core::par::Exec;

fn ellipse(a: f64, b: f64, n: usize) -> (DiscreteCurve, Vec<f64>) {
    let s: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
    let pts = s
        .iter()
        .map(|t| Vec2::new(a * t.cos(), b * t.sin()))
        .collect();
    let kappa = s
        .iter()
        .map(|t| a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5))
        .collect();
    (DiscreteCurve::closed(pts).unwrap(), kappa)
}

fn controls(n: usize, dt: f64, frame_interval: f64) -> EvolveControls {
    EvolveControls {
        step: StepControls::uniform(n),
        dt_max: dt,
        frame_interval,
        kappa_cap: 1e4,
    }
}

#[test]
fn circle_curvature_converges_at_second_order() {
    let r = 1.7;
    for n in [64, 128, 256] {
        let c = ExactFamily::circle().sample(-0.5 * r * r, n).unwrap();
        let err = c
            .frame()
            .unwrap()
            .kappa
            .iter()
            .map(|k| (k - 1.0 / r).abs())
            .fold(0.0, f64::max);
        assert!(err * (n * n) as f64 <= 1.0, "n = {n}: {err:e}");
    }
    // non-uniform spacing exercises the grading correction
    let errs: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let (c, exact) = ellipse(2.0, 1.0, n);
            let k = c.frame().unwrap().kappa;
            k.iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] > 3.5, "{errs:?}");
    }
}

#[test]
fn paper_clip_approaches_two_reapers() {
    let t = -10.0;
    let c = ExactFamily::PaperClip.sample(t, 4000).unwrap();
    let mut checked = 0;
    for p in c.points().iter().filter(|p| p.y > 0.0 && p.x.abs() <= 1.0) {
        let y = -t + (2.0 * p.x.cos()).ln();
        assert!((p.y - y).abs() < 1e-3, "{p:?}");
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn exact_families_have_first_order_flow_residual() {
    let cases = [
        (ExactFamily::circle(), -1.0),
        (ExactFamily::PaperClip, -3.0),
        (ExactFamily::grim_reaper(1.3), 0.0),
    ];
    for (fam, t) in cases {
        let r: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
            .iter()
            .map(|&dt| fam.flow_residual(t, dt, 2048).unwrap())
            .collect();
        assert!(r[2] < 1e-2, "{}: {r:?}", fam.name());
        for w in r.windows(2) {
            assert!(w[1] <= 0.6 * w[0] || w[1] < 1e-9, "{}: {r:?}", fam.name());
        }
    }
}

#[test]
fn circle_radius_converges_in_dt() {
    let n = 64;
    let radius = |dt: f64| {
        let traj = evolve(
            &FlowState::physical(ExactFamily::circle().sample(-0.5, n).unwrap(), -0.5),
            0.2,
            &controls(n, dt, 0.2),
        )
        .unwrap();
        let c = &traj.frames.last().unwrap().curve;
        c.points().iter().map(|p| p.norm()).sum::<f64>() / n as f64
    };
    let rs: Vec<f64> = [1e-3, 5e-4, 2.5e-4, 1.25e-4]
        .iter()
        .map(|&dt| radius(dt))
        .collect();
    let exact = (2.0f64 * 0.3).sqrt();
    let (d1, d2) = ((rs[0] - rs[1]).abs(), (rs[1] - rs[2]).abs());
    assert!(d1 >= 1.8 * d2 || d1 < 1e-12, "{rs:?}");
    assert!(
        rs.iter().all(|r| (r - exact).abs() / exact < 1e-3),
        "{rs:?}"
    );
}

#[test]
fn theta_is_monotone_on_a_smooth_flow() {
    let n = 256;
    let pts = (0..n)
        .map(|i| {
            let s = TAU * i as f64 / n as f64;
            let r = 1.0 + 0.08 * (3.0 * s).cos() + 0.03 * (5.0 * s + 1.0).cos();
            Vec2::new(r * s.cos(), r * s.sin())
        })
        .collect();
    let c = DiscreteCurve::closed(pts).unwrap();
    let traj = evolve(&FlowState::physical(c, 0.0), 0.2, &controls(n, 1e-4, 0.005)).unwrap();
    for x0 in [
        Vec2::new(0.9, 0.1),
        Vec2::new(0.0, 0.0),
        Vec2::new(-0.5, 0.6),
    ] {
        let values: Vec<f64> = (1..=40)
            .map(|k| {
                theta(&traj, x0, 0.2, (0.005 * k as f64).sqrt())
                    .unwrap()
                    .value
            })
            .collect();
        let drop = values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
        assert!(drop <= 1e-5, "{x0:?}: {drop:e}");
    }
}

#[test]
fn rescaled_clip_has_one_knuckle_per_sheet_near_the_origin() {
    let pol = SpacingPolicy::Adaptive(AdaptiveSpacing {
        angle_step: 0.05,
        h_min: 1e-5,
        h_max: 0.1,
        ..AdaptiveSpacing::default()
    });
    let taus: Vec<f64> = (0..=10).map(|k| -9.0 + 0.5 * k as f64).collect();
    let traj = ExactFamily::PaperClip
        .trajectory(&taus, FlowMode::Rescaled, &pol)
        .unwrap();
    for f in &traj.frames {
        let r = detect_critical(
            &distance_profile(&f.curve, Vec2::ZERO).unwrap(),
            MULTIPLE_TOL,
        )
        .unwrap();
        let near: Vec<_> = r
            .knuckles
            .iter()
            .filter(|k| k.position.norm() < 2.0)
            .collect();
        assert_eq!(near.len(), 2, "τ = {}", f.time);
        assert!(
            near[0].position.x * near[1].position.x < 0.0,
            "τ = {}",
            f.time
        );
    }
}

#[test]
fn vertex_counts_never_rise_along_the_flow() {
    let n = 256;
    let shapes: [&dyn Fn(f64) -> f64; 3] = [
        &|s| 1.0 + 0.05 * (3.0 * s).cos(),
        &|s| 1.0 + 0.04 * (4.0 * s).cos() + 0.02 * (6.0 * s + 0.5).cos(),
        &|s| 1.0 + 0.06 * (2.0 * s).cos() + 0.015 * (9.0 * s).cos(),
    ];
    for (i, r) in shapes.iter().enumerate() {
        let pts = (0..n)
            .map(|k| {
                let s = TAU * k as f64 / n as f64;
                Vec2::new(r(s) * s.cos(), r(s) * s.sin())
            })
            .collect();
        let c = DiscreteCurve::closed(pts).unwrap();
        let traj = evolve(&FlowState::physical(c, 0.0), 0.2, &controls(n, 1e-4, 0.01)).unwrap();
        let z = zero_monotonicity_check(&traj, &ZeroField::KappaS, VERTEX_TOL, Exec::default())
            .unwrap();
        assert!(z.non_increasing(), "shape {i}: {:?}", z.counts);
        assert!(z.counts[0] >= 4, "shape {i}: {:?}", z.counts);
    }
}

#[test]
fn reaper_tip_relation_residual_halves_with_resolution() {
    let r1: Vec<f64> = [1024, 2048]
        .iter()
        .map(|&n| {
            let c = ExactFamily::grim_reaper(1.45).sample(0.0, n + 1).unwrap();
            tip_relations_check(&c, n / 2, 1.0, 1.3).unwrap().r1
        })
        .collect();
    assert!(r1[0] < 1e-2, "{r1:?}");
    assert!(r1[1] <= 0.55 * r1[0], "{r1:?}");
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let c = ExactFamily::PaperClip
        .sample_rescaled(-3.0, &SpacingPolicy::Uniform { n: 400 })
        .unwrap();
    let seq = entropy(
        &c,
        &EntropySearch {
            exec: Exec::Sequential,
            ..EntropySearch::default()
        },
    )
    .unwrap();
    let par = entropy(
        &c,
        &EntropySearch {
            exec: Exec::Parallel,
            ..EntropySearch::default()
        },
    )
    .unwrap();
    assert_eq!(seq, par);
    assert!(seq.value > 1.0, "{seq:?}");
}
