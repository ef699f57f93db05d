//! Property tests for the geometric, density and spectral invariants.

use std::f64::consts::{PI, TAU};

use csflab_core::asymptotics::grim_fit;
use csflab_core::critical::{detect_critical, distance_profile, PointKind, MULTIPLE_TOL};
use csflab_core::exact::ExactFamily;
use csflab_core::flow::{
    evolve, step, EvolveControls, FlowMode, FlowState, FlowTrajectory, StepControls,
};
use csflab_core::gaussian::{entropy, gaussian_length, theta, theta_localized, EntropySearch};
use csflab_core::geometry::{
    hausdorff, resample, turning_angle, DiscreteCurve, SpacingPolicy, Vec2,
};
use csflab_core::io::{read_csv_from, write_csv_to, Cell};
use csflab_core::spectral::{norm_h, project_sampled, Grid};
use proptest::prelude::*;

fn ellipse(a: f64, b: f64, rot: f64, center: Vec2, n: usize) -> DiscreteCurve {
    let pts = (0..n)
        .map(|i| {
            let s = TAU * i as f64 / n as f64;
            center + Vec2::new(a * s.cos(), b * s.sin()).rotate(rot)
        })
        .collect();
    DiscreteCurve::closed(pts).unwrap()
}

/// `r(θ) = 1 + Σ c_k cos(kθ + φ_k)`, star-shaped about the origin.
fn wobbly(coefs: &[(f64, f64)], n: usize) -> DiscreteCurve {
    let pts = (0..n)
        .map(|i| {
            let s = TAU * i as f64 / n as f64;
            let r = 1.0
                + coefs
                    .iter()
                    .enumerate()
                    .map(|(k, (c, ph))| c * ((k + 2) as f64 * s + ph).cos())
                    .sum::<f64>();
            Vec2::new(r * s.cos(), r * s.sin())
        })
        .collect();
    DiscreteCurve::closed(pts).unwrap()
}

fn ellipse_strategy() -> impl Strategy<Value = DiscreteCurve> {
    (
        0.5..2.0f64,
        0.5..2.0f64,
        -PI..PI,
        -1.0..1.0f64,
        -1.0..1.0f64,
        64usize..256,
    )
        .prop_map(|(a, b, rot, cx, cy, n)| ellipse(a, b, rot, Vec2::new(cx, cy), n))
}

fn wobbly_strategy() -> impl Strategy<Value = DiscreteCurve> {
    (
        prop::collection::vec((0.0..0.06f64, -PI..PI), 1..4),
        128usize..320,
    )
        .prop_map(|(c, n)| wobbly(&c, n))
}

fn rigid(c: &DiscreteCurve, angle: f64, shift: Vec2) -> DiscreteCurve {
    c.map_points(|p| p.rotate(angle) + shift).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normals_are_rotated_tangents(c in ellipse_strategy()) {
        let f = c.frame().unwrap();
        for (t, n) in f.tangents.iter().zip(&f.normals) {
            prop_assert_eq!(*n, t.perp());
        }
    }

    #[test]
    fn convex_curves_turn_once(c in ellipse_strategy(), i in 0usize..64) {
        prop_assert!((turning_angle(&c, i, i) - TAU).abs() < 1e-10);
    }

    #[test]
    fn uniform_resampling_is_idempotent(a in 0.5..2.0f64, b in 0.5..2.0f64, rot in -PI..PI, raw in 64usize..256) {
        // resolved meshes only: at most 0.08 rad of turning per edge
        let kmax = a.max(b) / a.min(b).powi(2);
        let length = PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt());
        let n = raw.max((kmax * length / 0.08).ceil() as usize);
        let c = ellipse(a, b, rot, Vec2::ZERO, n);
        let once = resample(&c, n).unwrap();
        let twice = resample(&once, n).unwrap();
        prop_assert!(hausdorff(&once, &twice) < 1e-8);
    }

    #[test]
    fn gaussian_length_is_rotation_invariant(
        c in ellipse_strategy(),
        x0 in (-1.0..1.0f64, -1.0..1.0f64),
        lambda in 0.05..4.0f64,
        angle in -PI..PI,
    ) {
        let x0 = Vec2::new(x0.0, x0.1);
        let rotated = c.map_points(|p| x0 + (p - x0).rotate(angle)).unwrap();
        let (a, b) = (gaussian_length(&c, x0, lambda), gaussian_length(&rotated, x0, lambda));
        prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn tips_and_knuckles_alternate(c in wobbly_strategy(), x0 in (-0.05..0.05f64, -0.05..0.05f64)) {
        let r = detect_critical(&distance_profile(&c, Vec2::new(x0.0, x0.1)).unwrap(), MULTIPLE_TOL).unwrap();
        prop_assert_eq!(r.tips.len(), r.knuckles.len());
        let mut all: Vec<_> = r.tips.iter().chain(&r.knuckles).collect();
        all.sort_by(|a, b| a.arc.total_cmp(&b.arc));
        for w in all.windows(2) {
            prop_assert_ne!(w[0].kind, w[1].kind);
        }
        if let (Some(first), Some(last)) = (all.first(), all.last()) {
            prop_assert!(all.len() < 2 || first.kind != last.kind);
        }
    }

    #[test]
    fn critical_points_commute_with_rigid_motions(
        c in wobbly_strategy(),
        angle in -PI..PI,
        shift in (-3.0..3.0f64, -3.0..3.0f64),
    ) {
        let shift = Vec2::new(shift.0, shift.1);
        let x0 = Vec2::new(0.02, -0.01);
        let a = detect_critical(&distance_profile(&c, x0).unwrap(), MULTIPLE_TOL).unwrap();
        let moved = rigid(&c, angle, shift);
        let b = detect_critical(&distance_profile(&moved, x0.rotate(angle) + shift).unwrap(), MULTIPLE_TOL).unwrap();
        let idx = |v: &[csflab_core::critical::CriticalPoint]| v.iter().map(|p| p.index).collect::<Vec<_>>();
        prop_assert_eq!(idx(&a.tips), idx(&b.tips));
        prop_assert_eq!(idx(&a.knuckles), idx(&b.knuckles));
    }

    #[test]
    fn paper_clip_is_convex(t in -20.0..-0.05f64) {
        let c = ExactFamily::PaperClip.sample(t, 400).unwrap();
        let f = c.frame().unwrap();
        prop_assert!(f.kappa.iter().all(|k| *k > 0.0));
    }

    #[test]
    fn reaper_tip_moves_by_time(t in -50.0..50.0f64) {
        let f = ExactFamily::grim_reaper(1.3);
        let (a, b) = (f.sample(0.0, 101).unwrap(), f.sample(t, 101).unwrap());
        prop_assert_eq!(b.point(50) - a.point(50), Vec2::new(0.0, t));
    }

    #[test]
    fn parseval_split(coef in prop::collection::vec(-1.0..1.0f64, 7), width in 1.0..6.0f64) {
        let g = Grid::default();
        let f = g.sample(|y| {
            let x = y / width;
            coef.iter().rev().fold(0.0, |acc, c| acc * x + c) * (-x * x).exp()
        });
        let p = project_sampled(&f).unwrap();
        let split = p.a * p.a + p.b * p.b + p.stable_norm * p.stable_norm;
        prop_assert!((split - norm_h(&f).powi(2)).abs() < 1e-8);
    }

    #[test]
    fn csv_floats_round_trip(xs in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..20)) {
        let rows: Vec<Vec<Cell>> = xs.iter().map(|x| vec![Cell::Num(*x)]).collect();
        let mut buf = Vec::new();
        write_csv_to(&mut buf, &["x"], &rows).unwrap();
        let back = read_csv_from(&buf[..]).unwrap().column("x").unwrap();
        prop_assert_eq!(back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn entropy_dominates_probes(
        c in ellipse_strategy(),
        probes in prop::collection::vec((-1.5..1.5f64, -1.5..1.5f64, 0.05..5.0f64), 8),
    ) {
        let e = entropy(&c, &EntropySearch { grid: 11, ..EntropySearch::default() }).unwrap().value;
        for (x, y, lambda) in probes {
            prop_assert!(e >= gaussian_length(&c, Vec2::new(x, y), lambda) - 1e-12);
        }
    }

    #[test]
    fn step_commutes_with_rotation(c in wobbly_strategy(), angle in -PI..PI) {
        let ctl = StepControls::uniform(c.len());
        let a = step(&FlowState::physical(c.clone(), 0.0), 1e-4, &ctl).unwrap();
        let b = step(&FlowState::physical(c.rotated(angle), 0.0), 1e-4, &ctl).unwrap();
        prop_assert!((a.time - b.time).abs() < 1e-10);
        for (p, q) in a.curve.points().iter().zip(b.curve.points()) {
            prop_assert!((p.rotate(angle) - *q).norm() < 1e-10);
        }
    }

    #[test]
    fn length_decreases_along_the_flow(c in wobbly_strategy()) {
        let controls = EvolveControls {
            step: StepControls::uniform(c.len()),
            dt_max: 1e-3,
            frame_interval: 0.01,
            kappa_cap: 1e4,
        };
        let traj = evolve(&FlowState::physical(c, 0.0), 0.05, &controls).unwrap();
        let lengths: Vec<f64> = traj.frames.iter().map(|f| f.curve.length()).collect();
        prop_assert!(lengths.windows(2).all(|w| w[1] < w[0]), "{:?}", lengths);
    }

    #[test]
    fn localized_density_is_enveloped(
        x in (-1.0..1.0f64, -1.0..1.0f64),
        tbar in -0.6..-0.3f64,
        sigma in 0.1..0.5f64,
        radius in 0.5..3.0f64,
    ) {
        let times: Vec<f64> = (0..=40).map(|k| -1.0 + 0.02 * k as f64).collect();
        let traj = ExactFamily::circle().trajectory(&times, FlowMode::Physical, &SpacingPolicy::Uniform { n: 256 }).unwrap();
        let xbar = Vec2::new(x.0, x.1);
        let loc = theta_localized(&traj, xbar, tbar, radius, sigma).unwrap().value;
        let plain = theta(&traj, xbar, tbar, sigma).unwrap().value;
        let envelope = (1.0 + 2.0 * sigma * sigma / (radius * radius)).powi(3);
        prop_assert!(loc <= envelope * plain + 1e-12, "{} > {} · {}", loc, envelope, plain);
    }

    #[test]
    fn grim_fit_is_equivariant(angle in -PI..PI, shift in (-5.0..5.0f64, -5.0..5.0f64), lambda in 0.5..2.0f64) {
        let times = [-8.3, -8.1, -8.0];
        let traj = ExactFamily::PaperClip
            .trajectory(&times, FlowMode::Physical, &SpacingPolicy::Uniform { n: 1200 })
            .unwrap();
        let moved = FlowTrajectory::from_frames(
            traj.frames
                .iter()
                .map(|f| {
                    let c = f.curve.map_points(|p| (p.rotate(angle) + Vec2::new(shift.0, shift.1)) * lambda).unwrap();
                    FlowState::physical(c, f.time * lambda * lambda)
                })
                .collect(),
        )
        .unwrap();
        let last = traj.frames.len() - 1;
        let curve = &traj.frames[last].curve;
        let f = curve.frame().unwrap();
        let top = csflab_core::critical::detect_kind(curve, PointKind::SharpVertex, Vec2::ZERO)
            .unwrap()
            .into_iter()
            .max_by(|a, b| a.position.y.total_cmp(&b.position.y))
            .unwrap();
        let scale = 1.0 / f.kappa[top.index].abs();
        let a = grim_fit(&traj, last, top.arc, scale, 1.0).unwrap();
        let b = grim_fit(&moved, last, lambda * top.arc, lambda * scale, 1.0).unwrap();
        prop_assert!((a.c2_distance - b.c2_distance).abs() < 1e-8, "{} vs {}", a.c2_distance, b.c2_distance);
    }
}
