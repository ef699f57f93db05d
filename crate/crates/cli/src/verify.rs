//! Acceptance suite.
//!
//! Each criterion is self-contained and returns a list of checks. The
//! simulated rescaled paper clip is shared by the criteria that need it and
//! computed once on first use.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, SQRT_2};
use std::sync::OnceLock;
use std::time::Instant;

use csflab_core::asymptotics::{
    graphical_radius, grim_fit_curve, tip_relations_check, vertex_ode_check,
};
use csflab_core::critical::{
    count_zeros, detect_critical, detect_vertices, distance_profile, finger_region_area,
    interpolate_field, track_paths, zero_monotonicity_check, Boundary, PointKind, ZeroField,
    VERTEX_TOL,
};
use csflab_core::exact::ExactFamily;
use csflab_core::flow::{
    evolve, step, EvolveControls, FlowMode, FlowState, FlowTrajectory, StepControls,
};
use csflab_core::gaussian::{
    entropy, monotonicity_report, sandwich_check, theta, theta_localized, EntropySearch,
};
use csflab_core::geometry::{
    hausdorff, self_intersects, turning_angle, AdaptiveSpacing, DiscreteCurve, SpacingPolicy, Vec2,
};
use csflab_core::par::{self, Exec};
use csflab_core::spectral::{
    cutoff_eta, decay_fit, extract_sheets, inner_h, l_apply, norm_h, phi1, phi2, phi3, project,
    project_sampled, Grid, Sampled, SheetProfile,
};
use csflab_core::{CsfError, Result};
use log::info;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    #[serde(with = "nonfinite")]
    pub measured: f64,
    /// Human-readable expectation, e.g. `< 0.001` or `= 2 ± 0.05`.
    pub expected: String,
    pub tolerance: f64,
    pub pass: bool,
}

/// JSON has no NaN or infinities: those are written as the strings `"nan"`,
/// `"inf"` and `"-inf"`.
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&csflab_core::io::fmt_f64(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(serde::de::Error::custom(format!("not a number: {t:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub pass: bool,
}

impl CriterionResult {
    /// One line: id, verdict, name and the failing checks if any.
    pub fn summary_line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let mut line = format!("criterion {:>2} {verdict} {}", self.id, self.name);
        if let Some(e) = &self.error {
            line.push_str(&format!(": error: {e}"));
        }
        let failing: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} = {:.6e}, expected {}", c.label, c.measured, c.expected))
            .collect();
        if !failing.is_empty() {
            line.push_str(&format!(": {}", failing.join("; ")));
        }
        line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub pass: bool,
    pub exit_code: i32,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, label: &str, measured: f64, expected: String, tolerance: f64, pass: bool) {
        self.0.push(Check {
            label: label.into(),
            measured,
            expected,
            tolerance,
            pass,
        });
    }

    fn within(&mut self, label: &str, measured: f64, target: f64, tol: f64) {
        let pass = (measured - target).abs() <= tol;
        self.push(label, measured, format!("= {target} ± {tol:e}"), tol, pass);
    }

    fn below(&mut self, label: &str, measured: f64, bound: f64) {
        self.push(
            label,
            measured,
            format!("< {bound:e}"),
            bound,
            measured < bound,
        );
    }

    fn at_most(&mut self, label: &str, measured: f64, bound: f64) {
        self.push(
            label,
            measured,
            format!("≤ {bound:e}"),
            bound,
            measured <= bound,
        );
    }

    fn at_least(&mut self, label: &str, measured: f64, bound: f64) {
        self.push(
            label,
            measured,
            format!("≥ {bound}"),
            0.0,
            measured >= bound,
        );
    }

    fn equals(&mut self, label: &str, measured: usize, target: usize) {
        self.push(
            label,
            measured as f64,
            format!("= {target}"),
            0.0,
            measured == target,
        );
    }

    fn holds(&mut self, label: &str, measured: f64, expected: &str, pass: bool) {
        self.push(label, measured, expected.into(), 0.0, pass);
    }
}

type CriterionFn = fn(&Suite) -> Result<Checks>;

const CRITERIA: [(u32, &str, CriterionFn); 14] = [
    (1, "exact-flow reproduction", c01_exact_flow),
    (2, "entropy values", c02_entropy),
    (3, "monotonicity", c03_monotonicity),
    (4, "critical-point counts", c04_counting),
    (5, "vertex curvature bounds", c05_vertex_curvature),
    (6, "grim-reaper asymptotics", c06_grim_reaper),
    (7, "knuckle angle difference", c07_angle),
    (8, "finger area", c08_finger_area),
    (9, "zero-count monotonicity", c09_sturm),
    (10, "graphical radius", c10_graphical_radius),
    (11, "spectral identities", c11_spectral),
    (12, "sheet decay", c12_decay),
    (13, "localized density", c13_localized),
    (14, "negative controls", c14_negative),
];

pub fn criterion_ids() -> Vec<u32> {
    CRITERIA.iter().map(|c| c.0).collect()
}

pub fn criterion_name(id: u32) -> Option<&'static str> {
    CRITERIA.iter().find(|c| c.0 == id).map(|c| c.1)
}

/// Window of the simulated rescaled paper clip.
pub const CLIP_TAU_START: f64 = -8.0;
pub const CLIP_TAU_END: f64 = -4.0;

/// Spacing used for the long rescaled paper-clip runs.
pub fn clip_spacing() -> SpacingPolicy {
    SpacingPolicy::Adaptive(AdaptiveSpacing {
        angle_step: 0.15,
        h_min: 1e-4,
        h_max: 0.5,
        grading: 0.2,
        focus: None,
    })
}

pub fn clip_controls() -> EvolveControls {
    let spacing = clip_spacing();
    EvolveControls {
        step: StepControls {
            spacing,
            remesh_every: 50,
            intersect_every: 50,
            ..StepControls::uniform(0)
        },
        dt_max: 1e-3,
        frame_interval: 0.25,
        kappa_cap: 1e4,
    }
}

/// Rescaled paper clip evolved numerically from its exact shape at
/// `CLIP_TAU_START` to `CLIP_TAU_END`.
pub fn simulate_clip() -> Result<FlowTrajectory> {
    let c0 = ExactFamily::PaperClip.sample_rescaled(CLIP_TAU_START, &clip_spacing())?;
    evolve(
        &FlowState::rescaled(c0, CLIP_TAU_START),
        CLIP_TAU_END - CLIP_TAU_START,
        &clip_controls(),
    )
}

pub struct Suite {
    pub seed: u64,
    pub exec: Exec,
    clip: OnceLock<std::result::Result<FlowTrajectory, CsfError>>,
}

impl Suite {
    pub fn new(seed: u64, exec: Exec) -> Self {
        Suite {
            seed,
            exec,
            clip: OnceLock::new(),
        }
    }

    fn clip(&self) -> Result<&FlowTrajectory> {
        self.clip
            .get_or_init(|| {
                info!("simulating the rescaled paper clip on [{CLIP_TAU_START}, {CLIP_TAU_END}]");
                let t = Instant::now();
                let r = simulate_clip();
                info!(
                    "paper-clip simulation took {:.1}s",
                    t.elapsed().as_secs_f64()
                );
                r
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn run_one(&self, id: u32) -> CriterionResult {
        let (_, name, f) = CRITERIA.iter().find(|c| c.0 == id).copied().unwrap_or((
            id,
            "unknown criterion",
            |_| Err(CsfError::InvalidInput("no such criterion".into())),
        ));
        let start = Instant::now();
        info!("criterion {id}: {name}");
        let (checks, error) = match f(self) {
            Ok(c) => (c.0, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        let pass = error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.pass);
        info!(
            "criterion {id} finished in {:.1}s",
            start.elapsed().as_secs_f64()
        );
        CriterionResult {
            id,
            name: name.into(),
            checks,
            error,
            pass,
        }
    }

    /// Runs the given criteria (in parallel when allowed) in id order.
    pub fn run(&self, ids: &[u32]) -> VerifyOutcome {
        let criteria: Vec<CriterionResult> = par::map(self.exec, ids, |&id| self.run_one(id));
        let pass = !criteria.is_empty() && criteria.iter().all(|c| c.pass);
        VerifyOutcome {
            seed: self.seed,
            criteria,
            pass,
            exit_code: if pass { 0 } else { 1 },
        }
    }
}

fn frames_up_to(traj: &FlowTrajectory, tau_max: f64) -> impl Iterator<Item = (usize, &FlowState)> {
    traj.frames
        .iter()
        .enumerate()
        .filter(move |(_, f)| f.time <= tau_max + 1e-9)
}

fn fine_spacing(angle_step: f64, h_max: f64) -> SpacingPolicy {
    SpacingPolicy::Adaptive(AdaptiveSpacing {
        angle_step,
        h_min: 1e-5,
        h_max,
        grading: 0.2,
        focus: None,
    })
}

fn c01_exact_flow(_: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let n = 512;
    let controls = EvolveControls {
        step: StepControls::uniform(n),
        dt_max: 1e-4,
        frame_interval: 0.05,
        kappa_cap: 1e4,
    };
    let circle = ExactFamily::circle();
    let traj = evolve(
        &FlowState::physical(circle.sample(-0.5, n)?, -0.5),
        0.45,
        &controls,
    )?;
    let err = traj
        .frames
        .iter()
        .flat_map(|f| {
            let r = (-2.0 * f.time).sqrt();
            f.curve
                .points()
                .iter()
                .map(move |p| (p.norm() - r).abs() / r)
        })
        .fold(0.0, f64::max);
    out.holds(
        "circle run reaches t = -0.05",
        traj.end(),
        "= -0.05",
        (traj.end() + 0.05).abs() < 1e-12,
    );
    out.below("circle max relative radius error", err, 1e-3);

    let clip = ExactFamily::PaperClip;
    let traj = evolve(
        &FlowState::physical(clip.sample(-5.0, n)?, -5.0),
        1.0,
        &controls,
    )?;
    let last = traj.frames.last().expect("evolve records frames");
    let exact = clip.sample(last.time, 8192)?;
    out.holds(
        "paper clip run reaches t = -4",
        last.time,
        "= -4",
        (last.time + 4.0).abs() < 1e-12,
    );
    out.below(
        "paper clip Hausdorff distance at t = -4",
        hausdorff(&last.curve, &exact),
        5e-3,
    );
    Ok(out)
}

fn c02_entropy(s: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let search = EntropySearch {
        exec: s.exec,
        ..EntropySearch::default()
    };
    let line = ExactFamily::Line {
        angle: 0.3,
        offset: 0.5,
        half_length: 100.0,
    }
    .sample(0.0, 401)?;
    out.within(
        "entropy of a long line",
        entropy(&line, &search)?.value,
        1.0,
        1e-2,
    );
    let circle = ExactFamily::circle().sample(-1.0, 512)?;
    out.within(
        "entropy of a circle",
        entropy(&circle, &search)?.value,
        (2.0 * PI / std::f64::consts::E).sqrt(),
        5e-3,
    );
    let clip = ExactFamily::PaperClip.sample_rescaled(-8.0, &fine_spacing(0.05, 0.25))?;
    out.within(
        "entropy of the rescaled paper clip at τ = -8",
        entropy(&clip, &search)?.value,
        2.0,
        5e-2,
    );
    Ok(out)
}

fn c03_monotonicity(s: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let clip = s.clip()?;
    let rep = monotonicity_report(clip, s.exec)?;
    out.at_most(
        "largest increase of F along the simulated paper clip",
        rep.max_jump,
        1e-4,
    );

    let t0 = -0.5;
    let dt = 0.02;
    let times: Vec<f64> = (0..=75).rev().map(|k| t0 - dt * k as f64).collect();
    let traj = ExactFamily::circle().trajectory(
        &times,
        FlowMode::Physical,
        &SpacingPolicy::Uniform { n: 1024 },
    )?;
    let x0 = Vec2::new(0.5, 0.0);
    let values: Vec<f64> = (1..=75)
        .map(|k| theta(&traj, x0, t0, (dt * k as f64).sqrt()).map(|d| d.value))
        .collect::<Result<_>>()?;
    let drop = values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    out.at_most(
        "largest decrease of Θ(r) on the shrinking circle",
        drop,
        1e-5,
    );
    Ok(out)
}

fn c04_counting(s: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let clip = s.clip()?;
    let mut bad = [0usize; 5];
    let mut frames = 0;
    for (_, f) in frames_up_to(clip, -5.0) {
        frames += 1;
        let crit = detect_critical(
            &distance_profile(&f.curve, Vec2::ZERO)?,
            csflab_core::critical::MULTIPLE_TOL,
        )?;
        let v = detect_vertices(&f.curve, VERTEX_TOL)?;
        bad[0] += (crit.knuckles.len() != 2) as usize;
        bad[1] += (crit.tips.len() != 2) as usize;
        bad[2] += (v.sharp.len() != 2) as usize;
        bad[3] += (v.flat.len() + v.inflections.len() != 2) as usize;
        bad[4] += (!v.bumpy) as usize;
    }
    out.at_least("frames with τ ≤ -5", frames as f64, 2.0);
    for (label, b) in [
        "frames without exactly 2 knuckles",
        "frames without exactly 2 tips",
        "frames without exactly 2 sharp vertices",
        "frames without flat + inflections = 2",
        "frames that are not bumpy",
    ]
    .iter()
    .zip(bad)
    {
        out.equals(label, b, 0);
    }
    Ok(out)
}

fn c05_vertex_curvature(s: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let clip = s.clip()?;
    let paths = track_paths(clip, PointKind::SharpVertex, None, s.exec)?;
    let alive: Vec<_> = paths
        .paths
        .iter()
        .filter(|p| p.alive_on_all(clip.frames.len()))
        .collect();
    out.equals("sharp-vertex paths alive on every frame", alive.len(), 2);
    for p in alive {
        let rep = vertex_ode_check(clip, p, 0.02)?;
        let low = rep
            .taus
            .iter()
            .zip(&rep.chi)
            .filter(|(t, _)| **t <= -5.0 + 1e-9)
            .map(|(_, c)| c.abs())
            .fold(f64::INFINITY, f64::min);
        out.at_least(
            &format!("path {}: min |χ| for τ ≤ -5", p.id),
            low,
            FRAC_1_SQRT_2 - 0.02,
        );
        out.at_most(
            &format!("path {}: largest increase of |χ| with τ", p.id),
            rep.max_rise,
            0.0,
        );
    }
    Ok(out)
}

/// Grim-reaper distance at the upper sharp vertex of the exact paper clip.
fn clip_grim_distance(t: f64) -> Result<f64> {
    let curve = ExactFamily::PaperClip.sample_with(t, &fine_spacing(0.004, 0.004))?;
    let frame = curve.frame()?;
    let v = detect_vertices(&curve, VERTEX_TOL)?;
    let top = v
        .sharp
        .iter()
        .max_by(|a, b| a.position.y.total_cmp(&b.position.y))
        .ok_or_else(|| CsfError::InvalidInput("no sharp vertex".into()))?;
    let k = interpolate_field(&frame.kappa, &frame.arclengths, frame.length, true, top.arc);
    Ok(grim_fit_curve(&curve, top.arc, 1.0 / k.abs(), 1.4)?.c2_distance)
}

fn c06_grim_reaper(_: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let d8 = clip_grim_distance(-8.0)?;
    let d10 = clip_grim_distance(-10.0)?;
    let d5 = clip_grim_distance(-5.0)?;
    out.below("C² distance to the grim reaper at t = -8", d8, 0.05);
    out.below(
        "C² distance at t = -10 minus distance at t = -5",
        d10 - d5,
        0.0,
    );
    Ok(out)
}

fn c07_angle(_: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let curve = ExactFamily::PaperClip.sample_rescaled(-8.0, &fine_spacing(0.02, 0.1))?;
    let crit = detect_critical(
        &distance_profile(&curve, Vec2::ZERO)?,
        csflab_core::critical::MULTIPLE_TOL,
    )?;
    out.equals("fingers at τ = -8", crit.fingers.len(), 2);
    for (i, f) in crit.fingers.iter().enumerate() {
        let th = turning_angle(&curve, f.knuckles.0, f.knuckles.1).abs();
        out.within(
            &format!("finger {i}: knuckle angle difference"),
            th,
            PI,
            0.05,
        );
    }
    Ok(out)
}

/// Slack on the trend of `|A − π|`: the exact finger area is π at every
/// time, so only discretization error is left.
pub const AREA_TREND_SLACK: f64 = 1e-3;

fn c08_finger_area(_: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let taus: Vec<f64> = (0..=6).map(|k| -8.0 + 0.5 * k as f64).collect();
    let mut defects = Vec::new();
    for &tau in &taus {
        let curve = ExactFamily::PaperClip.sample_rescaled(tau, &fine_spacing(0.01, 0.02))?;
        let crit = detect_critical(
            &distance_profile(&curve, Vec2::ZERO)?,
            csflab_core::critical::MULTIPLE_TOL,
        )?;
        if crit.fingers.len() != 2 {
            out.equals(&format!("fingers at τ = {tau}"), crit.fingers.len(), 2);
            return Ok(out);
        }
        let areas: Vec<f64> = crit
            .fingers
            .iter()
            .map(|f| finger_region_area(&curve, f))
            .collect::<Result<_>>()?;
        if tau == taus[0] {
            for (i, a) in areas.iter().enumerate() {
                out.within(&format!("finger {i}: area at τ = -8"), *a, PI, 0.15);
            }
        }
        defects.push(areas.iter().map(|a| (a - PI).abs()).fold(0.0, f64::max));
    }
    let growth = (0..defects.len())
        .flat_map(|i| (i + 1..defects.len()).map(move |j| (i, j)))
        .map(|(i, j)| defects[i] - defects[j])
        .fold(f64::NEG_INFINITY, f64::max);
    out.at_most(
        "largest excess of |A - π| at earlier τ over later τ",
        growth,
        AREA_TREND_SLACK,
    );
    Ok(out)
}

/// Explicit finite differences for `u_t = u_xx` on `[0, 2π)` periodic.
pub fn heat_profiles(u0: impl Fn(f64) -> f64, n: usize, times: &[f64]) -> Vec<Vec<f64>> {
    let h = 2.0 * PI / n as f64;
    let dt_max = 0.25 * h * h;
    let mut u: Vec<f64> = (0..n).map(|k| u0(k as f64 * h)).collect();
    let mut next = vec![0.0; n];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target - 1e-15 {
            let dt = dt_max.min(target - t);
            let c = dt / (h * h);
            for k in 0..n {
                next[k] = u[k] + c * (u[(k + 1) % n] - 2.0 * u[k] + u[(k + n - 1) % n]);
            }
            std::mem::swap(&mut u, &mut next);
            t += dt;
        }
        out.push(u.clone());
    }
    out
}

/// Circle of radius 1 perturbed by `cos 3θ` and a smaller `cos 7θ`.
pub fn perturbed_circle(n: usize) -> Result<DiscreteCurve> {
    let pts = (0..n)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / n as f64;
            let r = 1.0 + 0.05 * (3.0 * th).cos() + 0.01 * (7.0 * th).cos();
            Vec2::new(r * th.cos(), r * th.sin())
        })
        .collect();
    DiscreteCurve::closed(pts)
}

fn c09_sturm(s: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let n = 256;
    let controls = EvolveControls {
        step: StepControls::uniform(n),
        dt_max: 1e-4,
        frame_interval: 0.01,
        kappa_cap: 1e4,
    };
    let traj = evolve(
        &FlowState::physical(perturbed_circle(n)?, 0.0),
        0.3,
        &controls,
    )?;
    let z = zero_monotonicity_check(&traj, &ZeroField::KappaS, VERTEX_TOL, s.exec)?;
    out.equals(
        "perturbed circle: frames where the κ_s zero count rises",
        z.violations.len(),
        0,
    );
    out.at_least(
        "perturbed circle: initial κ_s zero count",
        z.counts.first().copied().unwrap_or(0) as f64,
        6.0,
    );

    let times: Vec<f64> = (0..=30).map(|k| 0.02 * k as f64).collect();
    let profile = |x: f64| x.sin() + (2.0 * x).sin();
    let sols = heat_profiles(profile, 256, &times);
    let mut err = 0.0f64;
    let mut counts = Vec::new();
    for (t, u) in times.iter().zip(&sols) {
        for (k, v) in u.iter().enumerate() {
            let x = 2.0 * PI * k as f64 / 256.0;
            err = err.max((v - ((-t).exp() * x.sin() + (-4.0 * t).exp() * (2.0 * x).sin())).abs());
        }
        counts.push(count_zeros(u, Boundary::Periodic, 1e-8)?.count);
    }
    let rises = counts.windows(2).filter(|w| w[1] > w[0]).count();
    out.below("heat profile: deviation from the exact solution", err, 1e-3);
    out.equals("heat profile: frames where the zero count rises", rises, 0);
    out.equals("heat profile: initial zero count", counts[0], 4);
    out.equals(
        "heat profile: final zero count",
        *counts.last().expect("times"),
        2,
    );
    Ok(out)
}

/// Rotation making the long axis of the paper clip the first coordinate.
pub const CLIP_SHEET_ANGLE: f64 = -FRAC_PI_2;

fn c10_graphical_radius(s: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let clip = s.clip()?;
    let eps = 0.05;
    let mut failing = 0;
    let mut frames = 0;
    let (mut first, mut last) = (None, None);
    for (_, f) in frames_up_to(clip, -5.0) {
        let rep = graphical_radius(
            std::slice::from_ref(&f.curve),
            f.time,
            CLIP_SHEET_ANGLE,
            eps,
            2,
        )?;
        frames += 1;
        failing += (!rep.bounds_hold()) as usize;
        if (f.time + 8.0).abs() < 1e-9 {
            first = Some(rep.rho_hat);
        }
        if (f.time + 5.0).abs() < 1e-9 {
            last = Some(rep.rho_hat);
        }
    }
    out.at_least("frames with τ in [-8, -5]", frames as f64, 2.0);
    out.equals("frames violating the sheet bounds", failing, 0);
    let (Some(a), Some(b)) = (first, last) else {
        return Err(CsfError::InvalidInput(
            "trajectory lacks frames at τ = -8 and τ = -5".into(),
        ));
    };
    out.holds("ρ̂(-8) - ρ̂(-5)", a - b, "> 0", a > b);
    Ok(out)
}

/// Smooth bump `exp(1 − 1/(1 − s²))` on `|s| < 1`.
fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Random polynomial of degree ≤ 6 in `y/3` times `cutoff(y)`, normalized
/// in `H`.
fn random_test_function(grid: &Grid, rng: &mut ChaCha8Rng, cutoff: fn(f64) -> f64) -> Sampled {
    let coef: Vec<f64> = (0..=6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = grid.sample(|y| {
        let x = y / 3.0;
        coef.iter().rev().fold(0.0, |acc, c| acc * x + c) * cutoff(y)
    });
    let n = norm_h(&f);
    f.scale(1.0 / n)
}

fn stable_part(f: &Sampled) -> Result<Sampled> {
    let g = f.grid;
    let a = inner_h(f, &phi1(&g))?;
    let b = inner_h(f, &phi2(&g))?;
    f.sub(&phi1(&g).scale(a))?.sub(&phi2(&g).scale(b))
}

fn c11_spectral(s: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let g = Grid::default();
    let modes = [(phi1(&g), 0.5), (phi2(&g), 0.0), (phi3(&g), -0.5)];
    let resid = modes
        .iter()
        .map(|(f, lam)| l_apply(f).sub(&f.scale(*lam)).map(|r| norm_h(&r)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.below("eigen-residual ‖Lφ - λφ‖", resid, 1e-5);
    let mut ortho = 0.0f64;
    for (i, (fi, _)) in modes.iter().enumerate() {
        for (j, (fj, _)) in modes.iter().enumerate() {
            let d = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((inner_h(fi, fj)? - d).abs());
        }
    }
    out.at_most("orthonormality defect", ortho, 1e-8);

    let lin = project(&SheetProfile::from_fn(0.0, 0, g, 1e3, |y| 3.0 + y))?;
    out.within("projection of 3 + y: a", lin.a, 3.0, 1e-6);
    out.within("projection of 3 + y: b", lin.b, SQRT_2, 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let (mut parseval, mut parts, mut gap) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    let eta: Vec<Sampled> = (0..20)
        .map(|_| random_test_function(&g, &mut rng, |y| cutoff_eta(y / 3.0)))
        .collect();
    // η is only C², which limits finite differences near |y| = 3, 6; the
    // identity is exercised on C^∞ bumps
    let smooth: Vec<Sampled> = (0..20)
        .map(|_| random_test_function(&g, &mut rng, |y| bump(y / 6.0)))
        .collect();
    for f in [phi3(&g), g.sample(|y| 3.0 + y)]
        .iter()
        .chain(&eta)
        .chain(&smooth)
    {
        let p = project_sampled(f)?;
        parseval = parseval
            .max((p.a * p.a + p.b * p.b + p.stable_norm * p.stable_norm - norm_h(f).powi(2)).abs());
    }
    for f in &smooth {
        let lf = l_apply(f);
        let fy = f.derivative();
        parts =
            parts.max((inner_h(f, &lf)? - (0.5 * norm_h(f).powi(2) - norm_h(&fy).powi(2))).abs());
    }
    for f in &eta {
        let m = stable_part(f)?;
        let m = m.scale(1.0 / norm_h(&m));
        gap = gap.max(inner_h(&m, &l_apply(&m))? + 0.5 * norm_h(&m).powi(2));
    }
    out.at_most("Parseval defect", parseval, 1e-8);
    out.at_most("integration-by-parts defect", parts, 1e-6);
    out.at_most("⟨P₋f, L P₋f⟩ + ½‖P₋f‖² (unit ‖P₋f‖)", gap, 1e-6);
    Ok(out)
}

fn c12_decay(_: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let grid = Grid::default();
    let mut series = Vec::new();
    for k in 0..=16 {
        let tau = -9.0 + 0.25 * k as f64;
        let curve = ExactFamily::PaperClip.sample_rescaled(tau, &fine_spacing(0.02, 0.05))?;
        let sheets = extract_sheets(
            std::slice::from_ref(&curve),
            CLIP_SHEET_ANGLE,
            2,
            grid,
            4.0,
            tau,
        )?;
        let v = sheets.iter().map(|p| p.c2_norm(3.0)).fold(0.0, f64::max);
        series.push((tau, v));
    }
    let fit = decay_fit(&series)?;
    out.holds("fitted rate", fit.rate, "> 0", fit.rate > 0.0);
    out.holds("fit r²", fit.r2, "> 0.95", fit.r2 > 0.95);
    Ok(out)
}

/// Circular arc of curvature `k` through `(0, −d)` with both ends on `|x| = r`.
pub fn arc_through_ball(k: f64, d: f64, r: f64, n: usize) -> Result<DiscreteCurve> {
    let rad = 1.0 / k;
    let center = Vec2::new(0.0, rad - d);
    let at = |phi: f64| center + Vec2::new(rad * phi.sin(), -rad * phi.cos());
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if at(mid).norm() < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let end = 0.5 * (lo + hi);
    let pts = (0..n)
        .map(|i| at(-end + 2.0 * end * i as f64 / (n - 1) as f64))
        .collect();
    DiscreteCurve::open(pts)
}

fn c13_localized(_: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let r = 100.0;
    let diameter = ExactFamily::Line {
        angle: 0.4,
        offset: 0.0,
        half_length: r,
    }
    .sample(0.0, 4001)?;
    let line = sandwich_check(0.01, 0.0, r, &diameter)?;
    out.within("diameter line: sandwich value", line.value, 1.0, 1e-4);
    out.holds(
        "diameter line: inside the sandwich",
        line.value,
        "inside",
        line.inside,
    );
    let b = 0.01;
    let arc = arc_through_ball(b / r, 0.05, r, 4001)?;
    let arc = sandwich_check(0.01, b, r, &arc)?;
    out.holds(
        "small-curvature arc: inside the sandwich",
        arc.value,
        "inside",
        arc.inside,
    );

    let sigmas: Vec<f64> = (1..=14).map(|j| 0.1 * j as f64).collect();
    let mut times: Vec<f64> = sigmas.iter().map(|s| -s * s).collect();
    times.push(0.0);
    times.sort_by(f64::total_cmp);
    let line = ExactFamily::Line {
        angle: 0.4,
        offset: 0.0,
        half_length: 50.0,
    }
    .trajectory(
        &times,
        FlowMode::Physical,
        &SpacingPolicy::Uniform { n: 801 },
    )?;
    let xbar = Vec2::new(0.4f64.cos(), 0.4f64.sin()) * 0.3;
    let vals: Vec<f64> = sigmas
        .iter()
        .map(|&sg| theta_localized(&line, xbar, 0.0, 10.0, sg).map(|d| d.value))
        .collect::<Result<_>>()?;
    let drop = vals.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    out.at_most("static line: largest decrease of Θ^R in σ", drop, 1e-6);

    let tbar = -1.0;
    let mut ctimes: Vec<f64> = sigmas.iter().map(|s| tbar - s * s).collect();
    ctimes.push(tbar);
    ctimes.sort_by(f64::total_cmp);
    let circle = ExactFamily::circle().trajectory(
        &ctimes,
        FlowMode::Physical,
        &SpacingPolicy::Uniform { n: 1024 },
    )?;
    let vals: Vec<f64> = sigmas
        .iter()
        .map(|&sg| theta_localized(&circle, Vec2::new(SQRT_2, 0.0), tbar, 1.0, sg).map(|d| d.value))
        .collect::<Result<_>>()?;
    let drop = vals.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    out.at_most("shrinking circle: largest decrease of Θ^R in σ", drop, 1e-6);
    Ok(out)
}

/// Open polyline whose last leg crosses its first.
pub fn crossing_lines(per_leg: usize) -> Result<DiscreteCurve> {
    let corners = [
        Vec2::new(-2.0, -2.0),
        Vec2::new(2.0, 2.0),
        Vec2::new(2.0, -2.0),
        Vec2::new(-2.0, 2.0),
    ];
    let mut pts = Vec::new();
    for w in corners.windows(2) {
        for i in 0..per_leg {
            pts.push(w[0] + (w[1] - w[0]) * (i as f64 / per_leg as f64));
        }
    }
    pts.push(corners[3]);
    DiscreteCurve::open(pts)
}

fn c14_negative(_: &Suite) -> Result<Checks> {
    let mut out = Checks::default();
    let x = crossing_lines(40)?;
    out.holds(
        "crossing lines: self-intersection detected",
        1.0,
        "true",
        self_intersects(&x),
    );
    let rejected = matches!(
        step(
            &FlowState::physical(x, 0.0),
            1e-4,
            &StepControls::uniform(121)
        ),
        Err(CsfError::StepRejected { .. })
    );
    out.holds(
        "crossing lines: flow step rejected",
        rejected as u8 as f64,
        "StepRejected",
        rejected,
    );

    let circle = ExactFamily::circle().sample(-0.5, 256)?;
    let degenerate = matches!(
        detect_vertices(&circle, VERTEX_TOL),
        Err(CsfError::DegenerateVertexSet)
    );
    out.holds(
        "circle: vertex detector reports a degenerate vertex set",
        degenerate as u8 as f64,
        "DegenerateVertexSet",
        degenerate,
    );
    let r = tip_relations_check(&circle, 0, 0.5, 1.0)?;
    out.holds(
        "circle with mismatched λ: largest tip-relation residual",
        r.r0.max(r.r1).max(r.r2),
        "> 0.1",
        r.r0.max(r.r1).max(r.r2) > 0.1,
    );
    Ok(out)
}
