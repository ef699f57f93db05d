//! Closed-form solutions of curve-shortening flow.
//!
//! * circle of radius `√(2(T − t))`,
//! * static straight line,
//! * grim reaper `y = t − ln cos x`, translating upward at unit speed,
//! * paper clip (Angenent oval) `cos x = e^t cosh y`, `t < 0`.
//!
//! The paper clip is sampled in exact arc length. Its first quadrant is
//! split in two pieces: near the knuckle `(arccos e^t, 0)` it is a graph
//! `x = arccos(e^t cosh y)`, near the tip it is parameterised by the normal
//! angle `φ` with `x = asin(k cos φ)`, `y = asinh(k e^{-t} sin φ)`,
//! `k = √(1 − e^{2t})`. The pieces meet at `φ = π/4`. Everything is
//! evaluated in the log domain, so very negative `t` (where `e^t`
//! underflows) is fine. The curvature is `κ = cos x / k` throughout.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, LN_2};

use serde::{Deserialize, Serialize};

use crate::flow::{FlowMode, FlowState, FlowTrajectory};
use crate::geometry::{
    compute_frame, spacing_targets, AdaptiveSpacing, DiscreteCurve, SpacingPolicy, Vec2,
};
use crate::spline::{gauss_legendre, ParametricSpline};
use crate::{CsfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactFamily {
    /// Shrinking circle centred at the origin, vanishing at `extinction`.
    Circle { extinction: f64 },
    /// Static line with direction `angle`, at signed distance `offset` from
    /// the origin, sampled on `[-half_length, half_length]`.
    Line {
        angle: f64,
        offset: f64,
        half_length: f64,
    },
    /// Canonical width-π grim reaper on the window `|x| ≤ x_max`.
    GrimReaper { x_max: f64 },
    /// Canonical paper clip `cos x = e^t cosh y`.
    PaperClip,
}

impl ExactFamily {
    pub fn circle() -> Self {
        ExactFamily::Circle { extinction: 0.0 }
    }

    pub fn grim_reaper(x_max: f64) -> Self {
        ExactFamily::GrimReaper { x_max }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExactFamily::Circle { .. } => "circle",
            ExactFamily::Line { .. } => "line",
            ExactFamily::GrimReaper { .. } => "grim_reaper",
            ExactFamily::PaperClip => "paper_clip",
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, ExactFamily::Circle { .. } | ExactFamily::PaperClip)
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        let ok = match *self {
            ExactFamily::Circle { extinction } => t < extinction,
            ExactFamily::PaperClip => t < 0.0,
            ExactFamily::GrimReaper { x_max } => {
                if !(x_max > 0.0 && x_max < FRAC_PI_2) {
                    return Err(CsfError::InvalidInput(format!(
                        "grim reaper window {x_max} must lie in (0, π/2)"
                    )));
                }
                t.is_finite()
            }
            ExactFamily::Line { half_length, .. } => {
                if !(half_length > 0.0) {
                    return Err(CsfError::InvalidInput(
                        "line half length must be positive".into(),
                    ));
                }
                t.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(CsfError::OutOfDomain {
                what: self.name().into(),
                time: t,
            })
        }
    }

    /// `n` points at uniform arc-length spacing on the exact curve at time `t`.
    pub fn sample(&self, t: f64, n: usize) -> Result<DiscreteCurve> {
        self.sample_with(t, &SpacingPolicy::Uniform { n })
    }

    pub fn sample_with(&self, t: f64, policy: &SpacingPolicy) -> Result<DiscreteCurve> {
        self.check_domain(t)?;
        let arc = ArcCurve::new(self, t)?;
        arc.sample(policy, 1.0, Some(t))
    }

    /// Frame of the rescaled flow at `τ`: the curve at `t = T − e^{-τ}`
    /// scaled by `e^{τ/2}` (only meaningful for families with an
    /// extinction time; lines and reapers are rescaled about `t = 0`).
    /// The spacing policy is in rescaled units.
    pub fn sample_rescaled(&self, tau: f64, policy: &SpacingPolicy) -> Result<DiscreteCurve> {
        let t0 = match *self {
            ExactFamily::Circle { extinction } => extinction,
            _ => 0.0,
        };
        let t = t0 - (-tau).exp();
        self.check_domain(t)?;
        let arc = ArcCurve::new(self, t)?;
        arc.sample(policy, (0.5 * tau).exp(), Some(tau))
    }

    /// Exact curvature at the points of [`ExactFamily::sample`].
    pub fn sample_curvature(&self, t: f64, n: usize) -> Result<Vec<f64>> {
        self.check_domain(t)?;
        let arc = ArcCurve::new(self, t)?;
        let targets = arc.uniform_targets(n);
        Ok(targets.iter().map(|&s| arc.eval(s).1).collect())
    }

    /// `max |v_n − κ|` over the samples at time `t`, with `v_n` the normal
    /// displacement rate towards the samples at `t + dt` (closest-point
    /// projection onto a spline through the later samples).
    pub fn flow_residual(&self, t: f64, dt: f64, n: usize) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(CsfError::InvalidInput("dt must be positive".into()));
        }
        self.check_domain(t)?;
        self.check_domain(t + dt)?;
        let a = self.sample(t, n)?;
        let b = self.sample(t + dt, n)?;
        normal_speed_residual(&a, &b, dt)
    }
}

impl ExactFamily {
    /// Frames of the exact solution at the given times, physical (`t`) or
    /// rescaled (`τ`). The spacing policy is in the units of the frames.
    pub fn trajectory(
        &self,
        times: &[f64],
        mode: FlowMode,
        policy: &SpacingPolicy,
    ) -> Result<FlowTrajectory> {
        let frames = times
            .iter()
            .map(|&t| {
                Ok(match mode {
                    FlowMode::Physical => FlowState::physical(self.sample_with(t, policy)?, t),
                    FlowMode::Rescaled => FlowState::rescaled(self.sample_rescaled(t, policy)?, t),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FlowTrajectory::from_frames(frames)
    }
}

/// `max |v_n − κ|` between two consecutive samples of a flow.
pub fn normal_speed_residual(a: &DiscreteCurve, b: &DiscreteCurve, dt: f64) -> Result<f64> {
    let frame = compute_frame(a)?;
    let sp = ParametricSpline::new(b.points(), b.is_closed())?;
    let knots = sp.knots();
    let nb = b.len();
    let mut worst = 0.0f64;
    for (i, &p) in a.points().iter().enumerate() {
        let j = b.nearest_index(p);
        let q = sp.eval(sp.closest_param(p, knots[j.min(nb - 1)]));
        let vn = (q - p).dot(frame.normals[i]) / dt;
        worst = worst.max((vn - frame.kappa[i]).abs());
    }
    Ok(worst)
}

/// A family member at a fixed time, parameterised by exact arc length.
enum ArcCurve {
    Circle { r: f64 },
    Line { dir: Vec2, base: Vec2, half: f64 },
    Reaper { t: f64, sigma_max: f64 },
    Clip(Box<PaperClip>),
}

impl ArcCurve {
    fn new(fam: &ExactFamily, t: f64) -> Result<Self> {
        Ok(match *fam {
            ExactFamily::Circle { extinction } => ArcCurve::Circle {
                r: (2.0 * (extinction - t)).sqrt(),
            },
            ExactFamily::Line {
                angle,
                offset,
                half_length,
            } => {
                let dir = Vec2::new(angle.cos(), angle.sin());
                ArcCurve::Line {
                    dir,
                    base: dir.perp() * offset,
                    half: half_length,
                }
            }
            ExactFamily::GrimReaper { x_max } => ArcCurve::Reaper {
                t,
                sigma_max: x_max.tan().asinh(),
            },
            ExactFamily::PaperClip => ArcCurve::Clip(Box::new(PaperClip::new(t))),
        })
    }

    fn closed(&self) -> bool {
        matches!(self, ArcCurve::Circle { .. } | ArcCurve::Clip(_))
    }

    fn length(&self) -> f64 {
        match self {
            ArcCurve::Circle { r } => 2.0 * std::f64::consts::PI * r,
            ArcCurve::Line { half, .. } => 2.0 * half,
            ArcCurve::Reaper { sigma_max, .. } => 2.0 * sigma_max,
            ArcCurve::Clip(c) => 4.0 * c.quadrant_length(),
        }
    }

    /// Point and curvature at arc length `s` from the start.
    fn eval(&self, s: f64) -> (Vec2, f64) {
        match self {
            ArcCurve::Circle { r } => {
                let a = s / r;
                (Vec2::new(r * a.cos(), r * a.sin()), 1.0 / r)
            }
            ArcCurve::Line { dir, base, half } => (*base + *dir * (s - half), 0.0),
            ArcCurve::Reaper { t, sigma_max } => {
                let sig = s - sigma_max;
                let x = sig.sinh().atan();
                (Vec2::new(x, t + sig.cosh().ln()), 1.0 / sig.cosh())
            }
            ArcCurve::Clip(c) => c.eval(s),
        }
    }

    fn uniform_targets(&self, n: usize) -> Vec<f64> {
        let l = self.length();
        let div = if self.closed() { n } else { n - 1 };
        (0..n).map(|k| l * k as f64 / div as f64).collect()
    }

    /// Fine arc-length grid for spacing design; `step` bounds the spacing.
    fn fine_grid(&self, step: f64) -> Vec<f64> {
        match self {
            ArcCurve::Clip(c) => c.fine_grid(step),
            _ => {
                let l = self.length();
                let m = ((l / step).ceil() as usize).clamp(64, 1 << 20);
                (0..=m).map(|k| l * k as f64 / m as f64).collect()
            }
        }
    }

    fn sample(
        &self,
        policy: &SpacingPolicy,
        scale: f64,
        time: Option<f64>,
    ) -> Result<DiscreteCurve> {
        let targets = match policy {
            SpacingPolicy::Uniform { n } => {
                if *n < crate::geometry::MIN_POINTS {
                    return Err(CsfError::InvalidInput("too few sample points".into()));
                }
                self.uniform_targets(*n)
            }
            SpacingPolicy::Adaptive(a) => self.adaptive_targets(a, scale)?,
        };
        let pts = targets.iter().map(|&s| self.eval(s).0 * scale).collect();
        DiscreteCurve::new(pts, self.closed(), time)
    }

    fn adaptive_targets(&self, a: &AdaptiveSpacing, scale: f64) -> Result<Vec<f64>> {
        let mut step = a.h_max;
        if let Some((_, _, hf)) = a.focus {
            step = step.min(hf);
        }
        let grid = self.fine_grid(0.25 * step / scale);
        let mut s = Vec::with_capacity(grid.len());
        let mut kappa = Vec::with_capacity(grid.len());
        let mut pos = Vec::with_capacity(grid.len());
        for &g in &grid {
            let (p, k) = self.eval(g);
            s.push(g * scale);
            kappa.push(k / scale);
            pos.push(p * scale);
        }
        let t = spacing_targets(&s, &kappa, &pos, self.closed(), a)?;
        Ok(t.into_iter().map(|v| v / scale).collect())
    }
}

/// `asinh(e^{lz})` without overflow.
fn asinh_exp(lz: f64) -> f64 {
    if lz > 30.0 {
        lz + LN_2
    } else {
        lz.exp().asinh()
    }
}

/// Cumulative arc length over breakpoints of a monotone parameter.
struct ArcTable {
    knots: Vec<f64>,
    cum: Vec<f64>,
}

impl ArcTable {
    fn new(knots: Vec<f64>, speed: &dyn Fn(f64) -> f64) -> Self {
        let mut cum = Vec::with_capacity(knots.len());
        cum.push(0.0);
        for w in knots.windows(2) {
            let l = gauss_legendre(speed, w[0], w[1]);
            cum.push(cum.last().unwrap() + l);
        }
        ArcTable { knots, cum }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn invert(&self, ell: f64, speed: &dyn Fn(f64) -> f64) -> f64 {
        let ell = ell.clamp(0.0, self.total());
        let i = match self.cum.binary_search_by(|v| v.total_cmp(&ell)) {
            Ok(i) => return self.knots[i],
            Err(i) => i.clamp(1, self.cum.len() - 1) - 1,
        };
        let (k0, k1) = (self.knots[i], self.knots[i + 1]);
        let target = ell - self.cum[i];
        let mut p = k0 + (k1 - k0) * target / (self.cum[i + 1] - self.cum[i]);
        for _ in 0..40 {
            let g = gauss_legendre(speed, k0, p) - target;
            let step = g / speed(p);
            p = (p - step).clamp(k0, k1);
            if step.abs() <= 1e-15 * (k1.abs() + 1.0) {
                break;
            }
        }
        p
    }
}

/// Paper clip at a fixed time `t < 0`.
struct PaperClip {
    t: f64,
    /// `e^{2t}` (may underflow to zero).
    e2: f64,
    k: f64,
    ln_k: f64,
    graph: ArcTable,
    angle: ArcTable,
}

impl PaperClip {
    fn new(t: f64) -> Self {
        let e2 = (2.0 * t).exp();
        let ln_k = 0.5 * (-e2).ln_1p();
        let k = ln_k.exp();
        let y_split = asinh_exp(ln_k - t + FRAC_PI_4.sin().ln());
        let mut knots = vec![0.0];
        // breakpoints measured back from the split, fine where the graph bends
        let mut w: f64 = 0.0;
        let mut ws = vec![0.0];
        while w < y_split {
            let step = (0.25f64.max(0.1 * w)).min(y_split / 16.0).max(1e-12);
            w = (w + step).min(y_split);
            ws.push(w);
        }
        for &w in ws.iter().rev().skip(1) {
            knots.push(y_split - w);
        }
        knots[0] = 0.0;
        *knots.last_mut().unwrap() = y_split;
        let mut clip = PaperClip {
            t,
            e2,
            k,
            ln_k,
            graph: ArcTable {
                knots: vec![],
                cum: vec![],
            },
            angle: ArcTable {
                knots: vec![],
                cum: vec![],
            },
        };
        let graph = ArcTable::new(knots, &|y| clip.graph_speed(y));
        clip.graph = graph;
        let phis: Vec<f64> = (0..=32)
            .map(|i| FRAC_PI_4 + FRAC_PI_4 * i as f64 / 32.0)
            .collect();
        let angle = ArcTable::new(phis, &|p| clip.angle_speed(p));
        clip.angle = angle;
        clip
    }

    /// `(e^t cosh y, e^t sinh y)`.
    fn ch_sh(&self, y: f64) -> (f64, f64) {
        let a = (self.t + y).exp();
        let b = (self.t - y).exp();
        (0.5 * (a + b), 0.5 * (a - b))
    }

    fn graph_speed(&self, y: f64) -> f64 {
        let (c, sh) = self.ch_sh(y);
        let dx = sh / (1.0 - c * c).sqrt();
        (1.0 + dx * dx).sqrt()
    }

    fn amp(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        (s * s + self.e2 * c * c).sqrt()
    }

    fn angle_speed(&self, phi: f64) -> f64 {
        self.k / self.amp(phi)
    }

    fn quadrant_length(&self) -> f64 {
        self.graph.total() + self.angle.total()
    }

    /// First-quadrant point and curvature at arc length `r` from the knuckle.
    fn quadrant(&self, r: f64) -> (Vec2, f64) {
        let la = self.graph.total();
        if r <= la {
            let y = self.graph.invert(r, &|y| self.graph_speed(y));
            let (c, _) = self.ch_sh(y);
            (Vec2::new(c.acos(), y), c / self.k)
        } else {
            let phi = self.angle.invert(r - la, &|p| self.angle_speed(p));
            let (s, c) = phi.sin_cos();
            let x = (self.k * c).asin();
            let y = if s > 0.0 {
                asinh_exp(self.ln_k - self.t + s.ln())
            } else {
                0.0
            };
            (Vec2::new(x, y), self.amp(phi) / self.k)
        }
    }

    fn eval(&self, s: f64) -> (Vec2, f64) {
        let lq = self.quadrant_length();
        let s = s.rem_euclid(4.0 * lq);
        let q = ((s / lq) as usize).min(3);
        let r = s - q as f64 * lq;
        match q {
            0 => self.quadrant(r),
            1 => {
                let (p, k) = self.quadrant(lq - r);
                (Vec2::new(-p.x, p.y), k)
            }
            2 => {
                let (p, k) = self.quadrant(r);
                (Vec2::new(-p.x, -p.y), k)
            }
            _ => {
                let (p, k) = self.quadrant(lq - r);
                (Vec2::new(p.x, -p.y), k)
            }
        }
    }

    fn fine_grid(&self, step: f64) -> Vec<f64> {
        let mut quarter = Vec::new();
        let mut push_table = |table: &ArcTable, offset: f64| {
            for w in table.cum.windows(2) {
                let len = w[1] - w[0];
                let m = ((len / step).ceil() as usize).clamp(8, 1 << 16);
                for j in 0..m {
                    quarter.push(offset + w[0] + len * j as f64 / m as f64);
                }
            }
        };
        push_table(&self.graph, 0.0);
        push_table(&self.angle, self.graph.total());
        let lq = self.quadrant_length();
        let mut out = Vec::with_capacity(4 * quarter.len() + 1);
        for q in 0..4 {
            let base = q as f64 * lq;
            if q % 2 == 0 {
                out.extend(quarter.iter().map(|r| base + r));
            } else {
                // mirrored quadrants run from the tip back to the knuckle
                out.push(base);
                out.extend(quarter.iter().skip(1).rev().map(|r| base + lq - r));
            }
        }
        out.push(4.0 * lq);
        out
    }
}

/// Knuckle and tip positions of the paper clip at time `t`:
/// `(arccos e^t, arccosh e^{-t})`.
pub fn paper_clip_extent(t: f64) -> Result<(f64, f64)> {
    if !(t < 0.0) {
        return Err(CsfError::OutOfDomain {
            what: "paper_clip".into(),
            time: t,
        });
    }
    let x = t.exp().acos();
    let y = if t < -30.0 {
        -t + LN_2
    } else {
        (-t).exp().acosh()
    };
    Ok((x, y))
}

/// Exact rescaled time `τ = −ln(T − t)`.
pub fn rescaled_time(t: f64, extinction: f64) -> f64 {
    -(extinction - t).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_radius() {
        let c = ExactFamily::circle().sample(-0.5, 64).unwrap();
        for p in c.points() {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            ExactFamily::circle().sample(0.1, 64),
            Err(CsfError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn paper_clip_locus_and_extent() {
        let t = -5.0;
        let c = ExactFamily::PaperClip.sample(t, 512).unwrap();
        let mut xmax = 0.0f64;
        let mut ymax = 0.0f64;
        for p in c.points() {
            let lhs = p.x.cos();
            let rhs = t.exp() * p.y.cosh();
            assert!((lhs - rhs).abs() < 1e-12, "{p:?}");
            xmax = xmax.max(p.x.abs());
            ymax = ymax.max(p.y.abs());
        }
        assert!((xmax - 1.5641).abs() < 1e-4);
        assert!((ymax - 5.6931).abs() < 1e-4);
        assert!(c.signed_area() > 0.0);
        // uniform spacing in exact arc length
        let e = c.edge_lengths();
        let (lo, hi) = e
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 1.0 + 1e-3);
    }

    #[test]
    fn paper_clip_area_is_minus_two_pi_t() {
        for t in [-0.3, -2.0, -6.0] {
            let c = ExactFamily::PaperClip.sample(t, 4096).unwrap();
            let a = c.signed_area();
            assert!(
                (a + 2.0 * std::f64::consts::PI * t).abs() < 1e-3 * (1.0 - t),
                "t={t} a={a}"
            );
        }
    }

    #[test]
    fn families_solve_the_flow() {
        let r = ExactFamily::circle()
            .flow_residual(-1.0, 1e-4, 256)
            .unwrap();
        assert!(r < 1e-3, "circle {r}");
        let r = ExactFamily::grim_reaper(1.2)
            .flow_residual(0.0, 1e-4, 256)
            .unwrap();
        assert!(r < 1e-3, "reaper {r}");
        let r = ExactFamily::PaperClip
            .flow_residual(-3.0, 1e-4, 512)
            .unwrap();
        assert!(r < 1e-2, "clip {r}");
    }

    #[test]
    fn reaper_tip_translates() {
        let f = ExactFamily::grim_reaper(1.2);
        let a = f.sample(0.0, 65).unwrap();
        let b = f.sample(0.7, 65).unwrap();
        assert_eq!(b.point(32) - a.point(32), Vec2::new(0.0, 0.7));
    }

    #[test]
    fn deep_rescaled_clip_is_finite() {
        let pol = SpacingPolicy::Adaptive(AdaptiveSpacing::default());
        let c = ExactFamily::PaperClip.sample_rescaled(-9.0, &pol).unwrap();
        assert!(c.points().iter().all(|p| p.is_finite()));
        let (_, hi) = c.bbox();
        // tip at e^{τ/2}(e^{-τ} + ln 2)
        let tip = (-4.5f64).exp() * ((9.0f64).exp() + LN_2);
        assert!((hi.y - tip).abs() < 1e-6 * tip);
        assert!((hi.x - std::f64::consts::FRAC_PI_2 * (-4.5f64).exp()).abs() < 1e-9);
    }
}
