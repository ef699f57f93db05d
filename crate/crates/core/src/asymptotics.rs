//! Grim-reaper structure near sharp vertices, regularity scale, vertex
//! curvature dynamics, tail decay, graphical radius and trombone checks.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::critical::{
    detect_critical, detect_vertices_with, distance_profile_with, interpolate_field,
    interpolate_tangent, point_at_arc, Path, MULTIPLE_TOL, VERTEX_TOL,
};
use crate::flow::{FlowMode, FlowTrajectory};
use crate::geometry::{turning_angle, DiscreteCurve, FrameData, Vec2};
use crate::par::{self, Exec};
use crate::spectral::SheetSource;
use crate::{CsfError, Result};

/// Largest `r` such that on `B(x, r) × [t − r², t]` every sampled `|κ|` is at
/// most `1/r` and no curve end enters the ball; capped by the window.
pub fn regularity_scale(traj: &FlowTrajectory, x: Vec2, t: f64) -> Result<f64> {
    traj.bracket(t)?;
    let start = traj.start();
    let cap = (t - start).max(0.0).sqrt();
    let r_min = 1e-6;
    if cap < r_min {
        return Err(CsfError::WindowTooSmall(format!(
            "no history before t = {t} (trajectory starts at {start})"
        )));
    }
    let frames: Vec<(f64, &DiscreteCurve, FrameData)> = traj
        .frames
        .iter()
        .filter(|f| f.time <= t + 1e-12 * (1.0 + t.abs()))
        .map(|f| Ok((f.time, &f.curve, f.curve.frame()?)))
        .collect::<Result<_>>()?;
    let ok = |r: f64| {
        frames
            .iter()
            .filter(|(ft, _, _)| *ft >= t - r * r - 1e-12)
            .all(|(_, c, fd)| {
                let inside_ok = c
                    .points()
                    .iter()
                    .zip(&fd.kappa)
                    .all(|(p, k)| (*p - x).norm() >= r || k.abs() <= 1.0 / r);
                let ends_ok = c.is_closed() || {
                    let n = c.len();
                    (c.point(0) - x).norm() >= r && (c.point(n - 1) - x).norm() >= r
                };
                inside_ok && ends_ok
            })
    };
    if !ok(r_min) {
        return Err(CsfError::WindowTooSmall(format!(
            "condition fails already at r = {r_min}"
        )));
    }
    if ok(cap) {
        return Ok(cap);
    }
    let (mut lo, mut hi) = (r_min, cap);
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-9 {
            break;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrimFit {
    pub time: f64,
    pub vertex: Vec2,
    /// Length scale `λ`; the curve is compared after dividing by it.
    pub scale: f64,
    pub c2_distance: f64,
    pub position_error: f64,
    pub tangent_error: f64,
    pub curvature_error: f64,
    /// `|x| ≤ window` in reaper units (capped at 1.4).
    pub window: f64,
    /// Depth of the time slab compared, in reaper time units.
    pub slab_depth: f64,
}

/// Similarity placing the vertex at the origin with tangent along `+x` and
/// curvature vector along `+y`, then dividing lengths by `scale`.
#[derive(Debug, Clone, Copy)]
struct ReaperChart {
    origin: Vec2,
    angle: f64,
    sigma: f64,
    scale: f64,
}

impl ReaperChart {
    fn at(curve: &DiscreteCurve, frame: &FrameData, arc: f64, scale: f64) -> Result<(Self, f64)> {
        let closed = curve.is_closed();
        let k = interpolate_field(&frame.kappa, &frame.arclengths, frame.length, closed, arc);
        if k == 0.0 || !k.is_finite() {
            return Err(CsfError::OrientationAmbiguous);
        }
        let sigma = k.signum();
        let t = interpolate_tangent(frame, arc);
        let c = Vec2::new(-t.y, t.x) * sigma;
        let origin = point_at_arc(curve.points(), &frame.arclengths, frame.length, closed, arc);
        Ok((
            ReaperChart {
                origin,
                angle: 0.5 * PI - c.angle(),
                sigma,
                scale,
            },
            k,
        ))
    }

    fn point(&self, p: Vec2) -> Vec2 {
        (p - self.origin).rotate(self.angle) / self.scale
    }

    /// Tangent angle and curvature of the chart image, oriented along `+x`.
    fn tangent_curvature(&self, t: Vec2, k: f64) -> (f64, f64) {
        let tt = (t * self.sigma).rotate(self.angle);
        (tt.y.atan2(tt.x), self.sigma * k * self.scale)
    }
}

#[derive(Default, Clone, Copy)]
struct Discrepancy {
    pos: f64,
    tan: f64,
    curv: f64,
}

/// Compares the branch through `start` with `y = shift − ln cos x` on
/// `|x| ≤ w`, walking both ways while the branch stays a graph.
fn compare_branch(
    curve: &DiscreteCurve,
    frame: &FrameData,
    chart: &ReaperChart,
    start: usize,
    w: f64,
    shift: f64,
) -> Discrepancy {
    let n = curve.len();
    let closed = curve.is_closed();
    let mut d = Discrepancy::default();
    let mut visit = |j: usize| {
        let q = chart.point(curve.point(j));
        let (th, k) = chart.tangent_curvature(frame.tangents[j], frame.kappa[j]);
        let cx = q.x.cos();
        d.pos = d.pos.max((q.y - (shift - cx.ln())).abs());
        d.tan = d.tan.max((th - q.x).abs());
        d.curv = d.curv.max((k - cx).abs());
    };
    for dir in [1isize, -1] {
        let mut j = start;
        let mut last_x = chart.point(curve.point(start)).x;
        for _ in 0..n {
            let q = chart.point(curve.point(j));
            if q.x.abs() > w || (j != start && (q.x - last_x) * dir as f64 <= 0.0) {
                break;
            }
            visit(j);
            last_x = q.x;
            let next = j as isize + dir;
            if closed {
                j = next.rem_euclid(n as isize) as usize;
            } else if next < 0 || next >= n as isize {
                break;
            } else {
                j = next as usize;
            }
            if j == start {
                break;
            }
        }
    }
    d
}

const GRIM_WINDOW_CAP: f64 = 1.4;

/// Spatial grim-reaper fit of a single curve at the vertex located at arc
/// length `vertex_arc`.
pub fn grim_fit_curve(
    curve: &DiscreteCurve,
    vertex_arc: f64,
    scale: f64,
    window: f64,
) -> Result<GrimFit> {
    if !(scale > 0.0) {
        return Err(CsfError::InvalidInput(
            "grim_fit: scale must be positive".into(),
        ));
    }
    let frame = curve.frame()?;
    let (chart, _) = ReaperChart::at(curve, &frame, vertex_arc, scale)?;
    let w = window.min(GRIM_WINDOW_CAP);
    let start = nearest_to(curve, &chart, Vec2::ZERO);
    let d = compare_branch(curve, &frame, &chart, start, w, 0.0);
    Ok(GrimFit {
        time: curve.time().unwrap_or(0.0),
        vertex: chart.origin,
        scale,
        c2_distance: d.pos.max(d.tan).max(d.curv),
        position_error: d.pos,
        tangent_error: d.tan,
        curvature_error: d.curv,
        window: w,
        slab_depth: 0.0,
    })
}

fn nearest_to(curve: &DiscreteCurve, chart: &ReaperChart, target: Vec2) -> usize {
    (0..curve.len())
        .min_by(|&a, &b| {
            let da = (chart.point(curve.point(a)) - target).norm_sq();
            let db = (chart.point(curve.point(b)) - target).norm_sq();
            da.total_cmp(&db)
        })
        .unwrap_or(0)
}

/// Grim-reaper fit at a vertex of frame `frame`. On physical trajectories
/// earlier frames within `min(window², 4)` reaper time units are compared
/// with the translating reaper; rescaled trajectories get a spatial fit.
pub fn grim_fit(
    traj: &FlowTrajectory,
    frame: usize,
    vertex_arc: f64,
    scale: f64,
    window: f64,
) -> Result<GrimFit> {
    let f = traj
        .frames
        .get(frame)
        .ok_or_else(|| CsfError::InvalidInput(format!("no frame {frame}")))?;
    let mut fit = grim_fit_curve(&f.curve, vertex_arc, scale, window)?;
    fit.time = f.time;
    if f.mode != FlowMode::Physical {
        return Ok(fit);
    }
    let fd = f.curve.frame()?;
    let (chart, _) = ReaperChart::at(&f.curve, &fd, vertex_arc, scale)?;
    let depth = (window * window).min(4.0);
    let mut reached = 0.0f64;
    for g in traj.frames[..frame].iter().rev() {
        let s = (g.time - f.time) / (scale * scale);
        if s < -depth - 1e-12 {
            break;
        }
        let gd = g.curve.frame()?;
        let start = nearest_to(&g.curve, &chart, Vec2::new(0.0, s));
        let d = compare_branch(&g.curve, &gd, &chart, start, fit.window, s);
        fit.position_error = fit.position_error.max(d.pos);
        fit.tangent_error = fit.tangent_error.max(d.tan);
        fit.curvature_error = fit.curvature_error.max(d.curv);
        reached = -s;
    }
    fit.c2_distance = fit
        .position_error
        .max(fit.tangent_error)
        .max(fit.curvature_error);
    fit.slab_depth = reached;
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexOdeReport {
    pub taus: Vec<f64>,
    /// Curvature at the vertex on each frame.
    pub chi: Vec<f64>,
    /// Smoothed `d|χ|/dτ`.
    pub dchi: Vec<f64>,
    /// Frames where `0 < |χ| < 1/√2` and `d|χ|/dτ > −½|χ| + |χ|³ + slack`.
    pub ode_violations: Vec<usize>,
    /// Smallest `|χ|` in the later half of the window once `1/√2` is reached.
    pub late_min: Option<f64>,
    /// Largest increase of `|χ|` between consecutive frames.
    pub max_rise: f64,
    pub slack: f64,
}

impl VertexOdeReport {
    pub fn lower_bound_holds(&self) -> bool {
        self.late_min
            .is_none_or(|m| m >= FRAC_1_SQRT_2 - self.slack)
    }

    /// `|χ|` does not increase with `τ` (non-decreasing in `−τ`).
    pub fn trend_holds(&self) -> bool {
        self.max_rise <= self.slack
    }
}

/// Savitzky–Golay smoothing, quadratic, width 5.
fn savitzky_golay5(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    if n < 5 {
        return v.to_vec();
    }
    let mut out = v.to_vec();
    for k in 2..n - 2 {
        out[k] = (-3.0 * v[k - 2] + 12.0 * v[k - 1] + 17.0 * v[k] + 12.0 * v[k + 1]
            - 3.0 * v[k + 2])
            / 35.0;
    }
    out
}

pub fn vertex_ode_check(traj: &FlowTrajectory, path: &Path, slack: f64) -> Result<VertexOdeReport> {
    if traj.mode() != Some(FlowMode::Rescaled) {
        return Err(CsfError::InvalidInput(
            "vertex_ode_check needs a rescaled trajectory".into(),
        ));
    }
    if !path.alive_on_all(traj.frames.len()) {
        return Err(CsfError::PathBroken(format!(
            "path {} covers frames {}..{} of {}",
            path.id,
            path.birth,
            path.birth + path.entries.len(),
            traj.frames.len()
        )));
    }
    let chi: Vec<f64> = path
        .entries
        .iter()
        .map(|e| {
            let f = &traj.frames[e.frame];
            let fd = f.curve.frame()?;
            Ok(interpolate_field(
                &fd.kappa,
                &fd.arclengths,
                fd.length,
                f.curve.is_closed(),
                e.arc,
            ))
        })
        .collect::<Result<_>>()?;
    let taus = traj.times();
    let abs: Vec<f64> = chi.iter().map(|c| c.abs()).collect();
    let sm = savitzky_golay5(&abs);
    let n = sm.len();
    let dchi: Vec<f64> = (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            if a == b {
                0.0
            } else {
                (sm[b] - sm[a]) / (taus[b] - taus[a])
            }
        })
        .collect();
    let ode_violations = (0..n)
        .filter(|&k| abs[k] > 0.0 && abs[k] < FRAC_1_SQRT_2)
        .filter(|&k| dchi[k] > -0.5 * abs[k] + abs[k].powi(3) + slack)
        .collect();
    let half = n / 2;
    let attained = abs.iter().position(|&c| c >= FRAC_1_SQRT_2);
    let late_min = attained.map(|a| {
        abs[half.max(a)..]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    });
    let max_rise = abs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(VertexOdeReport {
        taus,
        chi,
        dchi,
        ode_violations,
        late_min,
        max_rise,
        slack,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipResiduals {
    /// `sup |κ − λ⁻¹cos θ|·λ`.
    pub r0: f64,
    /// `sup |κ_s + κ√(λ⁻² − κ²)|·λ²` (sign following `θ`).
    pub r1: f64,
    /// `sup |κ_ss + 2κ³ − λ⁻²κ|·λ³`.
    pub r2: f64,
    pub points: usize,
}

/// Residuals of the grim-reaper relations between `κ`, `κ_s`, `κ_ss` and
/// the turning angle `θ(s) = ∫_v^s κ` on `|θ| ≤ window`.
pub fn tip_relations_check(
    curve: &DiscreteCurve,
    vertex: usize,
    lambda: f64,
    window: f64,
) -> Result<TipResiduals> {
    let frame = curve.frame()?;
    let n = curve.len();
    if vertex >= n {
        return Err(CsfError::InvalidInput(format!(
            "vertex {vertex} out of range"
        )));
    }
    let kv = frame.kappa[vertex];
    if kv == 0.0 {
        return Err(CsfError::ZeroCurvature(vertex));
    }
    let sigma = kv.signum();
    let kss = frame.derivative(&frame.kappa_s);
    let closed = curve.is_closed();
    let il = 1.0 / lambda;
    let mut res = TipResiduals {
        r0: 0.0,
        r1: 0.0,
        r2: 0.0,
        points: 0,
    };
    let mut visit = |j: usize, theta: f64| {
        let k = sigma * frame.kappa[j];
        let ks = sigma * frame.kappa_s[j];
        let k2 = sigma * kss[j];
        let th = sigma * theta;
        res.r0 = res.r0.max((k - il * th.cos()).abs() * lambda);
        let root = (il * il - k * k).max(0.0).sqrt();
        res.r1 = res
            .r1
            .max((ks + th.signum() * k * root).abs() * lambda * lambda);
        res.r2 = res
            .r2
            .max((k2 + 2.0 * k.powi(3) - il * il * k).abs() * lambda.powi(3));
        res.points += 1;
    };
    visit(vertex, 0.0);
    let interior = |j: usize| closed || (j > 0 && j + 1 < n);
    for dir in [1isize, -1] {
        let mut theta = 0.0;
        let mut j = vertex;
        for _ in 1..n {
            let next = j as isize + dir;
            let next = if closed {
                next.rem_euclid(n as isize) as usize
            } else if next < 0 || next >= n as isize {
                break;
            } else {
                next as usize
            };
            let (a, b) = (frame.tangents[j], frame.tangents[next]);
            theta += a.cross(b).atan2(a.dot(b));
            j = next;
            if j == vertex || theta.abs() > window {
                break;
            }
            if interior(j) {
                visit(j, theta);
            }
        }
    }
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    /// Index of the sharp vertex the tail starts from.
    pub vertex: usize,
    pub end: usize,
    pub monotone: bool,
    /// Largest increase of `|κ|` moving away from the vertex.
    pub max_rise: f64,
    /// `sup |κ|·|x|` along the tail.
    pub sup_kappa_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFrame {
    pub time: f64,
    pub tails: Vec<TailCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailDecayReport {
    pub frames: Vec<TailFrame>,
    pub slack: f64,
}

impl TailDecayReport {
    pub fn all_monotone(&self) -> bool {
        self.frames
            .iter()
            .flat_map(|f| &f.tails)
            .all(|t| t.monotone)
    }

    pub fn is_empty(&self) -> bool {
        self.frames.iter().all(|f| f.tails.is_empty())
    }
}

fn tail_frame(curve: &DiscreteCurve, slack: f64) -> Result<Vec<TailCheck>> {
    if curve.is_closed() {
        return Ok(Vec::new());
    }
    let frame = curve.frame()?;
    let sharp = match detect_vertices_with(curve, &frame, VERTEX_TOL) {
        Ok(v) => v.sharp,
        Err(CsfError::DegenerateVertexSet) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let (Some(first), Some(last)) = (
        sharp.iter().min_by(|a, b| a.arc.total_cmp(&b.arc)),
        sharp.iter().max_by(|a, b| a.arc.total_cmp(&b.arc)),
    ) else {
        return Ok(Vec::new());
    };
    let n = curve.len();
    let check = |from: usize, to: usize| {
        let idx: Vec<usize> = if to > from {
            (from..=to).collect()
        } else {
            (to..=from).rev().collect()
        };
        let mut max_rise = 0.0f64;
        let mut sup = 0.0f64;
        for w in idx.windows(2) {
            max_rise = max_rise.max(frame.kappa[w[1]].abs() - frame.kappa[w[0]].abs());
        }
        for &j in &idx {
            sup = sup.max(frame.kappa[j].abs() * curve.point(j).norm());
        }
        TailCheck {
            vertex: from,
            end: to,
            monotone: max_rise <= slack,
            max_rise,
            sup_kappa_x: sup,
        }
    };
    Ok(vec![check(first.index, 0), check(last.index, n - 1)])
}

/// Monotone decay of `|κ|` along the tails beyond the outermost sharp
/// vertices, frame by frame. Closed curves have no tails.
pub fn tail_decay_check(traj: &FlowTrajectory, slack: f64, exec: Exec) -> Result<TailDecayReport> {
    let frames: Vec<Result<TailFrame>> = par::map(exec, &traj.frames, |f| {
        Ok(TailFrame {
            time: f.time,
            tails: tail_frame(&f.curve, slack)?,
        })
    });
    Ok(TailDecayReport {
        frames: frames.into_iter().collect::<Result<_>>()?,
        slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetNorms {
    pub sup_u: f64,
    pub sup_u_y: f64,
    /// On `|y| ≤ ρ̂/2`.
    pub sup_u_yy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphicalRadiusReport {
    pub tau: f64,
    /// `ρ` with `ρ⁻⁴ = max_i ‖u^i‖_{C²([−1,1])}`.
    pub rho: f64,
    /// Half-width of the band on which the curve is `m` graphs.
    pub extent: f64,
    /// `min(ρ, extent)`.
    pub rho_hat: f64,
    /// Largest radius `≤ rho_hat` on which `|u_y| ≤ eps` holds.
    pub rho_graph: f64,
    pub m: usize,
    pub eps: f64,
    pub sheets: Vec<SheetNorms>,
    /// `|u^i(y)| ≤ (|y|+2)² ρ⁻⁴` on `|y| ≤ ρ̂`.
    pub u_bound: bool,
    /// `|u^i_y| ≤ eps` on `|y| ≤ ρ̂`.
    pub u_y_bound: bool,
    /// `|u^i_yy| ≤ 5 eps / ρ̂` on `|y| ≤ ρ̂/2`.
    pub u_yy_bound: bool,
}

impl GraphicalRadiusReport {
    pub fn bounds_hold(&self) -> bool {
        self.u_bound && self.u_y_bound && self.u_yy_bound
    }
}

const SLICE_STEP: f64 = 0.005;

/// Graphical radius of a rescaled frame (one or more components) after
/// rotating by `angle` so that the sheets run along the first axis.
pub fn graphical_radius(
    curves: &[DiscreteCurve],
    tau: f64,
    angle: f64,
    eps: f64,
    m: usize,
) -> Result<GraphicalRadiusReport> {
    let src = SheetSource::new(curves, angle)?;
    let steps = |r: f64| (r / SLICE_STEP).round() as i64;
    for k in -steps(2.0)..=steps(2.0) {
        let y = k as f64 * SLICE_STEP;
        let c = src.count(y);
        if c != m {
            return Err(CsfError::SheetCountMismatch {
                expected: m,
                found: c,
                at: y,
            });
        }
    }
    let reach = curves
        .iter()
        .flat_map(|c| c.points())
        .map(|p| p.norm())
        .fold(0.0, f64::max);
    let mut extent = reach;
    'outer: for k in steps(2.0)..=steps(reach) + 1 {
        for y in [k as f64 * SLICE_STEP, -(k as f64) * SLICE_STEP] {
            if src.count(y) != m {
                extent = (k - 1) as f64 * SLICE_STEP;
                break 'outer;
            }
        }
    }
    let mut c2 = 0.0f64;
    for k in -steps(1.0)..=steps(1.0) {
        for p in src.slice(k as f64 * SLICE_STEP) {
            c2 = c2.max(p.u.abs()).max(p.u_y.abs()).max(p.u_yy.abs());
        }
    }
    let rho = if c2 > 0.0 {
        c2.powf(-0.25)
    } else {
        f64::INFINITY
    };
    let rho_hat = rho.min(extent);
    let mut sheets = vec![
        SheetNorms {
            sup_u: 0.0,
            sup_u_y: 0.0,
            sup_u_yy: 0.0,
        };
        m
    ];
    let (mut u_bound, mut u_y_bound, mut u_yy_bound) = (true, true, true);
    let mut rho_graph = rho_hat;
    let mut graph_broken = false;
    let kmax = (rho_hat / SLICE_STEP).floor() as i64;
    // walk outward so that the first |u_y| > eps sets rho_graph
    for k in 0..=kmax {
        for y in [k as f64 * SLICE_STEP, -(k as f64) * SLICE_STEP] {
            let pts = src.slice(y);
            for (i, p) in pts.iter().enumerate().take(m) {
                let s = &mut sheets[i];
                s.sup_u = s.sup_u.max(p.u.abs());
                s.sup_u_y = s.sup_u_y.max(p.u_y.abs());
                if y.abs() <= 0.5 * rho_hat {
                    s.sup_u_yy = s.sup_u_yy.max(p.u_yy.abs());
                    u_yy_bound &= p.u_yy.abs() <= 5.0 * eps / rho_hat;
                }
                u_bound &= p.u.abs() <= (y.abs() + 2.0).powi(2) / rho.powi(4);
                if p.u_y.abs() > eps {
                    u_y_bound = false;
                    if !graph_broken {
                        graph_broken = true;
                        rho_graph = ((k - 1).max(0) as f64) * SLICE_STEP;
                    }
                }
            }
        }
    }
    Ok(GraphicalRadiusReport {
        tau,
        rho,
        extent,
        rho_hat,
        rho_graph,
        m,
        eps,
        sheets,
        u_bound,
        u_y_bound,
        u_yy_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TromboneFrame {
    pub tau: f64,
    pub bumpy: bool,
    pub one_vertex_per_finger: bool,
    pub same_sign: bool,
    pub angle_ok: bool,
    pub grim_ok: bool,
    /// Largest `||θ| − π|` over fingers.
    pub angle_defect: f64,
    /// Largest grim-fit distance over sharp vertices.
    pub grim_distance: f64,
}

impl TromboneFrame {
    pub fn all(&self) -> bool {
        self.bumpy && self.one_vertex_per_finger && self.same_sign && self.angle_ok && self.grim_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TromboneReport {
    pub eps: f64,
    pub frames: Vec<TromboneFrame>,
    /// Latest `τ` such that every frame up to it passes.
    pub tau_eps: Option<f64>,
    /// Passing frames form an initial segment of the window.
    pub prefix: bool,
}

fn arc_between(a: f64, b: f64, x: f64) -> bool {
    if a < b {
        x > a && x < b
    } else {
        x > a || x < b
    }
}

fn trombone_frame(curve: &DiscreteCurve, tau: f64, eps: f64, x0: Vec2) -> Result<TromboneFrame> {
    let frame = curve.frame()?;
    let crit = detect_critical(&distance_profile_with(curve, &frame, x0), MULTIPLE_TOL)?;
    let verts = detect_vertices_with(curve, &frame, VERTEX_TOL)?;
    let s = &frame.arclengths;
    let mut one = !crit.fingers.is_empty();
    let mut same = true;
    let mut defect = 0.0f64;
    for f in &crit.fingers {
        let (a, b) = (s[f.knuckles.0], s[f.knuckles.1]);
        let inside: Vec<_> = verts
            .sharp
            .iter()
            .filter(|v| arc_between(a, b, v.arc))
            .collect();
        one &= inside.len() == 1;
        let kt = frame.kappa[f.tip];
        same &= inside.iter().all(|v| frame.kappa[v.index] * kt > 0.0);
        let th = turning_angle(curve, f.knuckles.0, f.knuckles.1);
        defect = defect.max((th.abs() - PI).abs());
    }
    let mut grim = 0.0f64;
    for v in &verts.sharp {
        let k = interpolate_field(&frame.kappa, s, frame.length, curve.is_closed(), v.arc);
        let fit = grim_fit_curve(curve, v.arc, 1.0 / k.abs(), GRIM_WINDOW_CAP)?;
        grim = grim.max(fit.c2_distance);
    }
    Ok(TromboneFrame {
        tau,
        bumpy: verts.bumpy,
        one_vertex_per_finger: one,
        same_sign: same,
        angle_ok: defect < eps,
        grim_ok: grim < eps / 100.0,
        angle_defect: defect,
        grim_distance: grim,
    })
}

/// Per-frame finger, vertex, angle and grim-reaper conditions on a rescaled
/// trajectory, with the latest time up to which all of them hold.
pub fn trombone_check(
    traj: &FlowTrajectory,
    eps: f64,
    x0: Vec2,
    exec: Exec,
) -> Result<TromboneReport> {
    if traj.mode() != Some(FlowMode::Rescaled) {
        return Err(CsfError::InvalidInput(
            "trombone_check needs a rescaled trajectory".into(),
        ));
    }
    let frames: Vec<Result<TromboneFrame>> =
        par::map(exec, &traj.frames, |f| {
            match trombone_frame(&f.curve, f.time, eps, x0) {
                Err(CsfError::DegenerateVertexSet) | Err(CsfError::DegenerateProfile) => {
                    Ok(TromboneFrame {
                        tau: f.time,
                        bumpy: false,
                        one_vertex_per_finger: false,
                        same_sign: false,
                        angle_ok: false,
                        grim_ok: false,
                        angle_defect: f64::INFINITY,
                        grim_distance: f64::INFINITY,
                    })
                }
                r => r,
            }
        });
    let frames: Vec<TromboneFrame> = frames.into_iter().collect::<Result<_>>()?;
    let passing = frames.iter().take_while(|f| f.all()).count();
    let tau_eps = passing.checked_sub(1).map(|k| frames[k].tau);
    let prefix = frames[passing..].iter().all(|f| !f.all());
    Ok(TromboneReport {
        eps,
        frames,
        tau_eps,
        prefix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactFamily;

    #[test]
    fn reaper_fits_itself() {
        let c = ExactFamily::grim_reaper(1.45).sample(0.0, 1025).unwrap();
        let fit = grim_fit_curve(&c, 0.5 * c.length(), 1.0, 1.4).unwrap();
        assert!(fit.c2_distance < 1e-3, "{fit:?}");
    }

    #[test]
    fn reaper_tip_relations() {
        let c = ExactFamily::grim_reaper(1.45).sample(0.0, 1025).unwrap();
        let r = tip_relations_check(&c, 512, 1.0, 1.3).unwrap();
        assert!(r.r0 < 1e-2 && r.r1 < 1e-2 && r.r2 < 1e-2, "{r:?}");
    }

    #[test]
    fn circle_mismatch_is_large() {
        let c = ExactFamily::circle().sample(-0.5, 256).unwrap();
        let r = tip_relations_check(&c, 0, 0.5, 1.0).unwrap();
        assert!(r.r1 > 0.1, "{r:?}");
    }

    #[test]
    fn parallel_lines_radius() {
        let h = 1e-2;
        let line = |y: f64| {
            DiscreteCurve::open(
                (0..201)
                    .map(|i| Vec2::new(-50.0 + i as f64 * 0.5, y))
                    .collect(),
            )
            .unwrap()
        };
        let r = graphical_radius(&[line(h), line(-h)], 0.0, 0.0, 0.05, 2).unwrap();
        assert!((r.rho - h.powf(-0.25)).abs() < 1e-9, "{r:?}");
        assert!(r.bounds_hold());
    }

    #[test]
    fn circle_sheet_mismatch() {
        let c = ExactFamily::circle().sample(-1.0, 256).unwrap();
        assert!(matches!(
            graphical_radius(&[c], 0.0, 0.0, 0.05, 2),
            Err(CsfError::SheetCountMismatch { .. })
        ));
    }
}
