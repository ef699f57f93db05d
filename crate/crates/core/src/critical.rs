//! Critical points of the squared distance `φ = |γ − x0|² + 2t` and of the
//! curvature, their decomposition of the curve, Sturm-type zero counting and
//! tracking of critical points from frame to frame.

use serde::{Deserialize, Serialize};

use crate::flow::{FlowMode, FlowTrajectory};
use crate::geometry::{segments_intersect, DiscreteCurve, FrameData, Vec2};
use crate::par::{self, Exec};
use crate::zeros::{self, ZeroCluster};
use crate::{CsfError, Result};

/// Relative threshold below which `φ_s` samples count as zero.
pub const PROFILE_ZERO_TOL: f64 = 1e-8;
/// Default threshold on `|φ_ss|` below which a critical point is multiple.
pub const MULTIPLE_TOL: f64 = 1e-4;
/// Default relative threshold for zeros of `κ` and `κ_s`.
pub const VERTEX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub x0: Vec2,
    pub phi: Vec<f64>,
    pub phi_s: Vec<f64>,
    pub phi_ss: Vec<f64>,
    pub arclengths: Vec<f64>,
    pub positions: Vec<Vec2>,
    pub length: f64,
    pub closed: bool,
}

pub fn distance_profile(curve: &DiscreteCurve, x0: Vec2) -> Result<DistanceProfile> {
    let frame = curve.frame()?;
    Ok(distance_profile_with(curve, &frame, x0))
}

pub fn distance_profile_with(
    curve: &DiscreteCurve,
    frame: &FrameData,
    x0: Vec2,
) -> DistanceProfile {
    let t = curve.time().unwrap_or(0.0);
    let n = curve.len();
    let mut phi = Vec::with_capacity(n);
    let mut phi_s = Vec::with_capacity(n);
    let mut phi_ss = Vec::with_capacity(n);
    for i in 0..n {
        let d = curve.point(i) - x0;
        phi.push(d.norm_sq() + 2.0 * t);
        phi_s.push(2.0 * d.dot(frame.tangents[i]));
        phi_ss.push(2.0 + 2.0 * frame.kappa[i] * d.dot(frame.normals[i]));
    }
    DistanceProfile {
        x0,
        phi,
        phi_s,
        phi_ss,
        arclengths: frame.arclengths.clone(),
        positions: curve.points().to_vec(),
        length: frame.length,
        closed: curve.is_closed(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Tip,
    Knuckle,
    SharpVertex,
    FlatVertex,
    Inflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplicity {
    Simple,
    Multiple,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub kind: PointKind,
    /// Nearest vertex.
    pub index: usize,
    /// Interpolated arc-length location.
    pub arc: f64,
    pub position: Vec2,
    pub multiplicity: Multiplicity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Finger {
    /// Knuckle indices in orientation order (start, end).
    pub knuckles: (usize, usize),
    /// Interpolated arc-length locations of the two knuckles.
    pub knuckle_arcs: (f64, f64),
    pub tip: usize,
}

impl Finger {
    /// Finger between two vertices, with the knuckles placed exactly on them.
    pub fn between_vertices(curve: &DiscreteCurve, a: usize, b: usize, tip: usize) -> Self {
        let mut s = 0.0;
        let mut sa = 0.0;
        let mut sb = 0.0;
        for i in 0..curve.len() {
            if i == a {
                sa = s;
            }
            if i == b {
                sb = s;
            }
            if i < curve.edge_count() {
                s += curve.edge(i).norm();
            }
        }
        Finger {
            knuckles: (a, b),
            knuckle_arcs: (sa, sb),
            tip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tail {
    pub knuckle: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub x0: Vec2,
    pub tips: Vec<CriticalPoint>,
    pub knuckles: Vec<CriticalPoint>,
    pub fingers: Vec<Finger>,
    pub tails: Vec<Tail>,
}

impl CriticalReport {
    pub fn any_multiple(&self) -> bool {
        self.tips
            .iter()
            .chain(&self.knuckles)
            .any(|c| c.multiplicity == Multiplicity::Multiple)
    }
}

/// Position at arc length `s` on the polyline, by linear interpolation.
pub fn point_at_arc(
    points: &[Vec2],
    arclengths: &[f64],
    length: f64,
    closed: bool,
    s: f64,
) -> Vec2 {
    let n = points.len();
    let s = if closed {
        s.rem_euclid(length)
    } else {
        s.clamp(0.0, arclengths[n - 1])
    };
    let i = arclengths.partition_point(|&a| a <= s).clamp(1, n) - 1;
    let (j, end) = if i + 1 < n {
        (i + 1, arclengths[i + 1])
    } else if closed {
        (0, length)
    } else {
        return points[n - 1];
    };
    let w = (s - arclengths[i]) / (end - arclengths[i]);
    points[i] * (1.0 - w) + points[j] * w
}

/// Unit tangent at arc length `s`, interpolated between vertex tangents.
pub fn interpolate_tangent(frame: &FrameData, s: f64) -> Vec2 {
    let n = frame.len();
    let s = if frame.closed {
        s.rem_euclid(frame.length)
    } else {
        s.clamp(0.0, frame.arclengths[n - 1])
    };
    let i = frame.arclengths.partition_point(|&a| a <= s).clamp(1, n) - 1;
    let (j, end) = if i + 1 < n {
        (i + 1, frame.arclengths[i + 1])
    } else if frame.closed {
        (0, frame.length)
    } else {
        return frame.tangents[n - 1];
    };
    let w = (s - frame.arclengths[i]) / (end - frame.arclengths[i]);
    (frame.tangents[i] * (1.0 - w) + frame.tangents[j] * w).normalized()
}

/// Linear interpolation of a per-vertex field at arc length `s`.
pub fn interpolate_field(
    values: &[f64],
    arclengths: &[f64],
    length: f64,
    closed: bool,
    s: f64,
) -> f64 {
    let n = values.len();
    let s = if closed {
        s.rem_euclid(length)
    } else {
        s.clamp(0.0, arclengths[n - 1])
    };
    let i = arclengths.partition_point(|&a| a <= s).clamp(1, n) - 1;
    let (j, end) = if i + 1 < n {
        (i + 1, arclengths[i + 1])
    } else if closed {
        (0, length)
    } else {
        return values[n - 1];
    };
    let w = (s - arclengths[i]) / (end - arclengths[i]);
    values[i] * (1.0 - w) + values[j] * w
}

fn cluster_point(
    c: &ZeroCluster,
    values: &[f64],
    s: &[f64],
    positions: &[Vec2],
    length: f64,
    closed: bool,
    kind: PointKind,
) -> CriticalPoint {
    let period = closed.then_some(length);
    let arc = c.location(values, s, period);
    CriticalPoint {
        kind,
        index: c.nearest_index(values, s, period),
        arc,
        position: point_at_arc(positions, s, length, closed, arc),
        multiplicity: Multiplicity::Simple,
    }
}

/// Tips (maxima of `φ`) and knuckles (minima), fingers and tails.
pub fn detect_critical(profile: &DistanceProfile, multiple_tol: f64) -> Result<CriticalReport> {
    let scale = profile
        .positions
        .iter()
        .map(|p| (*p - profile.x0).norm())
        .fold(0.0f64, f64::max);
    if zeros::max_abs(&profile.phi_s) <= 1e-9 * 2.0 * scale {
        return Err(CsfError::DegenerateProfile);
    }
    let clusters = zeros::clusters(&profile.phi_s, profile.closed, PROFILE_ZERO_TOL);
    let mut tips = Vec::new();
    let mut knuckles = Vec::new();
    for c in clusters.iter().filter(|c| c.crossing) {
        let kind = if c.direction < 0 {
            PointKind::Tip
        } else {
            PointKind::Knuckle
        };
        let mut p = cluster_point(
            c,
            &profile.phi_s,
            &profile.arclengths,
            &profile.positions,
            profile.length,
            profile.closed,
            kind,
        );
        let pss = interpolate_field(
            &profile.phi_ss,
            &profile.arclengths,
            profile.length,
            profile.closed,
            p.arc,
        );
        if pss.abs() < multiple_tol {
            p.multiplicity = Multiplicity::Multiple;
        }
        if kind == PointKind::Tip {
            tips.push(p);
        } else {
            knuckles.push(p);
        }
    }
    let (fingers, tails) =
        assemble_fingers(&tips, &knuckles, profile.closed, profile.positions.len());
    Ok(CriticalReport {
        x0: profile.x0,
        tips,
        knuckles,
        fingers,
        tails,
    })
}

fn assemble_fingers(
    tips: &[CriticalPoint],
    knuckles: &[CriticalPoint],
    closed: bool,
    n: usize,
) -> (Vec<Finger>, Vec<Tail>) {
    let mut fingers = Vec::new();
    let mut tails = Vec::new();
    let mut ks: Vec<&CriticalPoint> = knuckles.iter().collect();
    ks.sort_by(|a, b| a.arc.total_cmp(&b.arc));
    let between = |a: f64, b: f64, x: f64| {
        if a < b {
            x > a && x < b
        } else {
            x > a || x < b
        }
    };
    let m = ks.len();
    let pairs = if closed { m } else { m.saturating_sub(1) };
    for k in 0..pairs {
        let (a, b) = (ks[k], ks[(k + 1) % m]);
        let inside: Vec<&CriticalPoint> = tips
            .iter()
            .filter(|t| {
                if m == 1 {
                    true
                } else {
                    between(a.arc, b.arc, t.arc)
                }
            })
            .collect();
        if let Some(tip) = inside.first() {
            fingers.push(Finger {
                knuckles: (a.index, b.index),
                knuckle_arcs: (a.arc, b.arc),
                tip: tip.index,
            });
        }
    }
    if !closed && m > 0 {
        tails.push(Tail {
            knuckle: ks[0].index,
            end: 0,
        });
        tails.push(Tail {
            knuckle: ks[m - 1].index,
            end: n - 1,
        });
    }
    (fingers, tails)
}

/// Area enclosed by the finger arc (knuckle → tip → knuckle, along the
/// orientation) and the chord joining the two knuckles. The chord ends are
/// the interpolated knuckle locations, not the nearest vertices.
pub fn finger_region_area(curve: &DiscreteCurve, finger: &Finger) -> Result<f64> {
    let n = curve.len();
    let closed = curve.is_closed();
    let mut s = Vec::with_capacity(n);
    let mut acc = 0.0;
    for i in 0..n {
        s.push(acc);
        if i < curve.edge_count() {
            acc += curve.edge(i).norm();
        }
    }
    let length = acc;
    let (sa, sb) = finger.knuckle_arcs;
    if !closed && sb <= sa {
        return Err(CsfError::InvalidInput(
            "finger knuckles out of order".into(),
        ));
    }
    // vertices strictly between the knuckles
    let ia = s.partition_point(|&v| v <= sa);
    let ib = s.partition_point(|&v| v < sb);
    let (ia, ib) = if closed { (ia % n, ib % n) } else { (ia, ib) };
    let inner = if closed { (ib + n - ia) % n } else { ib - ia };
    let mut arc = Vec::with_capacity(inner + 2);
    arc.push(point_at_arc(curve.points(), &s, length, closed, sa));
    arc.extend((0..inner).map(|k| curve.point((ia + k) % n)));
    arc.push(point_at_arc(curve.points(), &s, length, closed, sb));
    let m = arc.len();
    if m < 3 {
        return Ok(0.0);
    }
    let (pa, pb) = (arc[0], arc[m - 1]);
    for e in 1..m - 2 {
        if segments_intersect(pb, pa, arc[e], arc[e + 1]) {
            return Err(CsfError::SelfCrossingChord);
        }
    }
    let area: f64 = (0..m).map(|k| arc[k].cross(arc[(k + 1) % m])).sum::<f64>() * 0.5;
    Ok(area.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeCheck {
    /// Indices of the sharp vertices bounding the edge.
    pub from: usize,
    pub to: usize,
    pub inflections: usize,
    pub flats: usize,
    /// One inflection for opposite end signs, one flat vertex otherwise.
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexReport {
    pub sharp: Vec<CriticalPoint>,
    pub flat: Vec<CriticalPoint>,
    pub inflections: Vec<CriticalPoint>,
    pub edges: Vec<EdgeCheck>,
    pub bumpy: bool,
    /// Touching zeros of `κ` or `κ_s` below resolution (reported, not counted).
    pub unresolved: usize,
}

/// Vertices (critical points of `κ`) and inflections (zeros of `κ`).
pub fn detect_vertices(curve: &DiscreteCurve, tol: f64) -> Result<VertexReport> {
    let frame = curve.frame()?;
    detect_vertices_with(curve, &frame, tol)
}

pub fn detect_vertices_with(
    curve: &DiscreteCurve,
    frame: &FrameData,
    tol: f64,
) -> Result<VertexReport> {
    let kmax = frame.max_abs_kappa();
    if zeros::max_abs(&frame.kappa_s) <= 1e-6 * kmax * kmax {
        return Err(CsfError::DegenerateVertexSet);
    }
    let closed = curve.is_closed();
    let pts = curve.points();
    let s = &frame.arclengths;
    let ks_clusters = zeros::clusters(&frame.kappa_s, closed, tol);
    let k_clusters = zeros::clusters(&frame.kappa, closed, tol);
    let mut sharp = Vec::new();
    let mut flat = Vec::new();
    for c in ks_clusters.iter().filter(|c| c.crossing) {
        let sign = (frame.kappa[c.left] + frame.kappa[c.right]).signum();
        // direction −1: κ has a local max; it is a max of |κ| when κ > 0
        let is_max_abs = (c.direction < 0) == (sign > 0.0);
        let kind = if is_max_abs {
            PointKind::SharpVertex
        } else {
            PointKind::FlatVertex
        };
        let p = cluster_point(c, &frame.kappa_s, s, pts, frame.length, closed, kind);
        if is_max_abs {
            sharp.push(p);
        } else {
            flat.push(p);
        }
    }
    let inflections: Vec<CriticalPoint> = k_clusters
        .iter()
        .filter(|c| c.crossing)
        .map(|c| {
            cluster_point(
                c,
                &frame.kappa,
                s,
                pts,
                frame.length,
                closed,
                PointKind::Inflection,
            )
        })
        .collect();
    let multiple = ks_clusters.iter().chain(&k_clusters).any(|c| c.multiple);
    let unresolved = ks_clusters
        .iter()
        .chain(&k_clusters)
        .filter(|c| !c.crossing && !c.multiple)
        .count();
    let edges = edge_checks(&sharp, &flat, &inflections, frame, closed);
    Ok(VertexReport {
        sharp,
        flat,
        inflections,
        edges,
        bumpy: !multiple,
        unresolved,
    })
}

fn edge_checks(
    sharp: &[CriticalPoint],
    flat: &[CriticalPoint],
    infl: &[CriticalPoint],
    frame: &FrameData,
    closed: bool,
) -> Vec<EdgeCheck> {
    let mut sv: Vec<&CriticalPoint> = sharp.iter().collect();
    sv.sort_by(|a, b| a.arc.total_cmp(&b.arc));
    let m = sv.len();
    let pairs = if closed { m } else { m.saturating_sub(1) };
    let mut out = Vec::new();
    for k in 0..pairs {
        let (a, b) = (sv[k], sv[(k + 1) % m]);
        let inside = |x: f64| {
            if m == 1 {
                x != a.arc
            } else if a.arc < b.arc {
                x > a.arc && x < b.arc
            } else {
                x > a.arc || x < b.arc
            }
        };
        let inflections = infl.iter().filter(|p| inside(p.arc)).count();
        let flats = flat.iter().filter(|p| inside(p.arc)).count();
        let same = frame.kappa[a.index] * frame.kappa[b.index] > 0.0;
        let ok = if same {
            flats == 1 && inflections == 0
        } else {
            inflections == 1 && flats == 0
        };
        out.push(EdgeCheck {
            from: a.index,
            to: b.index,
            inflections,
            flats,
            ok,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Nonvanishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroCount {
    pub count: usize,
    pub multiple: bool,
}

/// Number of zeros of a sampled function. Sign changes are simple zeros; a
/// same-sign stretch that dips through zero is one multiple zero.
pub fn count_zeros(samples: &[f64], boundary: Boundary, tol: f64) -> Result<ZeroCount> {
    let closed = boundary == Boundary::Periodic;
    if samples.is_empty() {
        return Ok(ZeroCount {
            count: 0,
            multiple: false,
        });
    }
    if !closed {
        let thr = tol * zeros::max_abs(samples);
        let n = samples.len();
        if samples[0].abs() <= thr || samples[n - 1].abs() <= thr {
            return Err(CsfError::BoundaryViolated(format!(
                "end values {:e}, {:e} vanish",
                samples[0],
                samples[n - 1]
            )));
        }
    }
    let cl = zeros::clusters(samples, closed, tol);
    Ok(ZeroCount {
        count: cl.iter().filter(|c| c.counts()).count(),
        multiple: cl.iter().any(|c| c.multiple),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "field")]
pub enum ZeroField {
    PhiS { x0: Vec2 },
    Kappa,
    KappaS,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroMonotonicity {
    pub times: Vec<f64>,
    pub counts: Vec<usize>,
    pub multiple: Vec<bool>,
    /// Frames whose count exceeds the previous frame's.
    pub violations: Vec<usize>,
}

impl ZeroMonotonicity {
    pub fn non_increasing(&self) -> bool {
        self.violations.is_empty()
    }
}

fn field_values(curve: &DiscreteCurve, field: &ZeroField) -> Result<Vec<f64>> {
    let frame = curve.frame()?;
    Ok(match field {
        ZeroField::PhiS { x0 } => distance_profile_with(curve, &frame, *x0).phi_s,
        ZeroField::Kappa => frame.kappa,
        ZeroField::KappaS => frame.kappa_s,
    })
}

/// Zero counts of a field over the frames of a trajectory.
pub fn zero_monotonicity_check(
    traj: &FlowTrajectory,
    field: &ZeroField,
    tol: f64,
    exec: Exec,
) -> Result<ZeroMonotonicity> {
    let counts: Vec<Result<ZeroCount>> = par::map(exec, &traj.frames, |f| {
        let v = field_values(&f.curve, field)?;
        let boundary = if f.curve.is_closed() {
            Boundary::Periodic
        } else {
            Boundary::Nonvanishing
        };
        count_zeros(&v, boundary, tol)
    });
    let counts: Vec<ZeroCount> = counts.into_iter().collect::<Result<_>>()?;
    let violations = (1..counts.len())
        .filter(|&i| counts[i].count > counts[i - 1].count)
        .collect();
    Ok(ZeroMonotonicity {
        times: traj.times(),
        counts: counts.iter().map(|c| c.count).collect(),
        multiple: counts.iter().map(|c| c.multiple).collect(),
        violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub frame: usize,
    pub index: usize,
    pub arc: f64,
    /// Arc length divided by total length.
    pub fraction: f64,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub id: usize,
    pub kind: PointKind,
    pub birth: usize,
    /// First frame on which the path no longer exists.
    pub death: Option<usize>,
    pub entries: Vec<PathEntry>,
}

impl Path {
    pub fn entry(&self, frame: usize) -> Option<&PathEntry> {
        if frame < self.birth {
            return None;
        }
        self.entries.get(frame - self.birth)
    }

    pub fn alive_on_all(&self, frames: usize) -> bool {
        self.birth == 0 && self.entries.len() == frames
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub kind: PointKind,
    pub paths: Vec<Path>,
    /// `(frame, path id)` pairs where two candidates tied within 1e-9.
    pub ties: Vec<(usize, usize)>,
    /// Frames where a path was born after the first frame.
    pub births: Vec<usize>,
}

/// Critical points of one kind on a frame.
pub fn detect_kind(curve: &DiscreteCurve, kind: PointKind, x0: Vec2) -> Result<Vec<CriticalPoint>> {
    Ok(match kind {
        PointKind::Tip | PointKind::Knuckle => {
            let r = detect_critical(&distance_profile(curve, x0)?, MULTIPLE_TOL)?;
            if kind == PointKind::Tip {
                r.tips
            } else {
                r.knuckles
            }
        }
        _ => {
            let r = detect_vertices(curve, VERTEX_TOL)?;
            match kind {
                PointKind::SharpVertex => r.sharp,
                PointKind::FlatVertex => r.flat,
                _ => r.inflections,
            }
        }
    })
}

fn max_speed(curve: &DiscreteCurve, mode: FlowMode) -> Result<f64> {
    let f = curve.frame()?;
    Ok(curve
        .points()
        .iter()
        .zip(&f.kappa)
        .zip(&f.normals)
        .map(|((p, k), n)| match mode {
            FlowMode::Physical => k.abs(),
            FlowMode::Rescaled => (k + 0.5 * p.dot(*n)).abs(),
        })
        .fold(0.0, f64::max))
}

/// Frame-to-frame matching of critical points of one kind.
///
/// Candidates are matched greedily by arc-length-fraction distance, subject
/// to a displacement gate of `5·(max point speed)·Δt` plus two mesh widths.
pub fn track_paths(
    traj: &FlowTrajectory,
    kind: PointKind,
    x0: Option<Vec2>,
    exec: Exec,
) -> Result<PathSet> {
    let x0 = x0.unwrap_or(Vec2::ZERO);
    let per_frame: Vec<Result<(Vec<CriticalPoint>, f64, f64, f64)>> =
        par::map(exec, &traj.frames, |f| {
            let pts = detect_kind(&f.curve, kind, x0)?;
            let len = f.curve.length();
            let hmax = f.curve.edge_lengths().into_iter().fold(0.0, f64::max);
            Ok((pts, len, max_speed(&f.curve, f.mode)?, hmax))
        });
    let per_frame: Vec<_> = per_frame.into_iter().collect::<Result<_>>()?;
    let closed = traj.frames.first().is_some_and(|f| f.curve.is_closed());
    let mut paths: Vec<Path> = Vec::new();
    let mut ties = Vec::new();
    let mut births = Vec::new();
    let to_entry = |fi: usize, p: &CriticalPoint, len: f64| PathEntry {
        frame: fi,
        index: p.index,
        arc: p.arc,
        fraction: p.arc / len,
        position: p.position,
    };
    for (fi, (pts, len, _, _)) in per_frame.iter().enumerate().take(1) {
        for p in pts {
            paths.push(Path {
                id: paths.len(),
                kind,
                birth: fi,
                death: None,
                entries: vec![to_entry(fi, p, *len)],
            });
        }
    }
    for fi in 1..per_frame.len() {
        let (pts, len, _, hmax) = &per_frame[fi];
        let (_, _, speed, hprev) = &per_frame[fi - 1];
        let dt = traj.frames[fi].time - traj.frames[fi - 1].time;
        let gate = 5.0 * speed.max(per_frame[fi].2) * dt + 2.0 * hmax.max(*hprev);
        let alive: Vec<usize> = paths
            .iter()
            .filter(|p| p.death.is_none())
            .map(|p| p.id)
            .collect();
        let frac_dist = |a: f64, b: f64| {
            let d = (a - b).abs();
            if closed {
                d.min(1.0 - d)
            } else {
                d
            }
        };
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for &pid in &alive {
            let last = paths[pid].entries.last().unwrap();
            let mut local: Vec<(f64, usize)> = Vec::new();
            for (ci, c) in pts.iter().enumerate() {
                if (c.position - last.position).norm() <= gate {
                    local.push((frac_dist(last.fraction, c.arc / len), ci));
                }
            }
            local.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if local.len() >= 2 && (local[1].0 - local[0].0).abs() < 1e-9 {
                ties.push((fi, pid));
            }
            pairs.extend(local.into_iter().map(|(d, ci)| (d, pid, ci)));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
        let mut path_done = vec![false; paths.len()];
        let mut cand_done = vec![false; pts.len()];
        for (_, pid, ci) in pairs {
            if path_done[pid] || cand_done[ci] {
                continue;
            }
            path_done[pid] = true;
            cand_done[ci] = true;
            let e = to_entry(fi, &pts[ci], *len);
            paths[pid].entries.push(e);
        }
        for &pid in &alive {
            if !path_done[pid] {
                paths[pid].death = Some(fi);
            }
        }
        for (ci, c) in pts.iter().enumerate() {
            if !cand_done[ci] {
                births.push(fi);
                let id = paths.len();
                paths.push(Path {
                    id,
                    kind,
                    birth: fi,
                    death: None,
                    entries: vec![to_entry(fi, c, *len)],
                });
            }
        }
    }
    Ok(PathSet {
        kind,
        paths,
        ties,
        births,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMonotonicity {
    pub path: usize,
    pub kind: PointKind,
    /// Largest violation of `φ` monotonicity (≤ slack means pass).
    pub phi_violation: f64,
    /// Largest decrease of `(−t)^{-1}|γ(p) − x0|²` (knuckle paths only).
    pub scaled_violation: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremumReport {
    pub slack: f64,
    pub paths: Vec<PathMonotonicity>,
    pub passed: bool,
}

/// Monotonicity of `φ` along tip and knuckle paths of a physical trajectory
/// with `t < 0`: non-decreasing on knuckles, non-increasing on tips, and
/// `(−t)^{-1}|γ(p)|²` increasing on knuckles.
pub fn extremum_path_check(
    traj: &FlowTrajectory,
    paths: &PathSet,
    x0: Vec2,
    slack: f64,
) -> Result<ExtremumReport> {
    if traj.mode() != Some(FlowMode::Physical) {
        return Err(CsfError::InvalidInput(
            "extremum_path_check needs a physical trajectory".into(),
        ));
    }
    if traj.end() >= 0.0 {
        return Err(CsfError::OutOfDomain {
            what: "extremum_path_check (t < 0 required)".into(),
            time: traj.end(),
        });
    }
    let mut out = Vec::new();
    for p in &paths.paths {
        let mut phi_violation = 0.0f64;
        let mut scaled_violation = 0.0f64;
        let mut prev: Option<(f64, f64)> = None;
        for e in &p.entries {
            let t = traj.frames[e.frame].time;
            let d2 = (e.position - x0).norm_sq();
            let phi = d2 + 2.0 * t;
            let scaled = d2 / (-t);
            if let Some((pp, ps)) = prev {
                let dphi = phi - pp;
                match p.kind {
                    PointKind::Knuckle => {
                        phi_violation = phi_violation.max(-dphi);
                        scaled_violation = scaled_violation.max(ps - scaled);
                    }
                    _ => phi_violation = phi_violation.max(dphi),
                }
            }
            prev = Some((phi, scaled));
        }
        let scaled = (p.kind == PointKind::Knuckle).then_some(scaled_violation);
        let passed = phi_violation <= slack && scaled.is_none_or(|v| v <= slack);
        out.push(PathMonotonicity {
            path: p.id,
            kind: p.kind,
            phi_violation,
            scaled_violation: scaled,
            passed,
        });
    }
    let passed = out.iter().all(|p| p.passed);
    Ok(ExtremumReport {
        slack,
        paths: out,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterClass {
    LocalMax,
    LocalMin,
    OsculatingDegenerate,
}

/// Classifies vertex `s0` as a critical point of `φ` for the centre
/// `x0 = γ(s0) + (β/κ) n(s0)` on the normal line, for which
/// `φ_ss(s0) = 2 − 2β`.
pub fn classify_center(curve: &DiscreteCurve, s0: usize, beta: f64) -> Result<CenterClass> {
    let frame = curve.frame()?;
    let k = frame.kappa[s0];
    if k == 0.0 {
        return Err(CsfError::ZeroCurvature(s0));
    }
    let x0 = curve.point(s0) + frame.normals[s0] * (beta / k);
    let prof = distance_profile_with(curve, &frame, x0);
    let pss = prof.phi_ss[s0];
    Ok(if pss.abs() < 1e-6 {
        CenterClass::OsculatingDegenerate
    } else if pss < 0.0 {
        CenterClass::LocalMax
    } else {
        CenterClass::LocalMin
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactFamily;
    use std::f64::consts::PI;

    fn ellipse(a: f64, b: f64, n: usize) -> DiscreteCurve {
        let pts = (0..n)
            .map(|i| {
                let th = 2.0 * PI * (i as f64 + 0.25) / n as f64;
                Vec2::new(a * th.cos(), b * th.sin())
            })
            .collect();
        DiscreteCurve::closed(pts).unwrap()
    }

    #[test]
    fn ellipse_tips_and_knuckles() {
        let c = ellipse(2.0, 1.0, 400);
        let r = detect_critical(&distance_profile(&c, Vec2::ZERO).unwrap(), MULTIPLE_TOL).unwrap();
        assert_eq!(r.tips.len(), 2);
        assert_eq!(r.knuckles.len(), 2);
        assert_eq!(r.fingers.len(), 2);
        for t in &r.tips {
            assert!((t.position.x.abs() - 2.0).abs() < 1e-3);
        }
        for k in &r.knuckles {
            assert!((k.position.y.abs() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn centered_circle_is_degenerate() {
        let c = ExactFamily::circle().sample(-0.5, 64).unwrap();
        let p = distance_profile(&c, Vec2::ZERO).unwrap();
        assert!(matches!(
            detect_critical(&p, MULTIPLE_TOL),
            Err(CsfError::DegenerateProfile)
        ));
        assert!(matches!(
            detect_vertices(&c, VERTEX_TOL),
            Err(CsfError::DegenerateVertexSet)
        ));
    }

    #[test]
    fn ellipse_vertices() {
        let c = ellipse(2.0, 1.0, 400);
        let v = detect_vertices(&c, VERTEX_TOL).unwrap();
        assert_eq!(v.sharp.len(), 2);
        assert_eq!(v.flat.len(), 2);
        assert!(v.inflections.is_empty());
        assert!(v.bumpy);
        assert!(v.edges.iter().all(|e| e.ok));
    }

    #[test]
    fn osculating_classes() {
        let c = ExactFamily::circle().sample(-0.5, 128).unwrap();
        assert_eq!(classify_center(&c, 3, 2.0).unwrap(), CenterClass::LocalMax);
        assert_eq!(classify_center(&c, 3, 0.5).unwrap(), CenterClass::LocalMin);
        assert_eq!(
            classify_center(&c, 3, 1.0).unwrap(),
            CenterClass::OsculatingDegenerate
        );
    }

    #[test]
    fn semicircle_area() {
        let pts: Vec<Vec2> = (0..=200)
            .map(|i| {
                let a = PI * i as f64 / 200.0;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        let c = DiscreteCurve::open(pts).unwrap();
        let f = Finger::between_vertices(&c, 0, 200, 100);
        let a = finger_region_area(&c, &f).unwrap();
        assert!((a - PI / 2.0).abs() < 1e-3);
    }

    #[test]
    fn zero_counts() {
        let n = 360;
        let s: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * i as f64 / n as f64).sin())
            .collect();
        assert_eq!(count_zeros(&s, Boundary::Periodic, 1e-9).unwrap().count, 2);
        assert!(matches!(
            count_zeros(&s, Boundary::Nonvanishing, 1e-9),
            Err(CsfError::BoundaryViolated(_))
        ));
    }
}
