//! Discrete planar curves and their differential geometry.
//!
//! Conventions: the unit normal is `n = J t` with `J(x, y) = (-y, x)`, closed
//! curves run counterclockwise, and `κ = ⟨γ_ss, n⟩` is positive where the
//! curve bends toward `n`. Curvature comes from the circle through each
//! point triple (Menger curvature), `κ_s` from nonuniform finite differences
//! in arc length.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::spline::ParametricSpline;
use crate::{CsfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn normalized(self) -> Vec2 {
        self / self.norm()
    }

    /// Counterclockwise quarter turn `J`.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x / k, self.y / k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Signed Menger curvature of the triple `a, b, c` (positive for a left turn).
#[inline]
pub fn menger_curvature(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let e1 = b - a;
    let e2 = c - b;
    let denom = e1.norm() * e2.norm() * (c - a).norm();
    if denom == 0.0 {
        0.0
    } else {
        2.0 * e1.cross(e2) / denom
    }
}

/// Ordered polyline, open or closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveJson", into = "CurveJson")]
pub struct DiscreteCurve {
    points: Vec<Vec2>,
    closed: bool,
    time: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct CurveJson {
    closed: bool,
    points: Vec<Vec2>,
    time: Option<f64>,
}

impl TryFrom<CurveJson> for DiscreteCurve {
    type Error = CsfError;
    fn try_from(j: CurveJson) -> Result<Self> {
        DiscreteCurve::new(j.points, j.closed, j.time)
    }
}

impl From<DiscreteCurve> for CurveJson {
    fn from(c: DiscreteCurve) -> Self {
        CurveJson {
            closed: c.closed,
            points: c.points,
            time: c.time,
        }
    }
}

pub const MIN_POINTS: usize = 8;

impl DiscreteCurve {
    /// Validates the point list and, for closed curves, enforces
    /// counterclockwise orientation.
    pub fn new(mut points: Vec<Vec2>, closed: bool, time: Option<f64>) -> Result<Self> {
        if points.len() < MIN_POINTS {
            return Err(CsfError::InvalidCurve(format!(
                "need at least {MIN_POINTS} points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(CsfError::InvalidCurve(format!("non-finite point at {i}")));
        }
        let n = points.len();
        let edges = if closed { n } else { n - 1 };
        for i in 0..edges {
            if points[i] == points[(i + 1) % n] {
                return Err(CsfError::InvalidCurve(format!(
                    "consecutive points {i} and {} coincide",
                    (i + 1) % n
                )));
            }
        }
        if closed && signed_area(&points) < 0.0 {
            points.reverse();
        }
        Ok(DiscreteCurve {
            points,
            closed,
            time,
        })
    }

    pub fn closed(points: Vec<Vec2>) -> Result<Self> {
        Self::new(points, true, None)
    }

    pub fn open(points: Vec<Vec2>) -> Result<Self> {
        Self::new(points, false, None)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec2> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn time(&self) -> Option<f64> {
        self.time
    }

    pub fn with_time(mut self, time: Option<f64>) -> Self {
        self.time = time;
        self
    }

    pub fn point(&self, i: usize) -> Vec2 {
        self.points[i]
    }

    pub fn edge_count(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }

    /// Edge vector from point `i` to its successor.
    pub fn edge(&self, i: usize) -> Vec2 {
        let n = self.points.len();
        self.points[(i + 1) % n] - self.points[i]
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        (0..self.edge_count())
            .map(|i| self.edge(i).norm())
            .collect()
    }

    pub fn length(&self) -> f64 {
        (0..self.edge_count()).map(|i| self.edge(i).norm()).sum()
    }

    /// Shoelace area (open curves are closed by their end chord).
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }

    /// Diameter proxy: length of the bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    /// Applies `f` to every point. Closed curves are re-oriented if `f`
    /// reverses orientation.
    pub fn map_points<F: Fn(Vec2) -> Vec2>(&self, f: F) -> Result<Self> {
        DiscreteCurve::new(
            self.points.iter().map(|&p| f(p)).collect(),
            self.closed,
            self.time,
        )
    }

    pub fn rotated(&self, angle: f64) -> Self {
        self.map_points(|p| p.rotate(angle))
            .expect("rotation keeps a valid curve")
    }

    pub fn translated(&self, v: Vec2) -> Self {
        self.map_points(|p| p + v)
            .expect("translation keeps a valid curve")
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        self.map_points(|p| p * k)
    }

    pub fn reversed(&self) -> Self {
        let mut pts = self.points.clone();
        pts.reverse();
        DiscreteCurve {
            points: pts,
            closed: self.closed,
            time: self.time,
        }
    }

    /// Index of the point closest to `q`.
    pub fn nearest_index(&self, q: Vec2) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.points.iter().enumerate() {
            let d = (*p - q).norm_sq();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    pub fn frame(&self) -> Result<FrameData> {
        compute_frame(self)
    }

    pub fn spline(&self) -> Result<ParametricSpline> {
        ParametricSpline::new(&self.points, self.closed)
    }

    pub fn self_intersects(&self) -> bool {
        self_intersects(self)
    }
}

fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|i| points[i].cross(points[(i + 1) % n]))
        .sum::<f64>()
}

/// Per-vertex Frenet data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameData {
    pub arclengths: Vec<f64>,
    pub tangents: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub kappa: Vec<f64>,
    pub kappa_s: Vec<f64>,
    /// Total length (including the closing edge of a closed curve).
    pub length: f64,
    pub closed: bool,
}

impl FrameData {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    /// Arc-length derivative of any per-vertex field.
    pub fn derivative(&self, values: &[f64]) -> Vec<f64> {
        arc_derivative(values, &self.arclengths, self.closed, self.length)
    }

    pub fn max_abs_kappa(&self) -> f64 {
        self.kappa.iter().fold(0.0f64, |m, k| m.max(k.abs()))
    }
}

/// Three-point nonuniform derivative weights at the middle node.
#[inline]
fn centered_weights(h1: f64, h2: f64) -> [f64; 3] {
    [
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    ]
}

/// Second-order one-sided weights at node 0 from nodes at offsets 0, d1, d2.
#[inline]
fn one_sided_weights(d1: f64, d2: f64) -> [f64; 3] {
    [
        -(d1 + d2) / (d1 * d2),
        d2 / (d1 * (d2 - d1)),
        -d1 / (d2 * (d2 - d1)),
    ]
}

/// Derivative of sampled `values` with respect to arc length `s`.
pub fn arc_derivative(values: &[f64], s: &[f64], closed: bool, length: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        if closed || (i > 0 && i + 1 < n) {
            let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
            let mut h1 = s[i] - s[im];
            let mut h2 = s[ip] - s[i];
            if h1 <= 0.0 {
                h1 += length;
            }
            if h2 <= 0.0 {
                h2 += length;
            }
            let w = centered_weights(h1, h2);
            out[i] = w[0] * values[im] + w[1] * values[i] + w[2] * values[ip];
        } else if i == 0 {
            let w = one_sided_weights(s[1] - s[0], s[2] - s[0]);
            out[i] = w[0] * values[0] + w[1] * values[1] + w[2] * values[2];
        } else {
            let w = one_sided_weights(s[n - 2] - s[n - 1], s[n - 3] - s[n - 1]);
            out[i] = w[0] * values[n - 1] + w[1] * values[n - 2] + w[2] * values[n - 3];
        }
    }
    out
}

fn check_spacing(curve: &DiscreteCurve, lengths: &[f64]) -> Result<()> {
    let diameter = curve.diameter();
    for (edge, &length) in lengths.iter().enumerate() {
        if length < 1e-12 * diameter {
            return Err(CsfError::DegenerateSpacing {
                edge,
                length,
                diameter,
            });
        }
    }
    Ok(())
}

/// Curvatures and unit normals only; the hot path of the flow integrator.
pub(crate) fn kappa_and_normals(
    points: &[Vec2],
    closed: bool,
    kappa: &mut Vec<f64>,
    normals: &mut Vec<Vec2>,
) {
    let n = points.len();
    kappa.clear();
    normals.clear();
    for i in 0..n {
        let (t, k) = vertex_tangent_curvature(points, closed, i);
        kappa.push(k);
        normals.push(t.perp());
    }
    correct_grading(points, closed, kappa);
    if !closed {
        // linear extrapolation of curvature to the end points
        let d = |a: usize, b: usize| (points[a] - points[b]).norm();
        let (d01, d12) = (d(0, 1), d(1, 2));
        kappa[0] = kappa[1] + (kappa[1] - kappa[2]) * d01 / d12;
        let (da, db) = (d(n - 1, n - 2), d(n - 2, n - 3));
        kappa[n - 1] = kappa[n - 2] + (kappa[n - 2] - kappa[n - 3]) * da / db;
    }
}

/// Removes the first-order error `(h₂ − h₁)κ_s/3` that the three-point
/// circle picks up on unevenly spaced vertices.
fn correct_grading(points: &[Vec2], closed: bool, kappa: &mut [f64]) {
    let n = points.len();
    let raw = kappa.to_vec();
    let range = if closed { 0..n } else { 1..n - 1 };
    for i in range {
        let (a, c) = ((i + n - 1) % n, (i + 1) % n);
        let h1 = (points[i] - points[a]).norm();
        let h2 = (points[c] - points[i]).norm();
        let ks =
            (h1 * h1 * (raw[c] - raw[i]) + h2 * h2 * (raw[i] - raw[a])) / (h1 * h2 * (h1 + h2));
        kappa[i] = raw[i] - ks * (h2 - h1) / 3.0;
    }
}

/// Rotates the unit vector `u` by the angle whose sine is `s`.
#[inline]
fn rotate_by_sine(u: Vec2, s: f64) -> Vec2 {
    let s = s.clamp(-1.0, 1.0);
    let c = (1.0 - s * s).sqrt();
    Vec2::new(c * u.x - s * u.y, s * u.x + c * u.y)
}

/// Tangent and curvature from the circle through the vertex and its
/// neighbours; exact on circles.
#[inline]
fn vertex_tangent_curvature(points: &[Vec2], closed: bool, i: usize) -> (Vec2, f64) {
    let n = points.len();
    if closed || (i > 0 && i + 1 < n) {
        let a = points[(i + n - 1) % n];
        let b = points[i];
        let c = points[(i + 1) % n];
        let k = menger_curvature(a, b, c);
        let e1 = b - a;
        let e2 = c - b;
        let (l1, l2) = (e1.norm(), e2.norm());
        let t = rotate_by_sine(e1 / l1, 0.5 * k * l1) + rotate_by_sine(e2 / l2, -0.5 * k * l2);
        (t.normalized(), k)
    } else if i == 0 {
        let k = menger_curvature(points[0], points[1], points[2]);
        let e = points[1] - points[0];
        let l = e.norm();
        (rotate_by_sine(e / l, -0.5 * k * l), k)
    } else {
        let k = menger_curvature(points[n - 3], points[n - 2], points[n - 1]);
        let e = points[n - 1] - points[n - 2];
        let l = e.norm();
        (rotate_by_sine(e / l, 0.5 * k * l), k)
    }
}

pub fn compute_frame(curve: &DiscreteCurve) -> Result<FrameData> {
    let lengths = curve.edge_lengths();
    check_spacing(curve, &lengths)?;
    let n = curve.len();
    let mut arclengths = Vec::with_capacity(n);
    let mut acc = 0.0;
    arclengths.push(0.0);
    for l in lengths.iter().take(n - 1) {
        acc += l;
        arclengths.push(acc);
    }
    let length: f64 = lengths.iter().sum();
    let mut kappa = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    kappa_and_normals(curve.points(), curve.closed, &mut kappa, &mut normals);
    // t = -J n, and negating/swapping components keeps n = J t exact
    let tangents: Vec<Vec2> = normals.iter().map(|v| Vec2::new(v.y, -v.x)).collect();
    let kappa_s = arc_derivative(&kappa, &arclengths, curve.closed, length);
    Ok(FrameData {
        arclengths,
        tangents,
        normals,
        kappa,
        kappa_s,
        length,
        closed: curve.closed,
    })
}

/// How points are distributed along the curve when remeshing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SpacingPolicy {
    /// Fixed point count at uniform arc-length spacing.
    Uniform { n: usize },
    /// Curvature-adaptive spacing.
    Adaptive(AdaptiveSpacing),
}

/// Spacing `h(s) = min(h_max, angle_step/|κ|, focus_h near focus)`, clipped
/// below by `h_min` and graded so that `|h'| ≤ grading`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSpacing {
    pub angle_step: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub grading: f64,
    /// Optional finer spacing inside a disc: `(center, radius, h)`.
    pub focus: Option<(Vec2, f64, f64)>,
}

impl Default for AdaptiveSpacing {
    fn default() -> Self {
        AdaptiveSpacing {
            angle_step: 0.15,
            h_min: 1e-4,
            h_max: 0.5,
            grading: 0.2,
            focus: None,
        }
    }
}

/// Uniform arc-length resampling through a cubic spline.
pub fn resample(curve: &DiscreteCurve, n: usize) -> Result<DiscreteCurve> {
    resample_with(curve, &SpacingPolicy::Uniform { n })
}

pub fn resample_with(curve: &DiscreteCurve, policy: &SpacingPolicy) -> Result<DiscreteCurve> {
    let sp = curve.spline()?;
    let total = sp.length();
    let targets: Vec<f64> = match *policy {
        SpacingPolicy::Uniform { n } => {
            if n < MIN_POINTS {
                return Err(CsfError::InvalidInput(format!(
                    "resample needs n >= {MIN_POINTS}"
                )));
            }
            if curve.closed {
                (0..n).map(|k| total * k as f64 / n as f64).collect()
            } else {
                (0..n).map(|k| total * k as f64 / (n - 1) as f64).collect()
            }
        }
        SpacingPolicy::Adaptive(a) => adaptive_targets(&sp, curve.closed, &a)?,
    };
    let mut pts: Vec<Vec2> = targets
        .iter()
        .map(|&l| sp.eval(sp.param_at_length(l)))
        .collect();
    if !curve.closed {
        pts[0] = curve.points[0];
        let last = pts.len() - 1;
        pts[last] = curve.points[curve.len() - 1];
    }
    DiscreteCurve::new(pts, curve.closed, curve.time)
}

const ADAPTIVE_SUBSAMPLES: usize = 8;

fn adaptive_targets(sp: &ParametricSpline, closed: bool, a: &AdaptiveSpacing) -> Result<Vec<f64>> {
    let knots = sp.knots();
    let segs = knots.len() - 1;
    let m = segs * ADAPTIVE_SUBSAMPLES;
    let mut s = Vec::with_capacity(m + 1);
    let mut kappa = Vec::with_capacity(m + 1);
    let mut pos = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let seg = (k / ADAPTIVE_SUBSAMPLES).min(segs - 1);
        let frac = (k - seg * ADAPTIVE_SUBSAMPLES) as f64 / ADAPTIVE_SUBSAMPLES as f64;
        let p = knots[seg] + frac * (knots[seg + 1] - knots[seg]);
        s.push(sp.arc_length_at(p));
        kappa.push(sp.curvature(p));
        pos.push(sp.eval(p));
    }
    spacing_targets(&s, &kappa, &pos, closed, a)
}

/// Arc-length positions of the points of an adaptive mesh.
///
/// `s`, `kappa` and `pos` sample the curve on a fine increasing grid that
/// covers the whole curve (for closed curves the last sample repeats the
/// first one at `s = length`).
pub fn spacing_targets(
    s: &[f64],
    kappa: &[f64],
    pos: &[Vec2],
    closed: bool,
    a: &AdaptiveSpacing,
) -> Result<Vec<f64>> {
    if !(a.angle_step > 0.0 && a.h_min > 0.0 && a.h_max >= a.h_min && a.grading > 0.0) {
        return Err(CsfError::InvalidInput(
            "invalid adaptive spacing parameters".into(),
        ));
    }
    let m = s.len() - 1;
    let mut h: Vec<f64> = (0..=m)
        .map(|k| {
            let mut hk = a.h_max;
            if kappa[k] != 0.0 {
                hk = hk.min(a.angle_step / kappa[k].abs());
            }
            if let Some((c, r, hf)) = a.focus {
                if (pos[k] - c).norm() <= r {
                    hk = hk.min(hf);
                }
            }
            hk.max(a.h_min)
        })
        .collect();
    // grading sweeps; twice around for closed curves
    let passes = if closed { 2 } else { 1 };
    for _ in 0..passes {
        for k in 1..=m {
            h[k] = h[k].min(h[k - 1] + a.grading * (s[k] - s[k - 1]));
        }
        if closed {
            h[0] = h[0].min(h[m]);
        }
        for k in (0..m).rev() {
            h[k] = h[k].min(h[k + 1] + a.grading * (s[k + 1] - s[k]));
        }
        if closed {
            h[m] = h[m].min(h[0]);
        }
    }
    // cumulative point density
    let mut g = vec![0.0; m + 1];
    for k in 1..=m {
        g[k] = g[k - 1] + 0.5 * (1.0 / h[k] + 1.0 / h[k - 1]) * (s[k] - s[k - 1]);
    }
    let gt = g[m];
    let count = if closed {
        (gt.ceil() as usize).max(MIN_POINTS)
    } else {
        (gt.ceil() as usize + 1).max(MIN_POINTS)
    };
    let intervals = if closed { count } else { count - 1 };
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    for k in 0..count {
        let target = gt * k as f64 / intervals as f64;
        while j + 1 < m && g[j + 1] < target {
            j += 1;
        }
        let span = g[j + 1] - g[j];
        let f = if span > 0.0 {
            ((target - g[j]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(s[j] + f * (s[j + 1] - s[j]));
    }
    Ok(out)
}

/// Signed angle from `a` to `b`.
#[inline]
fn angle_between(a: Vec2, b: Vec2) -> f64 {
    a.cross(b).atan2(a.dot(b))
}

/// Integral of `κ ds` from vertex `i` to vertex `j` along the orientation.
///
/// Interior contributions are the exterior angles between consecutive edges;
/// the partial angles at the two ends use the vertex tangents. On a closed
/// curve `i == j` means the full loop.
pub fn turning_angle(curve: &DiscreteCurve, i: usize, j: usize) -> f64 {
    let n = curve.len();
    assert!(i < n && j < n, "turning_angle index out of range");
    let pts = curve.points();
    if curve.closed && i == j {
        return (0..n)
            .map(|k| angle_between(curve.edge((k + n - 1) % n), curve.edge(k)))
            .sum();
    }
    if !curve.closed && i > j {
        return -turning_angle(curve, j, i);
    }
    if i == j {
        return 0.0;
    }
    let ti = vertex_tangent_curvature(pts, curve.closed, i).0;
    let tj = vertex_tangent_curvature(pts, curve.closed, j).0;
    let steps = if curve.closed { (j + n - i) % n } else { j - i };
    let mut total = angle_between(ti, curve.edge(i));
    for k in 1..steps {
        let v = (i + k) % n;
        total += angle_between(curve.edge((v + n - 1) % n), curve.edge(v));
    }
    total + angle_between(curve.edge((j + n - 1) % n), tj)
}

#[inline]
fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

#[inline]
fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True iff two non-adjacent edges meet. Sweep over x with an active list.
pub fn self_intersects(curve: &DiscreteCurve) -> bool {
    let n = curve.len();
    let m = curve.edge_count();
    let pts = curve.points();
    let seg = |e: usize| (pts[e], pts[(e + 1) % n]);
    let mut order: Vec<(f64, f64, usize)> = (0..m)
        .map(|e| {
            let (a, b) = seg(e);
            (a.x.min(b.x), a.x.max(b.x), e)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let adjacent = |e: usize, f: usize| {
        let d = e.abs_diff(f);
        d <= 1 || (curve.closed && d == m - 1)
    };
    let mut active: Vec<(f64, usize)> = Vec::new();
    for &(xmin, xmax, e) in &order {
        active.retain(|&(amax, _)| amax >= xmin);
        let (a, b) = seg(e);
        let (ylo, yhi) = (a.y.min(b.y), a.y.max(b.y));
        for &(_, f) in &active {
            if adjacent(e, f) {
                continue;
            }
            let (c, d) = seg(f);
            if c.y.max(d.y) < ylo || c.y.min(d.y) > yhi {
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return true;
            }
        }
        active.push((xmax, e));
    }
    false
}

/// Brute-force O(n²) check; kept as an oracle for the sweep.
pub fn self_intersects_brute(curve: &DiscreteCurve) -> bool {
    let n = curve.len();
    let m = curve.edge_count();
    let pts = curve.points();
    for e in 0..m {
        for f in e + 2..m {
            if curve.closed && e == 0 && f == m - 1 {
                continue;
            }
            if segments_intersect(pts[e], pts[(e + 1) % n], pts[f], pts[(f + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Distance from `p` to the segment `a b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sq();
    let t = if l2 > 0.0 {
        ((p - a).dot(ab) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm()
}

/// Distance from `p` to the polyline.
pub fn distance_to_curve(p: Vec2, curve: &DiscreteCurve) -> f64 {
    let n = curve.len();
    let pts = curve.points();
    (0..curve.edge_count())
        .map(|e| point_segment_distance(p, pts[e], pts[(e + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric Hausdorff distance between two polylines, measured from the
/// vertices of each to the other polyline.
pub fn hausdorff(a: &DiscreteCurve, b: &DiscreteCurve) -> f64 {
    let one = |x: &DiscreteCurve, y: &DiscreteCurve| {
        x.points()
            .iter()
            .map(|&p| distance_to_curve(p, y))
            .fold(0.0f64, f64::max)
    };
    one(a, b).max(one(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn circle(r: f64, n: usize) -> DiscreteCurve {
        let pts = (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect();
        DiscreteCurve::closed(pts).unwrap()
    }

    #[test]
    fn circle_frame() {
        let c = circle(1.0, 256);
        let f = c.frame().unwrap();
        for i in 0..c.len() {
            assert!((f.kappa[i] - 1.0).abs() < 1e-4);
            assert!((f.tangents[i].norm() - 1.0).abs() < 1e-12);
            assert_eq!(f.normals[i], f.tangents[i].perp());
            // inward normal on a counterclockwise circle
            assert!((f.normals[i] + c.point(i)).norm() < 1e-10);
            assert!(f.kappa_s[i].abs() < 1e-8);
        }
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let mut pts: Vec<Vec2> = circle(1.0, 16).into_points();
        pts.reverse();
        let c = DiscreteCurve::closed(pts).unwrap();
        assert!(c.signed_area() > 0.0);
    }

    #[test]
    fn segment_frame() {
        let pts = (0..64).map(|i| Vec2::new(i as f64 / 63.0, 0.0)).collect();
        let c = DiscreteCurve::open(pts).unwrap();
        let f = c.frame().unwrap();
        for i in 0..64 {
            assert_eq!(f.kappa[i], 0.0);
            assert!((f.normals[i] - Vec2::new(0.0, 1.0)).norm() < 1e-15);
        }
        assert!(turning_angle(&c, 0, 63).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_curves() {
        assert!(DiscreteCurve::open(vec![Vec2::ZERO; 3]).is_err());
        let mut pts: Vec<Vec2> = (0..10).map(|i| Vec2::new(i as f64, 0.0)).collect();
        pts[4] = pts[3];
        assert!(matches!(
            DiscreteCurve::open(pts),
            Err(CsfError::InvalidCurve(_))
        ));
    }

    #[test]
    fn degenerate_spacing_detected() {
        let mut pts: Vec<Vec2> = (0..10).map(|i| Vec2::new(i as f64, 0.0)).collect();
        pts[4] = Vec2::new(3.0 + 1e-14, 0.0);
        let c = DiscreteCurve::open(pts).unwrap();
        assert!(matches!(
            c.frame(),
            Err(CsfError::DegenerateSpacing { edge: 3, .. })
        ));
    }

    #[test]
    fn full_turn_is_two_pi() {
        let c = circle(3.0, 100);
        assert!((turning_angle(&c, 5, 5) - 2.0 * PI).abs() < 1e-10);
        let half = turning_angle(&c, 0, 50);
        assert!((half - PI).abs() < 1e-10);
    }

    #[test]
    fn sweep_detects_figure_eight() {
        let pts = (0..200)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 200.0;
                let d = 1.0 + a.sin().powi(2);
                Vec2::new(a.cos() / d, a.sin() * a.cos() / d)
            })
            .collect();
        let c = DiscreteCurve::closed(pts).unwrap();
        assert!(self_intersects(&c));
        assert!(self_intersects_brute(&c));
        assert!(!self_intersects(&circle(1.0, 64)));
    }

    #[test]
    fn uniform_resample_keeps_open_endpoints() {
        let pts: Vec<Vec2> = (0..16)
            .map(|i| {
                let x = i as f64 / 15.0;
                Vec2::new(x, (3.0 * x).sin())
            })
            .collect();
        let c = DiscreteCurve::open(pts.clone()).unwrap();
        let r = resample(&c, 16).unwrap();
        assert_eq!(r.point(0), pts[0]);
        assert_eq!(r.point(15), pts[15]);
    }

    #[test]
    fn adaptive_resample_refines_high_curvature() {
        let pts: Vec<Vec2> = (0..400)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 400.0;
                Vec2::new(4.0 * a.cos(), 0.5 * a.sin())
            })
            .collect();
        let c = DiscreteCurve::closed(pts).unwrap();
        let pol = SpacingPolicy::Adaptive(AdaptiveSpacing {
            angle_step: 0.05,
            h_min: 1e-3,
            h_max: 0.2,
            grading: 0.2,
            focus: None,
        });
        let r = resample_with(&c, &pol).unwrap();
        let lens = r.edge_lengths();
        let near_end = lens[0];
        let mid = lens[r.len() / 4];
        assert!(near_end < 0.5 * mid, "{near_end} vs {mid}");
        assert!((r.length() - c.length()).abs() / c.length() < 1e-3);
    }
}
