//! Cubic splines: scalar (not-a-knot) and planar parametric (periodic or
//! not-a-knot), plus the tridiagonal solvers behind them.
//!
//! Parametric splines are built on cumulative chord length, which keeps
//! interpolation fourth-order accurate on curves with nonuniform spacing.

use crate::geometry::Vec2;
use crate::{CsfError, Result};

/// Thomas algorithm. `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Cyclic tridiagonal system via Sherman–Morrison. `sub[0]` couples row 0
/// to the last unknown, `sup[n-1]` couples the last row to unknown 0.
pub fn solve_cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = sup[n - 1];
    let beta = sub[0];
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(sub, &b, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(sub, &b, sup, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

/// Second-derivative coefficients of a not-a-knot cubic through `(x, y)`.
fn not_a_knot_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let m = n - 2;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for r in 0..m {
        let i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * (slope[i] - slope[i - 1]);
    }
    // M0 = M1 (1 + h0/h1) - M2 h0/h1
    let (h0, h1) = (h[0], h[1]);
    diag[0] += h0 * (1.0 + h0 / h1);
    sup[0] -= h0 * h0 / h1;
    // M_{n-1} = M_{n-2} (1 + b/a) - M_{n-3} b/a
    let (a, b) = (h[n - 3], h[n - 2]);
    diag[m - 1] += b * (1.0 + b / a);
    sub[m - 1] -= b * b / a;
    let inner = if m == 1 {
        vec![rhs[0] / diag[0]]
    } else {
        solve_tridiagonal(&sub, &diag, &sup, &rhs)
    };
    let mut moments = vec![0.0; n];
    moments[1..n - 1].copy_from_slice(&inner);
    moments[0] = inner[0] * (1.0 + h0 / h1) - inner.get(1).copied().unwrap_or(inner[0]) * h0 / h1;
    let last = inner[m - 1];
    let before = if m >= 2 { inner[m - 2] } else { inner[0] };
    moments[n - 1] = last * (1.0 + b / a) - before * b / a;
    moments
}

/// Moments of a periodic spline. `x` has `n+1` knots (last = first + period),
/// `y` has `n` values.
fn periodic_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let val = |i: usize| y[i % n];
    let slope: Vec<f64> = (0..n).map(|i| (val(i + 1) - val(i)) / h[i]).collect();
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let hp = h[(i + n - 1) % n];
        let hn = h[i];
        sub[i] = hp;
        diag[i] = 2.0 * (hp + hn);
        sup[i] = hn;
        rhs[i] = 6.0 * (slope[i] - slope[(i + n - 1) % n]);
    }
    solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs)
}

#[inline]
fn segment_eval(h: f64, y0: f64, y1: f64, m0: f64, m1: f64, a: f64) -> [f64; 3] {
    // a = (x1 - x)/h, b = 1 - a
    let b = 1.0 - a;
    let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
    let d1 = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
    let d2 = a * m0 + b * m1;
    [v, d1, d2]
}

/// Scalar cubic spline with not-a-knot ends on strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 4 {
            return Err(CsfError::InvalidInput(format!(
                "spline needs >= 4 matching knots, got {} x and {} y",
                x.len(),
                y.len()
            )));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CsfError::InvalidInput(
                "spline knots must increase strictly".into(),
            ));
        }
        let m = not_a_knot_moments(&x, &y);
        Ok(CubicSpline { x, y, m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.clamp(1, n - 1) - 1,
        }
    }

    /// Value, first and second derivative at `t` (extrapolates the end cubics).
    pub fn eval_all(&self, t: f64) -> [f64; 3] {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        segment_eval(h, self.y[i], self.y[i + 1], self.m[i], self.m[i + 1], a)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_all(t)[0]
    }
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// 8-point Gauss–Legendre on `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS.iter())
        .map(|(x, w)| w * f(c + r * x))
        .sum::<f64>()
        * r
}

/// Planar cubic spline through a polyline, parameterised by cumulative
/// chord length. Closed curves use periodic end conditions.
#[derive(Debug, Clone)]
pub struct ParametricSpline {
    knots: Vec<f64>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    mx: Vec<f64>,
    my: Vec<f64>,
    closed: bool,
    /// Cumulative spline arc length at each knot.
    arc: Vec<f64>,
}

impl ParametricSpline {
    pub fn new(points: &[Vec2], closed: bool) -> Result<Self> {
        if points.len() < 4 {
            return Err(CsfError::InvalidInput(
                "parametric spline needs >= 4 points".into(),
            ));
        }
        let n = points.len();
        let segs = if closed { n } else { n - 1 };
        let mut knots = Vec::with_capacity(segs + 1);
        knots.push(0.0);
        for i in 0..segs {
            let d = (points[(i + 1) % n] - points[i]).norm();
            if !(d > 0.0) {
                return Err(CsfError::InvalidInput(format!("coincident points at {i}")));
            }
            knots.push(knots[i] + d);
        }
        let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
        let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
        let (mx, my) = if closed {
            let mut mx = periodic_moments(&knots, &xs);
            let mut my = periodic_moments(&knots, &ys);
            mx.push(mx[0]);
            my.push(my[0]);
            xs.push(xs[0]);
            ys.push(ys[0]);
            (mx, my)
        } else {
            (
                not_a_knot_moments(&knots, &xs),
                not_a_knot_moments(&knots, &ys),
            )
        };
        let mut sp = ParametricSpline {
            knots,
            xs,
            ys,
            mx,
            my,
            closed,
            arc: Vec::new(),
        };
        let mut arc = Vec::with_capacity(segs + 1);
        arc.push(0.0);
        for i in 0..segs {
            let l = sp.segment_length(i, sp.knots[i], sp.knots[i + 1]);
            arc.push(arc[i] + l);
        }
        sp.arc = arc;
        Ok(sp)
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Parameter range `[0, total chord length]`.
    pub fn param_end(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Total arc length of the spline.
    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    fn locate(&self, p: f64) -> usize {
        let segs = self.knots.len() - 1;
        match self.knots.binary_search_by(|v| v.partial_cmp(&p).unwrap()) {
            Ok(i) => i.min(segs - 1),
            Err(i) => i.clamp(1, segs) - 1,
        }
    }

    fn wrap(&self, p: f64) -> f64 {
        if self.closed {
            p.rem_euclid(self.param_end())
        } else {
            p
        }
    }

    /// Position, first and second parameter derivatives at `p`.
    pub fn eval_all(&self, p: f64) -> [Vec2; 3] {
        let p = self.wrap(p);
        let i = self.locate(p);
        self.eval_in(i, p)
    }

    fn eval_in(&self, i: usize, p: f64) -> [Vec2; 3] {
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - p) / h;
        let ex = segment_eval(h, self.xs[i], self.xs[i + 1], self.mx[i], self.mx[i + 1], a);
        let ey = segment_eval(h, self.ys[i], self.ys[i + 1], self.my[i], self.my[i + 1], a);
        [
            Vec2::new(ex[0], ey[0]),
            Vec2::new(ex[1], ey[1]),
            Vec2::new(ex[2], ey[2]),
        ]
    }

    pub fn eval(&self, p: f64) -> Vec2 {
        self.eval_all(p)[0]
    }

    /// Signed curvature of the spline at parameter `p`.
    pub fn curvature(&self, p: f64) -> f64 {
        let [_, d1, d2] = self.eval_all(p);
        let s = d1.norm();
        d1.cross(d2) / (s * s * s)
    }

    fn segment_length(&self, i: usize, a: f64, b: f64) -> f64 {
        gauss_legendre(|p| self.eval_in(i, p)[1].norm(), a, b)
    }

    /// Arc length from parameter 0 to `p` (no wrapping).
    pub fn arc_length_at(&self, p: f64) -> f64 {
        let i = self.locate(p);
        self.arc[i] + self.segment_length(i, self.knots[i], p)
    }

    /// Parameter at which the arc length from the start equals `ell`.
    pub fn param_at_length(&self, ell: f64) -> f64 {
        let total = self.length();
        let ell = ell.clamp(0.0, total);
        let i = match self.arc.binary_search_by(|v| v.partial_cmp(&ell).unwrap()) {
            Ok(i) => return self.knots[i],
            Err(i) => i.clamp(1, self.arc.len() - 1) - 1,
        };
        let (k0, k1) = (self.knots[i], self.knots[i + 1]);
        let target = ell - self.arc[i];
        let seg_len = self.arc[i + 1] - self.arc[i];
        let mut p = k0 + (k1 - k0) * target / seg_len;
        for _ in 0..30 {
            let g = self.segment_length(i, k0, p) - target;
            let speed = self.eval_in(i, p)[1].norm();
            let step = g / speed;
            p = (p - step).clamp(k0, k1);
            if step.abs() < 1e-15 * (1.0 + k1.abs()) {
                break;
            }
        }
        p
    }

    /// Closest point on the spline to `q`, searched near parameter `hint`.
    pub fn closest_param(&self, q: Vec2, hint: f64) -> f64 {
        let mut p = self.wrap(hint);
        for _ in 0..50 {
            let [x, d1, d2] = self.eval_all(p);
            let r = x - q;
            let g = r.dot(d1);
            let gp = d1.dot(d1) + r.dot(d2);
            if gp <= 0.0 {
                break;
            }
            let step = g / gp;
            p -= step;
            if !self.closed {
                p = p.clamp(0.0, self.param_end());
            } else {
                p = self.wrap(p);
            }
            if step.abs() < 1e-14 * (1.0 + self.param_end()) {
                break;
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn tridiagonal_matches_direct_solution() {
        let sub = [0.0, 1.0, 1.0];
        let diag = [4.0, 4.0, 4.0];
        let sup = [1.0, 1.0, 0.0];
        let x_true = [1.0, -2.0, 3.0];
        let rhs = [4.0 - 2.0, 1.0 - 8.0 + 3.0, -2.0 + 12.0];
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        for (a, b) in x.iter().zip(x_true.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_solver_matches_dense_check() {
        let n = 6;
        let sub = vec![1.0; n];
        let diag = vec![5.0; n];
        let sup = vec![2.0; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.5).collect();
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                sub[i] * x_true[(i + n - 1) % n]
                    + diag[i] * x_true[i]
                    + sup[i] * x_true[(i + 1) % n]
            })
            .collect();
        let x = solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn not_a_knot_reproduces_cubics() {
        let x: Vec<f64> = vec![0.0, 0.3, 1.0, 1.1, 2.0, 2.7];
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 0.25 * t * t * t;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::new(x, y).unwrap();
        for t in [0.1, 0.77, 1.5, 2.6] {
            let [v, d1, d2] = s.eval_all(t);
            assert!((v - f(t)).abs() < 1e-12);
            assert!((d1 - (-2.0 + t - 0.75 * t * t)).abs() < 1e-11);
            assert!((d2 - (1.0 - 1.5 * t)).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_spline_length_of_circle() {
        let n = 64;
        let pts: Vec<Vec2> = (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                Vec2::new(a.cos(), a.sin())
            })
            .collect();
        let sp = ParametricSpline::new(&pts, true).unwrap();
        assert!((sp.length() - 2.0 * PI).abs() < 1e-6);
        let p = sp.param_at_length(PI);
        let q = sp.eval(p);
        assert!((q - Vec2::new(-1.0, 0.0)).norm() < 1e-6);
        let k = sp.curvature(0.3);
        assert!((k - 1.0).abs() < 1e-3, "{k}");
    }
}
