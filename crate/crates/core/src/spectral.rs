//! Gaussian `L²` analysis of nearly-straight sheets: the weighted inner
//! product, the operator `L = ∂² − ½y∂ + ½`, projections onto its
//! unstable and neutral modes, and sheet extraction from curves.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::geometry::{DiscreteCurve, FrameData, Vec2};
use crate::{CsfError, Result};

/// Uniform grid on `[−y_max, y_max]` with an even number of intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub y_max: f64,
    pub intervals: usize,
}

impl Grid {
    /// Grid with spacing as close to `h` as an even interval count allows.
    pub fn new(y_max: f64, h: f64) -> Result<Self> {
        if !(y_max > 0.0 && h > 0.0) {
            return Err(CsfError::InvalidInput(
                "grid needs y_max > 0 and h > 0".into(),
            ));
        }
        let mut intervals = (2.0 * y_max / h).round().max(2.0) as usize;
        intervals += intervals % 2;
        Ok(Grid { y_max, intervals })
    }

    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        2.0 * self.y_max / self.intervals as f64
    }

    pub fn y(&self, k: usize) -> f64 {
        -self.y_max + k as f64 * self.h()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.y(k)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Sampled {
        Sampled {
            grid: *self,
            values: (0..self.len()).map(|k| f(self.y(k))).collect(),
        }
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            y_max: 12.0,
            intervals: 2400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampled {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Sampled {
    fn zip_with(&self, other: &Sampled, f: impl Fn(f64, f64) -> f64) -> Result<Sampled> {
        same_grid(self, other)?;
        Ok(Sampled {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn add(&self, o: &Sampled) -> Result<Sampled> {
        self.zip_with(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &Sampled) -> Result<Sampled> {
        self.zip_with(o, |a, b| a - b)
    }

    pub fn mul(&self, o: &Sampled) -> Result<Sampled> {
        self.zip_with(o, |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Sampled {
        Sampled {
            grid: self.grid,
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }

    /// First derivative: fourth-order centred differences, fourth-order
    /// one-sided stencils at the two outermost samples on each side.
    pub fn derivative(&self) -> Sampled {
        let v = &self.values;
        let n = v.len();
        let h = self.grid.h();
        let mut d = vec![0.0; n];
        if n < 6 {
            for k in 0..n {
                let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
                d[k] = (v[b] - v[a]) / ((b - a).max(1) as f64 * h);
            }
        } else {
            for k in 2..n - 2 {
                d[k] = (-v[k + 2] + 8.0 * v[k + 1] - 8.0 * v[k - 1] + v[k - 2]) / (12.0 * h);
            }
            let left = |w: &dyn Fn(usize) -> f64| {
                (
                    (-25.0 * w(0) + 48.0 * w(1) - 36.0 * w(2) + 16.0 * w(3) - 3.0 * w(4))
                        / (12.0 * h),
                    (-3.0 * w(0) - 10.0 * w(1) + 18.0 * w(2) - 6.0 * w(3) + w(4)) / (12.0 * h),
                )
            };
            (d[0], d[1]) = left(&|i| v[i]);
            let (a, b) = left(&|i| v[n - 1 - i]);
            d[n - 1] = -a;
            d[n - 2] = -b;
        }
        Sampled {
            grid: self.grid,
            values: d,
        }
    }

    /// Second derivative, same stencil orders as [`Sampled::derivative`].
    pub fn second_derivative(&self) -> Sampled {
        let v = &self.values;
        let n = v.len();
        let h2 = self.grid.h().powi(2);
        let mut d = vec![0.0; n];
        if n < 6 {
            for k in 1..n.saturating_sub(1) {
                d[k] = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / h2;
            }
            if n >= 3 {
                d[0] = d[1];
                d[n - 1] = d[n - 2];
            }
        } else {
            for k in 2..n - 2 {
                d[k] = (-v[k + 2] + 16.0 * v[k + 1] - 30.0 * v[k] + 16.0 * v[k - 1] - v[k - 2])
                    / (12.0 * h2);
            }
            let left = |w: &dyn Fn(usize) -> f64| {
                (
                    (45.0 * w(0) - 154.0 * w(1) + 214.0 * w(2) - 156.0 * w(3) + 61.0 * w(4)
                        - 10.0 * w(5))
                        / (12.0 * h2),
                    (10.0 * w(0) - 15.0 * w(1) - 4.0 * w(2) + 14.0 * w(3) - 6.0 * w(4) + w(5))
                        / (12.0 * h2),
                )
            };
            (d[0], d[1]) = left(&|i| v[i]);
            (d[n - 1], d[n - 2]) = left(&|i| v[n - 1 - i]);
        }
        Sampled {
            grid: self.grid,
            values: d,
        }
    }
}

fn same_grid(f: &Sampled, g: &Sampled) -> Result<()> {
    if f.grid != g.grid || f.values.len() != g.values.len() || f.values.len() != f.grid.len() {
        return Err(CsfError::GridMismatch(format!(
            "{} vs {} samples",
            f.values.len(),
            g.values.len()
        )));
    }
    Ok(())
}

fn weight(y: f64) -> f64 {
    (-y * y / 4.0).exp() / (4.0 * PI).sqrt()
}

/// `⟨f, g⟩_H = ∫ f g (4π)^{-1/2} e^{−y²/4} dy` by composite Simpson.
pub fn inner_h(f: &Sampled, g: &Sampled) -> Result<f64> {
    same_grid(f, g)?;
    let grid = f.grid;
    let n = grid.len();
    let mut acc = 0.0;
    for k in 0..n {
        let c = if k == 0 || k == n - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += c * f.values[k] * g.values[k] * weight(grid.y(k));
    }
    Ok(acc * grid.h() / 3.0)
}

pub fn norm_h(f: &Sampled) -> f64 {
    inner_h(f, f).expect("same grid").max(0.0).sqrt()
}

/// `L f = f'' − ½ y f' + ½ f`.
pub fn l_apply(f: &Sampled) -> Sampled {
    let d1 = f.derivative();
    let d2 = f.second_derivative();
    let grid = f.grid;
    Sampled {
        grid,
        values: (0..grid.len())
            .map(|k| d2.values[k] - 0.5 * grid.y(k) * d1.values[k] + 0.5 * f.values[k])
            .collect(),
    }
}

/// Unstable mode `φ₁ = 1` (eigenvalue ½).
pub fn phi1(grid: &Grid) -> Sampled {
    grid.sample(|_| 1.0)
}

/// Neutral mode `φ₂ = y/√2`.
pub fn phi2(grid: &Grid) -> Sampled {
    grid.sample(|y| y / SQRT_2)
}

/// First stable mode `φ₃ = 2^{-3/2}(y² − 2)` (eigenvalue −½).
pub fn phi3(grid: &Grid) -> Sampled {
    grid.sample(|y| (y * y - 2.0) / (2.0 * SQRT_2))
}

/// Cut-off equal to 1 on `|s| ≤ 1`, 0 on `|s| ≥ 2`, quintic smoothstep between.
pub fn cutoff_eta(s: f64) -> f64 {
    let a = s.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        let u = a - 1.0;
        1.0 - u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    }
}

/// Sheet `i` of a frame sampled on a grid, with its derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetProfile {
    pub tau: f64,
    pub sheet: usize,
    pub grid: Grid,
    pub u: Vec<f64>,
    pub u_y: Vec<f64>,
    pub u_yy: Vec<f64>,
    /// Cut-off radius for `η(y/r)`.
    pub r: f64,
}

impl SheetProfile {
    pub fn from_fn(tau: f64, sheet: usize, grid: Grid, r: f64, u: impl Fn(f64) -> f64) -> Self {
        let s = grid.sample(u);
        let d1 = s.derivative();
        let d2 = s.second_derivative();
        SheetProfile {
            tau,
            sheet,
            grid,
            u: s.values,
            u_y: d1.values,
            u_yy: d2.values,
            r,
        }
    }

    /// `û = u η(y/r)`.
    pub fn hat(&self) -> Sampled {
        Sampled {
            grid: self.grid,
            values: (0..self.grid.len())
                .map(|k| self.u[k] * cutoff_eta(self.grid.y(k) / self.r))
                .collect(),
        }
    }

    /// `max(|u|, |u_y|, |u_yy|)` over `|y| ≤ radius`.
    pub fn c2_norm(&self, radius: f64) -> f64 {
        (0..self.grid.len())
            .filter(|&k| self.grid.y(k).abs() <= radius + 1e-12)
            .map(|k| {
                self.u[k]
                    .abs()
                    .max(self.u_y[k].abs())
                    .max(self.u_yy[k].abs())
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralProjection {
    pub a: f64,
    pub b: f64,
    pub stable_norm: f64,
    pub grad_norm: f64,
}

pub fn project(profile: &SheetProfile) -> Result<SpectralProjection> {
    project_sampled(&profile.hat())
}

pub fn project_sampled(uh: &Sampled) -> Result<SpectralProjection> {
    let (p1, p2) = (phi1(&uh.grid), phi2(&uh.grid));
    let a = inner_h(uh, &p1)?;
    let b = inner_h(uh, &p2)?;
    let rest = uh.sub(&p1.scale(a))?.sub(&p2.scale(b))?;
    Ok(SpectralProjection {
        a,
        b,
        stable_norm: norm_h(&rest),
        grad_norm: norm_h(&uh.derivative()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowErrorReport {
    pub e: Sampled,
    pub norm: f64,
    /// `|⟨E, φ₁⟩_H|`.
    pub plus_norm: f64,
    /// `|⟨E, φ₂⟩_H|`.
    pub zero_norm: f64,
    /// `‖û_y‖²_H + r^{-3/2} e^{−r²/8}` at the midpoint.
    pub reference: f64,
    /// `(plus_norm + zero_norm) / reference`.
    pub fitted_k: f64,
}

/// `E = û_τ − L û` by a difference quotient centred between two frames.
pub fn flow_error(p0: &SheetProfile, p1: &SheetProfile, dtau: f64) -> Result<FlowErrorReport> {
    if p0.grid != p1.grid || p0.r != p1.r {
        return Err(CsfError::GridMismatch(
            "profiles differ in grid or cut-off radius".into(),
        ));
    }
    if !(dtau > 0.0) {
        return Err(CsfError::InvalidInput(
            "flow_error: dtau must be positive".into(),
        ));
    }
    let (h0, h1) = (p0.hat(), p1.hat());
    let mid = h0.add(&h1)?.scale(0.5);
    let e = h1.sub(&h0)?.scale(1.0 / dtau).sub(&l_apply(&mid))?;
    let grid = e.grid;
    let plus_norm = inner_h(&e, &phi1(&grid))?.abs();
    let zero_norm = inner_h(&e, &phi2(&grid))?.abs();
    let r = p0.r;
    let reference = norm_h(&mid.derivative()).powi(2) + r.powf(-1.5) * (-r * r / 8.0).exp();
    Ok(FlowErrorReport {
        norm: norm_h(&e),
        plus_norm,
        zero_norm,
        reference,
        fitted_k: (plus_norm + zero_norm) / reference,
        e,
    })
}

/// Angle `θ = arctan(2^{-1/2} b¹)` from the neutral coefficient of the top
/// sheet; rotating by `−θ` removes the common tilt.
pub fn rotation_refine(profiles: &[SheetProfile]) -> Result<f64> {
    let Some(top) = profiles.iter().min_by_key(|p| p.sheet) else {
        return Ok(0.0);
    };
    let b = project(top)?.b;
    Ok((b / SQRT_2).atan())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Least-squares slope of `ln v` against `τ`.
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn decay_fit(series: &[(f64, f64)]) -> Result<DecayFit> {
    if series.len() < 6 {
        return Err(CsfError::InvalidInput(
            "decay_fit needs at least 6 samples".into(),
        ));
    }
    if let Some((index, &(_, value))) = series.iter().enumerate().find(|(_, s)| !(s.1 > 0.0)) {
        return Err(CsfError::NonPositiveValue { index, value });
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = series.iter().map(|s| s.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CsfError::InvalidInput(
            "decay_fit needs distinct times".into(),
        ));
    }
    let rate = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(DecayFit {
        rate,
        intercept: my - rate * mx,
        r2,
    })
}

/// A point where a vertical line crosses the (rotated) curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetPoint {
    pub u: f64,
    pub u_y: f64,
    pub u_yy: f64,
}

/// Curve components rotated by `angle`, with frames, ready for slicing.
pub struct SheetSource {
    parts: Vec<(Vec<Vec2>, FrameData, bool)>,
}

impl SheetSource {
    pub fn new(curves: &[DiscreteCurve], angle: f64) -> Result<Self> {
        let parts = curves
            .iter()
            .map(|c| {
                let f = c.frame()?;
                let (s, co) = angle.sin_cos();
                let rot = |v: Vec2| Vec2::new(co * v.x - s * v.y, s * v.x + co * v.y);
                let pts = c.points().iter().map(|p| rot(*p)).collect();
                let tangents = f.tangents.iter().map(|t| rot(*t)).collect();
                Ok((pts, FrameData { tangents, ..f }, c.is_closed()))
            })
            .collect::<Result<_>>()?;
        Ok(SheetSource { parts })
    }

    /// Crossings of the line `first coordinate = y`, sorted top to bottom.
    pub fn slice(&self, y: f64) -> Vec<SheetPoint> {
        let mut out = Vec::new();
        for (pts, frame, closed) in &self.parts {
            let n = pts.len();
            let edges = if *closed { n } else { n - 1 };
            for i in 0..edges {
                let j = (i + 1) % n;
                let (a, b) = (pts[i], pts[j]);
                let (lo, hi) = if a.x <= b.x { (a.x, b.x) } else { (b.x, a.x) };
                // half-open so that a vertex on the line counts once
                if !(y >= lo && y < hi) {
                    continue;
                }
                let w = (y - a.x) / (b.x - a.x);
                let u = a.y + w * (b.y - a.y);
                let t = frame.tangents[i] * (1.0 - w) + frame.tangents[j] * w;
                let k = frame.kappa[i] * (1.0 - w) + frame.kappa[j] * w;
                let sgn = t.x.signum();
                let slope = t.y / t.x;
                let u_yy = sgn * k * (1.0 + slope * slope).powf(1.5);
                out.push(SheetPoint {
                    u,
                    u_y: slope,
                    u_yy,
                });
            }
        }
        out.sort_by(|p, q| q.u.total_cmp(&p.u));
        out
    }

    pub fn count(&self, y: f64) -> usize {
        self.slice(y).len()
    }
}

/// Extracts `m` sheets (top first) on the grid. Grid points with
/// `|y| ≥ 2r` (where `û` vanishes) are filled with zeros when the
/// decomposition does not reach them.
pub fn extract_sheets(
    curves: &[DiscreteCurve],
    angle: f64,
    m: usize,
    grid: Grid,
    r: f64,
    tau: f64,
) -> Result<Vec<SheetProfile>> {
    let src = SheetSource::new(curves, angle)?;
    let mut sheets: Vec<SheetProfile> = (0..m)
        .map(|i| SheetProfile {
            tau,
            sheet: i,
            grid,
            u: vec![0.0; grid.len()],
            u_y: vec![0.0; grid.len()],
            u_yy: vec![0.0; grid.len()],
            r,
        })
        .collect();
    for k in 0..grid.len() {
        let y = grid.y(k);
        let pts = src.slice(y);
        if pts.len() != m {
            if y.abs() >= 2.0 * r {
                continue;
            }
            return Err(CsfError::SheetCountMismatch {
                expected: m,
                found: pts.len(),
                at: y,
            });
        }
        for (i, p) in pts.iter().enumerate() {
            sheets[i].u[k] = p.u;
            sheets[i].u_y[k] = p.u_y;
            sheets[i].u_yy[k] = p.u_yy;
        }
    }
    Ok(sheets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments() {
        let g = Grid::default();
        assert!((inner_h(&phi1(&g), &phi1(&g)).unwrap() - 1.0).abs() < 1e-8);
        let y = g.sample(|y| y);
        assert!((inner_h(&y, &y).unwrap() - 2.0).abs() < 1e-8);
        assert!((norm_h(&phi3(&g)) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eigenfunctions() {
        let g = Grid::default();
        for (f, lam) in [(phi1(&g), 0.5), (phi2(&g), 0.0), (phi3(&g), -0.5)] {
            let r = l_apply(&f).sub(&f.scale(lam)).unwrap();
            assert!(norm_h(&r) < 1e-5, "{lam}: {}", norm_h(&r));
        }
    }

    #[test]
    fn eta_shape() {
        assert_eq!(cutoff_eta(0.5), 1.0);
        assert_eq!(cutoff_eta(3.0), 0.0);
        assert!((cutoff_eta(1.5) - 0.5).abs() < 1e-15);
        assert!((cutoff_eta(-1.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn linear_projection() {
        let p = SheetProfile::from_fn(0.0, 0, Grid::default(), 1e3, |y| 3.0 + y);
        let pr = project(&p).unwrap();
        assert!(
            (pr.a - 3.0).abs() < 1e-6 && (pr.b - SQRT_2).abs() < 1e-6,
            "{pr:?}"
        );
    }

    #[test]
    fn stencils_are_exact_on_quartics() {
        let g = Grid::new(1.0, 0.1).unwrap();
        let f = g.sample(|y| y.powi(4) - 2.0 * y);
        let d1 = f.derivative();
        let d2 = f.second_derivative();
        for k in 0..g.len() {
            let y = g.y(k);
            assert!((d1.values[k] - (4.0 * y.powi(3) - 2.0)).abs() < 1e-9, "{k}");
            assert!((d2.values[k] - 12.0 * y * y).abs() < 1e-8, "{k}");
        }
    }

    #[test]
    fn mismatched_grids() {
        let a = Grid::default().sample(|_| 1.0);
        let b = Grid::new(12.0, 0.02).unwrap().sample(|_| 1.0);
        assert!(matches!(inner_h(&a, &b), Err(CsfError::GridMismatch(_))));
    }

    #[test]
    fn decay_rates() {
        let s: Vec<(f64, f64)> = (0..10)
            .map(|k| (-9.0 + k as f64 * 0.5, (0.5 * (-9.0 + k as f64 * 0.5)).exp()))
            .collect();
        assert!((decay_fit(&s).unwrap().rate - 0.5).abs() < 1e-6);
        let c: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 2.0)).collect();
        assert!(decay_fit(&c).unwrap().rate.abs() < 1e-6);
        assert!(matches!(
            decay_fit(&[
                (0.0, 1.0),
                (1.0, 1.0),
                (2.0, 0.0),
                (3.0, 1.0),
                (4.0, 1.0),
                (5.0, 1.0)
            ]),
            Err(CsfError::NonPositiveValue { index: 2, .. })
        ));
    }
}
