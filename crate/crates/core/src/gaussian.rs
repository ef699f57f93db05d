//! Gaussian weighted length, entropy and Gaussian density ratios.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use crate::flow::{FlowMode, FlowTrajectory};
use crate::geometry::{DiscreteCurve, Vec2};
use crate::par::{self, Exec};
use crate::spline::gauss_legendre;
use crate::{CsfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    F,
    Entropy,
    Theta,
    ThetaLocalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub kind: DensityKind,
    pub x0: Vec2,
    /// `λ` for `F` and entropy, `r` (or `σ`) for density ratios.
    pub scale: f64,
    pub value: f64,
    /// Spacetime time coordinate of the centre, for density ratios.
    pub time: Option<f64>,
    pub cutoff: Option<f64>,
    /// Set for open curves, whose entropy is underestimated.
    pub truncated: bool,
}

/// `∫_0^L exp(−((s+b)² + c²)/4λ) ds / √(4πλ)` without cancellation.
fn edge_gaussian(b: f64, c2: f64, len: f64, lambda: f64) -> f64 {
    let w = 0.5 / lambda.sqrt();
    let (lo, hi) = (b * w, (b + len) * w);
    let diff = if lo >= 0.0 {
        libm::erfc(lo) - libm::erfc(hi)
    } else if hi <= 0.0 {
        libm::erfc(-hi) - libm::erfc(-lo)
    } else {
        libm::erf(hi) - libm::erf(lo)
    };
    0.5 * (-c2 / (4.0 * lambda)).exp() * diff
}

/// `F_{x0,λ} = (4πλ)^{-1/2} ∫ exp(−|x−x0|²/4λ) ds`, exact on the polyline.
pub fn gaussian_length(curve: &DiscreteCurve, x0: Vec2, lambda: f64) -> f64 {
    (0..curve.edge_count())
        .map(|i| {
            let a = curve.point(i) - x0;
            let e = curve.edge(i);
            let len = e.norm();
            let u = e / len;
            let b = a.dot(u);
            let c2 = (a.norm_sq() - b * b).max(0.0);
            edge_gaussian(b, c2, len, lambda)
        })
        .sum()
}

/// `∫ f ds` over the polyline with 8-point Gauss rules on pieces of length
/// at most `piece`, halving `piece` until the relative change is below 1e-8.
pub fn curve_integral(curve: &DiscreteCurve, piece: f64, f: impl Fn(Vec2) -> f64) -> f64 {
    let eval = |piece: f64| -> f64 {
        (0..curve.edge_count())
            .map(|i| {
                let a = curve.point(i);
                let e = curve.edge(i);
                let len = e.norm();
                let m = (len / piece).ceil().max(1.0) as usize;
                (0..m)
                    .map(|k| {
                        gauss_legendre(
                            |u| f(a + e * u),
                            k as f64 / m as f64,
                            (k + 1) as f64 / m as f64,
                        )
                    })
                    .sum::<f64>()
                    * len
            })
            .sum()
    };
    let mut piece = piece;
    let mut prev = eval(piece);
    for _ in 0..8 {
        piece *= 0.5;
        let next = eval(piece);
        if (next - prev).abs() <= 1e-8 * next.abs().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropySearch {
    /// Grid points per axis (centres x, centres y, `log λ`).
    pub grid: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Number of best grid cells refined by Nelder–Mead.
    pub refine: usize,
    pub max_iters: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EntropySearch {
    fn default() -> Self {
        EntropySearch {
            grid: 21,
            lambda_min: 1e-3,
            lambda_max: 1e3,
            refine: 5,
            max_iters: 400,
            exec: Exec::default(),
        }
    }
}

struct NegF<'a> {
    curve: &'a DiscreteCurve,
}

impl CostFunction for NegF<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(-gaussian_length(
            self.curve,
            Vec2::new(p[0], p[1]),
            p[2].exp(),
        ))
    }
}

/// Supremum of `F_{x0,λ}` over centres and scales: log grid over the
/// bounding box and `λ`, then simplex refinement from the best cells.
pub fn entropy(curve: &DiscreteCurve, search: &EntropySearch) -> Result<DensityReport> {
    let g = search.grid.max(2);
    if !(search.lambda_min > 0.0 && search.lambda_max > search.lambda_min) {
        return Err(CsfError::InvalidInput("entropy: bad λ range".into()));
    }
    let (lo, hi) = curve.bbox();
    let axis = |a: f64, b: f64, k: usize| a + (b - a) * k as f64 / (g - 1) as f64;
    let (ll0, ll1) = (search.lambda_min.ln(), search.lambda_max.ln());
    let mut cells: Vec<(f64, [f64; 3])> = par::map_range(search.exec, g * g * g, |idx| {
        let (i, j, k) = (idx / (g * g), (idx / g) % g, idx % g);
        let p = [axis(lo.x, hi.x, i), axis(lo.y, hi.y, j), axis(ll0, ll1, k)];
        (gaussian_length(curve, Vec2::new(p[0], p[1]), p[2].exp()), p)
    });
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let size = (hi - lo).norm().max(1e-12);
    let dl = (ll1 - ll0) / (g - 1) as f64;
    let starts: Vec<[f64; 3]> = cells
        .iter()
        .take(search.refine.max(1))
        .map(|c| c.1)
        .collect();
    let refined: Vec<(f64, [f64; 3])> = par::map(search.exec, &starts, |p| {
        let step = (0.05 * size).max(0.2 * p[2].exp().sqrt());
        let base = p.to_vec();
        let mut simplex = vec![base.clone()];
        for (d, h) in [(0, step), (1, step), (2, dl)] {
            let mut v = base.clone();
            v[d] += h;
            simplex.push(v);
        }
        let solver = match NelderMead::new(simplex).with_sd_tolerance(1e-12) {
            Ok(s) => s,
            Err(_) => {
                return (
                    gaussian_length(curve, Vec2::new(p[0], p[1]), p[2].exp()),
                    *p,
                )
            }
        };
        let run = Executor::new(NegF { curve }, solver)
            .configure(|s| s.max_iters(search.max_iters))
            .run();
        match run {
            Ok(res) => {
                let st = res.state();
                match st.best_param.as_ref() {
                    Some(bp) if bp.iter().all(|v| v.is_finite()) => {
                        (-st.best_cost, [bp[0], bp[1], bp[2]])
                    }
                    _ => (
                        gaussian_length(curve, Vec2::new(p[0], p[1]), p[2].exp()),
                        *p,
                    ),
                }
            }
            Err(_) => (
                gaussian_length(curve, Vec2::new(p[0], p[1]), p[2].exp()),
                *p,
            ),
        }
    });
    let best = refined
        .into_iter()
        .chain(cells.first().copied())
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("non-empty grid");
    Ok(DensityReport {
        kind: DensityKind::Entropy,
        x0: Vec2::new(best.1[0], best.1[1]),
        scale: best.1[2].exp(),
        value: best.0,
        time: None,
        cutoff: None,
        truncated: !curve.is_closed(),
    })
}

fn physical(traj: &FlowTrajectory) -> Result<()> {
    match traj.mode() {
        Some(FlowMode::Physical) => Ok(()),
        _ => Err(CsfError::InvalidInput(
            "density ratios need a physical trajectory".into(),
        )),
    }
}

/// Measure at `time` as a linear blend of the two bracketing frames,
/// integrated against `f`.
fn blended(traj: &FlowTrajectory, time: f64, f: impl Fn(&DiscreteCurve) -> f64) -> Result<f64> {
    let (i, j, w) = traj.bracket(time)?;
    let a = f(&traj.frames[i].curve);
    if w == 0.0 || i == j {
        return Ok(a);
    }
    let b = f(&traj.frames[j].curve);
    Ok((1.0 - w) * a + w * b)
}

/// Gaussian density ratio `Θ(M, X0, r) = ∫ Φ_{X0} dμ_{t0−r²}`.
pub fn theta(traj: &FlowTrajectory, x0: Vec2, t0: f64, r: f64) -> Result<DensityReport> {
    physical(traj)?;
    if !(r > 0.0) {
        return Err(CsfError::InvalidInput("theta: r must be positive".into()));
    }
    let lambda = r * r;
    let value = blended(traj, t0 - lambda, |c| gaussian_length(c, x0, lambda))?;
    Ok(DensityReport {
        kind: DensityKind::Theta,
        x0,
        scale: r,
        value,
        time: Some(t0),
        cutoff: None,
        truncated: false,
    })
}

/// Cut-off `ψ(x,t) = (1 − (|x−x̄|² − 2(t̄−t))/R²)₊³`.
pub fn cutoff_psi(x: Vec2, t: f64, xbar: Vec2, tbar: f64, radius: f64) -> f64 {
    let v = 1.0 - ((x - xbar).norm_sq() - 2.0 * (tbar - t)) / (radius * radius);
    if v > 0.0 {
        v * v * v
    } else {
        0.0
    }
}

/// `R`-localized density ratio `∫ ψ Φ dμ` at `t̄ − σ²`.
pub fn theta_localized(
    traj: &FlowTrajectory,
    xbar: Vec2,
    tbar: f64,
    radius: f64,
    sigma: f64,
) -> Result<DensityReport> {
    physical(traj)?;
    if !(radius > 0.0 && sigma > 0.0) {
        return Err(CsfError::InvalidInput(
            "theta_localized: R and σ must be positive".into(),
        ));
    }
    let lambda = sigma * sigma;
    let t = tbar - lambda;
    let (first, _, _) = traj.bracket(t)?;
    for f in traj.frames[first..].iter().filter(|f| f.time <= tbar) {
        if f.curve.is_closed() {
            continue;
        }
        let ends = [f.curve.point(0), f.curve.point(f.curve.len() - 1)];
        if ends
            .iter()
            .any(|&p| cutoff_psi(p, f.time, xbar, tbar, radius) > 0.0)
        {
            return Err(CsfError::NotProper(format!(
                "curve end enters the support of the cut-off at t = {}",
                f.time
            )));
        }
    }
    let norm = 1.0 / (4.0 * PI * lambda).sqrt();
    let piece = 0.25 * sigma.min(radius);
    let value = blended(traj, t, |c| {
        norm * curve_integral(c, piece, |x| {
            cutoff_psi(x, t, xbar, tbar, radius) * (-(x - xbar).norm_sq() / (4.0 * lambda)).exp()
        })
    })?;
    Ok(DensityReport {
        kind: DensityKind::ThetaLocalized,
        x0: xbar,
        scale: sigma,
        value,
        time: Some(tbar),
        cutoff: Some(radius),
        truncated: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub taus: Vec<f64>,
    /// `F(M̄_τ; 0, 1)` per frame.
    pub values: Vec<f64>,
    /// Largest increase between consecutive frames (0 if none).
    pub max_jump: f64,
}

impl MonotonicityReport {
    pub fn non_increasing(&self, tolerance: f64) -> bool {
        self.max_jump <= tolerance
    }
}

pub fn monotonicity_report(traj: &FlowTrajectory, exec: Exec) -> Result<MonotonicityReport> {
    if traj.mode() != Some(FlowMode::Rescaled) {
        return Err(CsfError::InvalidInput(
            "monotonicity_report needs a rescaled trajectory".into(),
        ));
    }
    let values = par::map(exec, &traj.frames, |f| {
        gaussian_length(&f.curve, Vec2::ZERO, 1.0)
    });
    let max_jump = values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(MonotonicityReport {
        taus: traj.times(),
        values,
        max_jump,
    })
}

/// Calibrated constants for the localized-density sandwich.
pub const SANDWICH_C: f64 = 10.0;
pub const SANDWICH_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Distance from the origin to the curve.
    pub d0: f64,
    pub inside: bool,
}

/// Evaluates `(4π)^{-1/2} ∫ [1 − a²(|x|²−2)]₊³ e^{−|x|²/4} ds` for a curve
/// crossing `B_r(0)` and checks it against `1 + Ca² + Cb` and
/// `1 − Cd0² − Ca − Cb − C e^{−r/4}`.
pub fn sandwich_check(a: f64, b: f64, r: f64, curve: &DiscreteCurve) -> Result<SandwichCheck> {
    let c = SANDWICH_C;
    if !(a > 0.0
        && a < SANDWICH_DELTA
        && (0.0..SANDWICH_DELTA).contains(&b)
        && r > 1.0 / SANDWICH_DELTA)
    {
        return Err(CsfError::HypothesisViolated(format!(
            "need a, b in (0, {SANDWICH_DELTA}) and r > {}",
            1.0 / SANDWICH_DELTA
        )));
    }
    if curve.is_closed() {
        return Err(CsfError::HypothesisViolated(
            "curve must end on the sphere of radius r".into(),
        ));
    }
    let ends = [curve.point(0), curve.point(curve.len() - 1)];
    if ends.iter().any(|p| (p.norm() - r).abs() > 1e-6 * r) {
        return Err(CsfError::HypothesisViolated(
            "curve endpoints must lie on |x| = r".into(),
        ));
    }
    let frame = curve.frame()?;
    let bound = b / r;
    for (p, k) in curve.points().iter().zip(&frame.kappa) {
        if p.norm() < r && k.abs() > bound * (1.0 + 1e-3) + 1e-9 {
            return Err(CsfError::HypothesisViolated(format!(
                "|κ| = {:.3e} exceeds b/r = {bound:.3e}",
                k.abs()
            )));
        }
    }
    let a2 = a * a;
    let value = curve_integral(curve, 0.25, |x| {
        let q = x.norm_sq();
        let w = 1.0 - a2 * (q - 2.0);
        if w > 0.0 {
            w * w * w * (-q / 4.0).exp()
        } else {
            0.0
        }
    }) / (4.0 * PI).sqrt();
    let d0 = crate::geometry::distance_to_curve(Vec2::ZERO, curve);
    let upper = 1.0 + c * a2 + c * b;
    let lower = 1.0 - c * d0 * d0 - c * a - c * b - c * (-r / 4.0).exp();
    Ok(SandwichCheck {
        value,
        lower,
        upper,
        d0,
        inside: lower <= value && value <= upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactFamily;

    fn segment(a: Vec2, b: Vec2, n: usize) -> DiscreteCurve {
        DiscreteCurve::open(
            (0..n)
                .map(|i| a + (b - a) * (i as f64 / (n - 1) as f64))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn line_has_unit_density() {
        let c = segment(Vec2::new(-50.0, 0.0), Vec2::new(50.0, 0.0), 64);
        assert!((gaussian_length(&c, Vec2::ZERO, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn circle_values() {
        let c = ExactFamily::circle().sample(-1.0, 512).unwrap();
        let v = gaussian_length(&c, Vec2::ZERO, 1.0);
        let exact = (2.0 * PI / std::f64::consts::E).sqrt();
        assert!((v - exact).abs() < 1e-4, "{v}");
        let r: f64 = 2f64.sqrt();
        let oracle = 2.0 * PI * r * (-r * r / 400.0).exp() / (400.0 * PI).sqrt();
        let big = gaussian_length(&c, Vec2::ZERO, 100.0);
        assert!((big - oracle).abs() < 1e-4, "{big} vs {oracle}");
    }

    #[test]
    fn far_edges_do_not_cancel() {
        let c = segment(Vec2::new(40.0, 0.0), Vec2::new(41.0, 0.0), 8);
        let v = gaussian_length(&c, Vec2::ZERO, 1.0);
        let direct = curve_integral(&c, 0.01, |x| (-x.norm_sq() / 4.0).exp()) / (4.0 * PI).sqrt();
        assert!(
            v > 0.0 && ((v - direct) / direct).abs() < 1e-6,
            "{v} {direct}"
        );
    }

    #[test]
    fn entropy_of_circle() {
        let c = ExactFamily::circle().sample(-3.0, 256).unwrap();
        let r = entropy(&c, &EntropySearch::default()).unwrap();
        assert!((r.value - 1.52035).abs() < 5e-3, "{r:?}");
        assert!(!r.truncated);
    }

    #[test]
    fn diameter_sandwich() {
        let c = segment(Vec2::new(-100.0, 0.0), Vec2::new(100.0, 0.0), 401);
        let s = sandwich_check(0.01, 0.0, 100.0, &c).unwrap();
        assert!((s.value - 1.0).abs() < 1e-4 && s.inside, "{s:?}");
    }
}
