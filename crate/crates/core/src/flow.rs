//! Explicit integration of curve-shortening flow and of the rescaled flow.
//!
//! Physical mode moves points by `κ n`; rescaled mode by
//! `(κ + ⟨x, n⟩/2) n`, the flow of `M̄_τ = (−t)^{-1/2} M_t` with
//! `τ = −ln(−t)`. Tangential motion is dropped and the curve is remeshed
//! instead. Steps are RK2 (midpoint) with `dt = min(dt_max, cfl·h_min²)`.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::critical::Path;
use crate::geometry::{
    kappa_and_normals, resample_with, self_intersects, DiscreteCurve, SpacingPolicy, Vec2,
};
use crate::{CsfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    Physical,
    Rescaled,
}

/// A curve at a physical time `t` or rescaled time `τ`, depending on `mode`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub curve: DiscreteCurve,
    pub time: f64,
    pub mode: FlowMode,
}

impl FlowState {
    pub fn new(curve: DiscreteCurve, time: f64, mode: FlowMode) -> Self {
        FlowState {
            curve: curve.with_time(Some(time)),
            time,
            mode,
        }
    }

    pub fn physical(curve: DiscreteCurve, t: f64) -> Self {
        Self::new(curve, t, FlowMode::Physical)
    }

    pub fn rescaled(curve: DiscreteCurve, tau: f64) -> Self {
        Self::new(curve, tau, FlowMode::Rescaled)
    }
}

/// Integrator settings shared by [`step`] and [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControls {
    pub spacing: SpacingPolicy,
    /// Remesh after this many accepted steps (1 = every step).
    pub remesh_every: usize,
    /// Also remesh once the shortest edge falls below this fraction of the
    /// shortest edge right after the previous remesh.
    pub remesh_shrink: f64,
    /// Check embeddedness every this many steps (frames are always checked).
    pub intersect_every: usize,
    pub cfl: f64,
    /// Upper bound on `κ_max·dt`.
    pub curvature_cfl: f64,
    pub max_halvings: usize,
}

impl StepControls {
    pub fn uniform(n: usize) -> Self {
        StepControls {
            spacing: SpacingPolicy::Uniform { n },
            remesh_every: 1,
            remesh_shrink: 0.5,
            intersect_every: 1,
            cfl: 0.25,
            curvature_cfl: 0.5,
            max_halvings: 20,
        }
    }
}

impl Default for StepControls {
    fn default() -> Self {
        Self::uniform(512)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveControls {
    pub step: StepControls,
    pub dt_max: f64,
    /// Spacing of recorded frames in the flow's time variable.
    pub frame_interval: f64,
    /// Stop with `near_singular` once `max |κ|` exceeds this.
    pub kappa_cap: f64,
}

impl Default for EvolveControls {
    fn default() -> Self {
        EvolveControls {
            step: StepControls::default(),
            dt_max: 1e-3,
            frame_interval: 0.05,
            kappa_cap: 1e4,
        }
    }
}

/// Statistics of the steps taken between two recorded frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLogEntry {
    /// Time of the frame that closes this interval.
    pub time: f64,
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub remeshes: usize,
    pub rejections: usize,
    /// Largest `κ_max·dt` seen.
    pub max_cfl: f64,
}

impl StepLogEntry {
    fn empty() -> Self {
        StepLogEntry {
            time: 0.0,
            steps: 0,
            dt_min: f64::INFINITY,
            dt_max: 0.0,
            remeshes: 0,
            rejections: 0,
            max_cfl: 0.0,
        }
    }

    fn record(&mut self, r: &StepRecord) {
        self.steps += 1;
        self.dt_min = self.dt_min.min(r.dt);
        self.dt_max = self.dt_max.max(r.dt);
        self.remeshes += r.remeshed as usize;
        self.rejections += r.rejections;
        self.max_cfl = self.max_cfl.max(r.cfl);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    NearSingular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub frames: Vec<FlowState>,
    /// One entry per recorded frame after the first.
    pub step_log: Vec<StepLogEntry>,
    pub stop: StopReason,
}

impl FlowTrajectory {
    /// Trajectory made of given frames (no step log), e.g. exact solutions.
    pub fn from_frames(frames: Vec<FlowState>) -> Result<Self> {
        if frames.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(CsfError::InvalidInput(
                "frame times must increase strictly".into(),
            ));
        }
        Ok(FlowTrajectory {
            frames,
            step_log: Vec::new(),
            stop: StopReason::Completed,
        })
    }

    pub fn mode(&self) -> Option<FlowMode> {
        self.frames.first().map(|f| f.mode)
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    pub fn start(&self) -> f64 {
        self.frames.first().map_or(f64::NAN, |f| f.time)
    }

    pub fn end(&self) -> f64 {
        self.frames.last().map_or(f64::NAN, |f| f.time)
    }

    /// Indices `(i, i+1)` and weight `w` with `time = (1−w) t_i + w t_{i+1}`.
    pub fn bracket(&self, time: f64) -> Result<(usize, usize, f64)> {
        let (start, end) = (self.start(), self.end());
        let slack = 1e-12 * (1.0 + time.abs());
        if self.frames.is_empty() || time < start - slack || time > end + slack {
            return Err(CsfError::OutOfWindow { time, start, end });
        }
        if self.frames.len() == 1 {
            return Ok((0, 0, 0.0));
        }
        let i = self
            .frames
            .partition_point(|f| f.time <= time)
            .clamp(1, self.frames.len() - 1)
            - 1;
        let (a, b) = (self.frames[i].time, self.frames[i + 1].time);
        Ok((i, i + 1, ((time - a) / (b - a)).clamp(0.0, 1.0)))
    }
}

/// Outcome of a single accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub dt: f64,
    pub rejections: usize,
    pub remeshed: bool,
    pub cfl: f64,
}

/// Reusable scratch space and remesh bookkeeping for repeated steps.
pub struct Integrator {
    controls: StepControls,
    kappa: Vec<f64>,
    normals: Vec<Vec2>,
    v1: Vec<Vec2>,
    mid: Vec<Vec2>,
    steps_since_remesh: usize,
    steps_since_check: usize,
    h_ref: f64,
}

impl Integrator {
    pub fn new(controls: StepControls) -> Self {
        Integrator {
            controls,
            kappa: Vec::new(),
            normals: Vec::new(),
            v1: Vec::new(),
            mid: Vec::new(),
            steps_since_remesh: 0,
            steps_since_check: 0,
            h_ref: 0.0,
        }
    }

    /// Normal velocity field into `out`; returns `max |κ|`.
    fn velocity(&mut self, pts: &[Vec2], closed: bool, mode: FlowMode, out: &mut Vec<Vec2>) -> f64 {
        kappa_and_normals(pts, closed, &mut self.kappa, &mut self.normals);
        out.clear();
        let mut kmax = 0.0f64;
        for ((p, n), k) in pts.iter().zip(&self.normals).zip(&self.kappa) {
            kmax = kmax.max(k.abs());
            let speed = match mode {
                FlowMode::Physical => *k,
                FlowMode::Rescaled => k + 0.5 * p.dot(*n),
            };
            out.push(*n * speed);
        }
        kmax
    }

    /// One RK2 step of at most `dt_max`, then remeshing per the controls.
    pub fn step(&mut self, state: &FlowState, dt_max: f64) -> Result<(FlowState, StepRecord)> {
        if !(dt_max > 0.0) {
            return Err(CsfError::InvalidInput("dt_max must be positive".into()));
        }
        let c = self.controls;
        let curve = &state.curve;
        let closed = curve.is_closed();
        let pts = curve.points();
        let h_min = curve
            .edge_lengths()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if self.h_ref == 0.0 {
            self.h_ref = h_min;
        }
        let dt_limit = c.cfl * h_min * h_min;
        // dt_max is halved at most max_halvings times to meet the diffusive limit
        if dt_max > dt_limit * (c.max_halvings as f64).exp2() {
            return Err(CsfError::StepRejected {
                attempts: c.max_halvings + 1,
                reason: format!(
                    "time step {dt_max:e} exceeds the diffusive limit {dt_limit:e} after {} halvings",
                    c.max_halvings
                ),
            });
        }
        let mut dt = dt_max.min(dt_limit);
        let mut v1 = std::mem::take(&mut self.v1);
        let mut mid = std::mem::take(&mut self.mid);
        let k1 = self.velocity(pts, closed, state.mode, &mut v1);
        let check_now = self.steps_since_check + 1 >= c.intersect_every.max(1);
        let mut reason = String::new();
        let mut accepted = None;
        for attempt in 0..=c.max_halvings {
            mid.clear();
            mid.extend(pts.iter().zip(&v1).map(|(p, v)| *p + *v * (0.5 * dt)));
            let mut v2 = Vec::with_capacity(pts.len());
            let k2 = self.velocity(&mid, closed, state.mode, &mut v2);
            let cfl = k1.max(k2) * dt;
            if cfl > c.curvature_cfl {
                reason = format!("curvature CFL {cfl:.3e} exceeds {}", c.curvature_cfl);
                dt *= 0.5;
                continue;
            }
            let new_pts: Vec<Vec2> = pts.iter().zip(&v2).map(|(p, v)| *p + *v * dt).collect();
            let cand = match DiscreteCurve::new(new_pts, closed, None) {
                Ok(cv) if cv.signed_area() * curve.signed_area() >= 0.0 || !closed => cv,
                Ok(_) => {
                    reason = "orientation flipped".into();
                    dt *= 0.5;
                    continue;
                }
                Err(e) => {
                    reason = e.to_string();
                    dt *= 0.5;
                    continue;
                }
            };
            if check_now && self_intersects(&cand) {
                reason = "self-intersection".into();
                dt *= 0.5;
                continue;
            }
            accepted = Some((cand, attempt, cfl));
            break;
        }
        self.v1 = v1;
        self.mid = mid;
        let (mut cand, rejections, cfl) = accepted.ok_or(CsfError::StepRejected {
            attempts: c.max_halvings + 1,
            reason,
        })?;
        self.steps_since_check = if check_now {
            0
        } else {
            self.steps_since_check + 1
        };
        self.steps_since_remesh += 1;
        let new_hmin = cand
            .edge_lengths()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let remesh = self.steps_since_remesh >= c.remesh_every.max(1)
            || new_hmin < c.remesh_shrink * self.h_ref;
        if remesh {
            cand = resample_with(&cand, &c.spacing)?;
            self.steps_since_remesh = 0;
            self.h_ref = cand
                .edge_lengths()
                .into_iter()
                .fold(f64::INFINITY, f64::min);
        }
        let time = state.time + dt;
        Ok((
            FlowState::new(cand, time, state.mode),
            StepRecord {
                dt,
                rejections,
                remeshed: remesh,
                cfl,
            },
        ))
    }
}

/// Single step with fresh integrator state.
pub fn step(state: &FlowState, dt_max: f64, controls: &StepControls) -> Result<FlowState> {
    Integrator::new(*controls)
        .step(state, dt_max)
        .map(|(s, _)| s)
}

/// Integrates over `[time, time + horizon]`, recording a frame every
/// `frame_interval` (and at the end).
pub fn evolve(
    state: &FlowState,
    horizon: f64,
    controls: &EvolveControls,
) -> Result<FlowTrajectory> {
    if !(horizon > 0.0) {
        return Err(CsfError::InvalidInput("horizon must be positive".into()));
    }
    if !(controls.frame_interval > 0.0) {
        return Err(CsfError::InvalidInput(
            "frame interval must be positive".into(),
        ));
    }
    let start = state.time;
    let end = start + horizon;
    let mut integ = Integrator::new(controls.step);
    let mut frames = vec![state.clone()];
    let mut log = Vec::new();
    let mut entry = StepLogEntry::empty();
    let mut cur = state.clone();
    let mut k = 1usize;
    let frame_time = |k: usize| (start + k as f64 * controls.frame_interval).min(end);
    let eps = |t: f64| 1e-12 * (1.0 + t.abs());
    let mut stop = StopReason::Completed;
    let mut total_steps = 0usize;
    while cur.time < end - eps(end) {
        let target = frame_time(k);
        let dt_cap = controls.dt_max.min(target - cur.time);
        let (mut next, rec) = integ.step(&cur, dt_cap)?;
        entry.record(&rec);
        total_steps += 1;
        let reached = (target - next.time).abs() <= eps(target) || next.time > target;
        if reached {
            next.time = target;
            next.curve = next.curve.with_time(Some(target));
        }
        let kmax = integ.kappa.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        cur = next;
        if kmax > controls.kappa_cap {
            stop = StopReason::NearSingular;
            info!(
                "stopping near singular time {} (max curvature {kmax:.3e})",
                cur.time
            );
            entry.time = cur.time;
            log.push(entry);
            frames.push(cur.clone());
            break;
        }
        if reached {
            if self_intersects(&cur.curve) {
                return Err(CsfError::StepRejected {
                    attempts: 1,
                    reason: format!("frame at {} self-intersects", cur.time),
                });
            }
            entry.time = cur.time;
            log.push(entry);
            entry = StepLogEntry::empty();
            frames.push(cur.clone());
            debug!(
                "frame {} at {:.6} after {total_steps} steps",
                frames.len() - 1,
                cur.time
            );
            k += 1;
        }
    }
    info!(
        "evolve finished: {} frames, {total_steps} steps",
        frames.len()
    );
    Ok(FlowTrajectory {
        frames,
        step_log: log,
        stop,
    })
}

/// Physical frame at `t < 0` mapped to the rescaled frame at `τ = −ln(−t)`.
pub fn rescale_frame(state: &FlowState) -> Result<FlowState> {
    if state.mode != FlowMode::Physical {
        return Err(CsfError::InvalidInput(
            "rescale_frame expects a physical frame".into(),
        ));
    }
    let t = state.time;
    if !(t < 0.0) {
        return Err(CsfError::OutOfDomain {
            what: "rescale_frame".into(),
            time: t,
        });
    }
    let k = (-t).powf(-0.5);
    let curve = state.curve.scaled(k)?;
    Ok(FlowState::rescaled(curve, -(-t).ln()))
}

/// Rotation angle of the knuckle tangent on one rescaled frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationAlignment {
    pub tau: f64,
    /// Angle of the unit tangent at the knuckle, in `(−π, π]`.
    pub angle: f64,
    /// Same angle unwrapped continuously along the trajectory.
    pub unwrapped: f64,
    pub source_knuckle: usize,
}

impl RotationAlignment {
    /// `S(τ)`: the rotation taking the knuckle tangent to `(1, 0)`.
    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotate(-self.angle)
    }
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Tangent angles along a tracked knuckle path.
pub fn align_rotation(
    traj: &FlowTrajectory,
    knuckle_path: &Path,
) -> Result<Vec<RotationAlignment>> {
    let mut out = Vec::with_capacity(traj.frames.len());
    let mut prev: Option<f64> = None;
    for (fi, frame) in traj.frames.iter().enumerate() {
        let entry = knuckle_path.entry(fi).ok_or_else(|| {
            CsfError::PathBroken(format!(
                "knuckle path {} has no point on frame {fi}",
                knuckle_path.id
            ))
        })?;
        let fd = frame.curve.frame()?;
        let t = crate::critical::interpolate_tangent(&fd, entry.arc);
        let raw = t.angle();
        let unwrapped = match prev {
            None => raw,
            Some(p) => p + wrap_angle(raw - p),
        };
        prev = Some(unwrapped);
        out.push(RotationAlignment {
            tau: frame.time,
            angle: wrap_angle(raw),
            unwrapped,
            source_knuckle: knuckle_path.id,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ExactFamily;

    #[test]
    fn circle_step() {
        let c = ExactFamily::circle().sample(-0.5, 256).unwrap();
        let s = FlowState::physical(c, -0.5);
        let next = step(&s, 1e-4, &StepControls::uniform(256)).unwrap();
        for p in next.curve.points() {
            assert!((p.norm() - 0.9998f64.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn rescaled_circle_is_fixed() {
        let c = ExactFamily::circle().sample(-1.0, 128).unwrap();
        let s = FlowState::rescaled(c, 0.0);
        let mut ctl = EvolveControls::default();
        ctl.step = StepControls::uniform(128);
        let traj = evolve(&s, 1.0, &ctl).unwrap();
        let last = traj.frames.last().unwrap();
        for p in last.curve.points() {
            assert!((p.norm() - 2f64.sqrt()).abs() < 1e-5);
        }
    }

    #[test]
    fn rescale_circle() {
        let c = ExactFamily::circle().sample(-2.0, 64).unwrap();
        let r = rescale_frame(&FlowState::physical(c, -2.0)).unwrap();
        assert!((r.time + 2f64.ln()).abs() < 1e-15);
        for p in r.curve.points() {
            assert!((p.norm() - 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn too_large_cap_is_rejected() {
        let c = ExactFamily::circle().sample(-0.5, 64).unwrap();
        let mut ctl = StepControls::uniform(64);
        ctl.cfl = 1e6;
        ctl.curvature_cfl = 1e-9;
        ctl.max_halvings = 3;
        let err = step(&FlowState::physical(c, -0.5), 1.0, &ctl).unwrap_err();
        assert!(matches!(err, CsfError::StepRejected { attempts: 4, .. }));
    }

    #[test]
    fn step_beyond_diffusive_limit_is_rejected() {
        let c = ExactFamily::circle().sample(-0.5, 64).unwrap();
        let mut ctl = StepControls::uniform(64);
        ctl.max_halvings = 2;
        let h = c.edge(0).norm();
        let state = FlowState::physical(c, -0.5);
        assert!(step(&state, 3.9 * ctl.cfl * h * h, &ctl).is_ok());
        let err = step(&state, 4.1 * ctl.cfl * h * h, &ctl).unwrap_err();
        assert!(
            matches!(err, CsfError::StepRejected { attempts: 3, .. }),
            "{err:?}"
        );
    }
}
