//! Execution of each subcommand. Every command returns the one-line summary
//! printed by the driver.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use csflab_core::asymptotics::{graphical_radius, grim_fit, vertex_ode_check};
use csflab_core::critical::{
    detect_critical, detect_vertices, distance_profile, interpolate_field, track_paths, PathSet,
    PointKind, MULTIPLE_TOL, VERTEX_TOL,
};
use csflab_core::flow::{
    evolve, rescale_frame, EvolveControls, FlowMode, FlowState, FlowTrajectory, StepControls,
};
use csflab_core::gaussian::{
    entropy, monotonicity_report, theta, theta_localized, EntropySearch, MonotonicityReport,
};
use csflab_core::geometry::{AdaptiveSpacing, SpacingPolicy};
use csflab_core::io::{
    load_curve, read_csv, read_json, read_trajectory, save_curve, write_csv, write_csv_to,
    write_json, write_trajectory, Cell,
};
use csflab_core::par::Exec;
use csflab_core::spectral::{decay_fit, extract_sheets, project, Grid};
use csflab_core::{CsfError, Vec2};
use serde::{Deserialize, Serialize};

use crate::config::*;
use crate::verify::{criterion_ids, Suite, VerifyOutcome};

/// Result of one command: the summary line and whether the run passed.
pub struct Outcome {
    pub summary: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Outcome {
            summary,
            exit_code: 0,
        }
    }
}

/// Raised for bad flag values found after parsing; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn execute(cfg: &RunConfig, exec: Exec) -> anyhow::Result<Outcome> {
    match &cfg.command {
        Command::Exact(a) => exact(a),
        Command::Simulate(a) => simulate(a),
        Command::Rescale(a) => rescale(a),
        Command::Entropy(a) => entropy_cmd(a, exec),
        Command::Density(a) => density(a),
        Command::Diagnose(a) => diagnose(a, exec),
        Command::Verify(a) => match &a.form {
            None => verify_suite(a, cfg.seed, exec),
            Some(VerifyForm::Vertex(v)) => verify_vertex(v, exec),
            Some(VerifyForm::Radius(v)) => verify_radius(v),
        },
        Command::Spectral(a) => spectral(a),
        Command::Decay(a) => decay(a),
        Command::Export(a) => export(a),
    }
}

fn exact(a: &ExactArgs) -> anyhow::Result<Outcome> {
    let fam = a.family();
    let curve = if a.rescaled {
        fam.sample_rescaled(a.time, &SpacingPolicy::Uniform { n: a.n })?
    } else {
        fam.sample(a.time, a.n)?
    };
    save_curve(&a.out, &curve)?;
    let var = if a.rescaled { "τ" } else { "t" };
    Ok(Outcome::ok(format!(
        "exact: {} at {var} = {} with {} points, length {:.6} -> {}",
        fam.name(),
        a.time,
        curve.len(),
        curve.length(),
        a.out.display()
    )))
}

pub fn simulate_controls(a: &SimulateArgs) -> EvolveControls {
    let spacing = if a.adaptive {
        SpacingPolicy::Adaptive(AdaptiveSpacing {
            angle_step: a.angle_step,
            ..AdaptiveSpacing::default()
        })
    } else {
        SpacingPolicy::Uniform { n: a.n }
    };
    EvolveControls {
        step: StepControls {
            spacing,
            remesh_every: a.remesh_every,
            cfl: a.cfl,
            max_halvings: a.max_halvings,
            ..StepControls::uniform(a.n)
        },
        dt_max: a.dt,
        frame_interval: a.frame_interval,
        kappa_cap: a.kappa_cap,
    }
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<Outcome> {
    let curve = load_curve(&a.input)?;
    let start = a.start.or(curve.time()).unwrap_or(0.0);
    let controls = simulate_controls(a);
    let traj = evolve(
        &FlowState::new(curve, start, a.mode.into()),
        a.horizon,
        &controls,
    )?;
    write_trajectory(&a.out, &traj, Some(&controls))?;
    let steps: usize = traj.step_log.iter().map(|e| e.steps).sum();
    Ok(Outcome::ok(format!(
        "simulate: {} frames on [{}, {}] in {steps} steps, stop {:?} -> {}",
        traj.frames.len(),
        traj.start(),
        traj.end(),
        traj.stop,
        a.out.display()
    )))
}

fn rescale(a: &RescaleArgs) -> anyhow::Result<Outcome> {
    let (header, traj) = read_trajectory(&a.traj)?;
    let frames = traj
        .frames
        .iter()
        .map(rescale_frame)
        .collect::<csflab_core::Result<Vec<_>>>()?;
    let mut out = FlowTrajectory::from_frames(frames)?;
    out.step_log = traj.step_log;
    out.stop = traj.stop;
    write_trajectory(&a.out, &out, header.controls.as_ref())?;
    Ok(Outcome::ok(format!(
        "rescale: {} frames, τ in [{}, {}] -> {}",
        out.frames.len(),
        out.start(),
        out.end(),
        a.out.display()
    )))
}

fn entropy_cmd(a: &EntropyArgs, exec: Exec) -> anyhow::Result<Outcome> {
    let curve = load_curve(&a.input)?;
    let search = EntropySearch {
        grid: a.grid,
        exec,
        ..EntropySearch::default()
    };
    let rep = entropy(&curve, &search)?;
    if let Some(out) = &a.out {
        write_json(out, &rep)?;
    }
    Ok(Outcome::ok(format!(
        "entropy: {} at x0 = ({}, {}), λ = {}{}",
        rep.value,
        rep.x0.x,
        rep.x0.y,
        rep.scale,
        if rep.truncated {
            " (open curve, lower bound)"
        } else {
            ""
        }
    )))
}

fn density(a: &DensityArgs) -> anyhow::Result<Outcome> {
    let (_, traj) = read_trajectory(&a.traj)?;
    let rep = match a.localized {
        Some(radius) => theta_localized(&traj, a.x0, a.t0, radius, a.r)?,
        None => theta(&traj, a.x0, a.t0, a.r)?,
    };
    if let Some(out) = &a.out {
        write_json(out, &rep)?;
    }
    Ok(Outcome::ok(format!(
        "density: {:?} = {} at ({}, {}), t0 = {}, r = {}",
        rep.kind, rep.value, a.x0.x, a.x0.y, a.t0, a.r
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub time: f64,
    /// `ok`, or the error that prevented the counts.
    pub status: String,
    pub knuckles: usize,
    pub tips: usize,
    pub fingers: usize,
    pub tails: usize,
    pub sharp: usize,
    pub flat: usize,
    pub inflections: usize,
    pub bumpy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTable {
    pub kind: PointKind,
    pub status: String,
    pub paths: Option<PathSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub x0: Vec2,
    pub mode: Option<FlowMode>,
    pub frames: Vec<FrameCounts>,
    pub paths: Vec<PathTable>,
}

fn frame_counts(f: &FlowState, x0: Vec2) -> FrameCounts {
    let mut c = FrameCounts {
        time: f.time,
        status: "ok".into(),
        knuckles: 0,
        tips: 0,
        fingers: 0,
        tails: 0,
        sharp: 0,
        flat: 0,
        inflections: 0,
        bumpy: false,
    };
    let res = (|| -> csflab_core::Result<()> {
        let crit = detect_critical(&distance_profile(&f.curve, x0)?, MULTIPLE_TOL)?;
        c.knuckles = crit.knuckles.len();
        c.tips = crit.tips.len();
        c.fingers = crit.fingers.len();
        c.tails = crit.tails.len();
        let v = detect_vertices(&f.curve, VERTEX_TOL)?;
        c.sharp = v.sharp.len();
        c.flat = v.flat.len();
        c.inflections = v.inflections.len();
        c.bumpy = v.bumpy;
        Ok(())
    })();
    if let Err(e) = res {
        c.status = e.to_string();
    }
    c
}

pub fn diagnose_report(traj: &FlowTrajectory, x0: Vec2, exec: Exec) -> DiagnoseReport {
    let frames = csflab_core::par::map(exec, &traj.frames, |f| frame_counts(f, x0));
    let kinds = [
        PointKind::Tip,
        PointKind::Knuckle,
        PointKind::SharpVertex,
        PointKind::FlatVertex,
        PointKind::Inflection,
    ];
    let paths = kinds
        .iter()
        .map(|&kind| match track_paths(traj, kind, Some(x0), exec) {
            Ok(p) => PathTable {
                kind,
                status: "ok".into(),
                paths: Some(p),
            },
            Err(e) => PathTable {
                kind,
                status: e.to_string(),
                paths: None,
            },
        })
        .collect();
    DiagnoseReport {
        x0,
        mode: traj.mode(),
        frames,
        paths,
    }
}

fn diagnose(a: &DiagnoseArgs, exec: Exec) -> anyhow::Result<Outcome> {
    let (_, traj) = read_trajectory(&a.traj)?;
    let rep = diagnose_report(&traj, a.x0, exec);
    write_json(&a.out, &rep)?;
    if let Some(csv) = &a.csv {
        let rows: Vec<Vec<Cell>> = rep
            .frames
            .iter()
            .filter(|f| {
                let ok = f.status == "ok";
                if !ok {
                    log::warn!("frame at {} left out of the CSV: {}", f.time, f.status);
                }
                ok
            })
            .map(|f| {
                vec![
                    f.time.into(),
                    f.knuckles.into(),
                    f.tips.into(),
                    f.sharp.into(),
                    f.flat.into(),
                    f.inflections.into(),
                    f.bumpy.into(),
                ]
            })
            .collect();
        write_csv(
            csv,
            &[
                "tau",
                "knuckles",
                "tips",
                "sharp",
                "flat",
                "inflections",
                "bumpy",
            ],
            &rows,
        )?;
    }
    let failed = rep.frames.iter().filter(|f| f.status != "ok").count();
    Ok(Outcome::ok(format!(
        "diagnose: {} frames ({failed} failed), {} path kinds tracked -> {}",
        rep.frames.len(),
        rep.paths.iter().filter(|p| p.paths.is_some()).count(),
        a.out.display()
    )))
}

pub fn parse_suite(spec: &str) -> Result<Vec<u32>, UsageError> {
    if spec.trim() == "all" {
        return Ok(criterion_ids());
    }
    let known = criterion_ids();
    let mut ids = Vec::new();
    for part in spec.split(',') {
        let id: u32 = part
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("bad criterion id {part:?} in --suite")))?;
        if !known.contains(&id) {
            return Err(UsageError(format!(
                "no criterion {id}; ids are 1 to {}",
                known.len()
            )));
        }
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    ids.sort_unstable();
    Ok(ids)
}

fn verify_suite(a: &VerifyArgs, seed: u64, exec: Exec) -> anyhow::Result<Outcome> {
    let ids = parse_suite(&a.suite)?;
    let outcome = Suite::new(seed, exec).run(&ids);
    for c in &outcome.criteria {
        println!("{}", c.summary_line());
    }
    if let Some(out) = &a.out {
        write_json(out, &outcome)?;
    }
    let passed = outcome.criteria.iter().filter(|c| c.pass).count();
    Ok(Outcome {
        summary: format!(
            "verify: {passed}/{} criteria passed",
            outcome.criteria.len()
        ),
        exit_code: outcome.exit_code,
    })
}

fn csv_sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn verify_vertex(a: &VertexArgs, exec: Exec) -> anyhow::Result<Outcome> {
    let (_, traj) = read_trajectory(&a.traj)?;
    let paths = track_paths(&traj, PointKind::SharpVertex, None, exec)?;
    let alive: Vec<_> = paths
        .paths
        .iter()
        .filter(|p| p.alive_on_all(traj.frames.len()))
        .collect();
    if alive.is_empty() {
        return Err(
            CsfError::PathBroken("no sharp-vertex path spans the whole trajectory".into()).into(),
        );
    }
    let mut rows = Vec::new();
    let mut bounds = true;
    for p in &alive {
        let rep = vertex_ode_check(&traj, p, a.slack)?;
        bounds &= rep.lower_bound_holds() && rep.trend_holds();
        let fits = csflab_core::par::map_range(exec, traj.frames.len(), |k| {
            let e = p.entry(k).expect("path spans all frames");
            let frame = traj.frames[k].curve.frame()?;
            let kappa = interpolate_field(
                &frame.kappa,
                &frame.arclengths,
                frame.length,
                frame_closed(&traj, k),
                e.arc,
            );
            grim_fit(&traj, k, e.arc, 1.0 / kappa.abs(), a.window).map(|f| f.c2_distance)
        });
        for (k, fit) in fits.into_iter().enumerate() {
            let c2 = match fit {
                Ok(d) => d,
                Err(e) => {
                    log::warn!("grim fit failed on frame {k} of path {}: {e}", p.id);
                    f64::NAN
                }
            };
            rows.push(vec![
                rep.taus[k].into(),
                p.id.into(),
                rep.chi[k].into(),
                c2.into(),
            ]);
        }
    }
    write_csv_to(
        csv_sink(a.out.as_deref())?,
        &["tau", "path", "chi", "c2_distance"],
        &rows,
    )?;
    Ok(Outcome::ok(format!(
        "verify vertex: {} paths over {} frames, curvature bounds {}",
        alive.len(),
        traj.frames.len(),
        if bounds { "hold" } else { "violated" }
    )))
}

fn frame_closed(traj: &FlowTrajectory, k: usize) -> bool {
    traj.frames[k].curve.is_closed()
}

fn verify_radius(a: &RadiusArgs) -> anyhow::Result<Outcome> {
    let (_, traj) = read_trajectory(&a.traj)?;
    if traj.mode() != Some(FlowMode::Rescaled) {
        bail!(CsfError::InvalidInput(
            "verify radius needs a rescaled trajectory".into()
        ));
    }
    let mut rows = Vec::new();
    let mut failing = 0;
    for f in &traj.frames {
        let rep = graphical_radius(std::slice::from_ref(&f.curve), f.time, a.angle, a.eps, a.m)?;
        failing += (!rep.bounds_hold()) as usize;
        rows.push(vec![
            f.time.into(),
            rep.rho.into(),
            rep.rho_hat.into(),
            rep.bounds_hold().into(),
        ]);
    }
    write_csv_to(
        csv_sink(a.out.as_deref())?,
        &["tau", "rho", "rho_hat", "bounds_hold"],
        &rows,
    )?;
    Ok(Outcome::ok(format!(
        "verify radius: {} frames, {failing} violating the sheet bounds",
        traj.frames.len()
    )))
}

pub const SPECTRAL_COLUMNS: [&str; 8] = [
    "tau",
    "sheet",
    "a",
    "b",
    "stable_norm",
    "grad_norm",
    "c2_norm",
    "c2_radius",
];

fn spectral(a: &SpectralArgs) -> anyhow::Result<Outcome> {
    let (_, traj) = read_trajectory(&a.traj)?;
    if !traj.frames.is_empty() && traj.mode() != Some(FlowMode::Rescaled) {
        bail!(CsfError::InvalidInput(
            "spectral needs a rescaled trajectory".into()
        ));
    }
    let grid = Grid::new(a.y_max, a.h)?;
    let mut rows = Vec::new();
    for f in &traj.frames {
        let sheets = extract_sheets(
            std::slice::from_ref(&f.curve),
            a.angle,
            a.m,
            grid,
            a.r,
            f.time,
        )?;
        for s in &sheets {
            let p = project(s)?;
            rows.push(vec![
                f.time.into(),
                s.sheet.into(),
                p.a.into(),
                p.b.into(),
                p.stable_norm.into(),
                p.grad_norm.into(),
                s.c2_norm(a.c2_radius).into(),
                a.c2_radius.into(),
            ]);
        }
    }
    write_csv(&a.out, &SPECTRAL_COLUMNS, &rows)?;
    Ok(Outcome::ok(format!(
        "spectral: {} frames × {} sheets -> {}",
        traj.frames.len(),
        a.m,
        a.out.display()
    )))
}

fn decay(a: &DecayArgs) -> anyhow::Result<Outcome> {
    let t = read_csv(&a.input)?;
    let (tau, norm, radius) = (
        t.column("tau")?,
        t.column("c2_norm")?,
        t.column("c2_radius")?,
    );
    if let Some(r) = radius.iter().find(|r| (**r - a.radius).abs() > 1e-12) {
        bail!(UsageError(format!(
            "table norms were taken on a ball of radius {r}, not --R {}",
            a.radius
        )));
    }
    // largest sheet norm per frame; the key is the exact bit pattern of τ
    let mut per_tau: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (t, v) in tau.iter().zip(&norm) {
        let e = per_tau.entry(t.to_bits()).or_insert((*t, 0.0));
        e.1 = e.1.max(*v);
    }
    let mut series: Vec<(f64, f64)> = per_tau.into_values().collect();
    series.sort_by(|x, y| x.0.total_cmp(&y.0));
    let fit = decay_fit(&series)?;
    if let Some(out) = &a.out {
        write_json(out, &fit)?;
    }
    Ok(Outcome::ok(format!(
        "decay: rate {} (r² = {}) over {} frames",
        fit.rate,
        fit.r2,
        series.len()
    )))
}

pub const EXPORT_TRAJECTORY_COLUMNS: [&str; 2] = ["tau", "F"];
pub const EXPORT_REPORT_COLUMNS: [&str; 7] = [
    "id",
    "criterion",
    "check",
    "measured",
    "expected",
    "tolerance",
    "pass",
];

/// `tau,F` series of a rescaled trajectory; empty for an empty trajectory.
pub fn trajectory_series(traj: &FlowTrajectory) -> anyhow::Result<MonotonicityReport> {
    if traj.frames.is_empty() {
        return Ok(MonotonicityReport {
            taus: Vec::new(),
            values: Vec::new(),
            max_jump: 0.0,
        });
    }
    Ok(monotonicity_report(traj, Exec::Sequential)?)
}

fn export(a: &ExportArgs) -> anyhow::Result<Outcome> {
    let rows = match (&a.source.traj, &a.source.report) {
        (Some(p), _) => {
            let (_, traj) = read_trajectory(p)?;
            let rep = trajectory_series(&traj)?;
            match a.format {
                Format::Csv => {
                    let rows: Vec<Vec<Cell>> = rep
                        .taus
                        .iter()
                        .zip(&rep.values)
                        .map(|(t, f)| vec![(*t).into(), (*f).into()])
                        .collect();
                    write_csv(&a.out, &EXPORT_TRAJECTORY_COLUMNS, &rows)?;
                }
                Format::Json => write_json(&a.out, &rep)?,
            }
            rep.taus.len()
        }
        (None, Some(p)) => {
            let rep: VerifyOutcome = read_json(p)?;
            match a.format {
                Format::Csv => {
                    let mut rows: Vec<Vec<Cell>> = Vec::new();
                    for c in &rep.criteria {
                        if let Some(e) = &c.error {
                            rows.push(vec![
                                c.id.into(),
                                c.name.as_str().into(),
                                format!("error: {e}").as_str().into(),
                                f64::NAN.into(),
                                "".into(),
                                0.0.into(),
                                false.into(),
                            ]);
                        }
                        for k in &c.checks {
                            rows.push(vec![
                                c.id.into(),
                                c.name.as_str().into(),
                                k.label.as_str().into(),
                                k.measured.into(),
                                k.expected.as_str().into(),
                                k.tolerance.into(),
                                k.pass.into(),
                            ]);
                        }
                    }
                    write_csv(&a.out, &EXPORT_REPORT_COLUMNS, &rows)?;
                    rows.len()
                }
                Format::Json => {
                    write_json(&a.out, &rep)?;
                    rep.criteria.len()
                }
            }
        }
        (None, None) => bail!(UsageError("export needs --traj or --report".into())),
    };
    Ok(Outcome::ok(format!(
        "export: {rows} rows -> {}",
        a.out.display()
    )))
}
