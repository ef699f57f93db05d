//! Command-line arguments and their serialized form.
//!
//! Every subcommand's arguments are a plain record that clap parses and
//! serde writes, so a [`RunConfig`] saved with `--save-config` replays the
//! same run with `--config`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use csflab_core::exact::ExactFamily;
use csflab_core::flow::FlowMode;
use csflab_core::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "csflab", version, about = "Curve-shortening flow laboratory")]
pub struct Cli {
    /// Worker threads for data-parallel work (1 = sequential).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized tests.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Replay a saved run configuration instead of a subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the resolved run configuration to this file before running.
    #[arg(long, global = true)]
    pub save_config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Sample an exact solution to a curve file.
    Exact(ExactArgs),
    /// Evolve a curve by CSF or by the rescaled flow.
    Simulate(SimulateArgs),
    /// Map a physical trajectory to rescaled time.
    Rescale(RescaleArgs),
    /// Entropy of a curve.
    Entropy(EntropyArgs),
    /// Gaussian density ratio of a trajectory at a spacetime point.
    Density(DensityArgs),
    /// Critical points per frame and their paths.
    Diagnose(DiagnoseArgs),
    /// Acceptance suite, or vertex / graphical-radius tables.
    Verify(VerifyArgs),
    /// Spectral projections of the graph sheets of a rescaled trajectory.
    Spectral(SpectralArgs),
    /// Exponential decay fit of sheet norms from a spectral table.
    Decay(DecayArgs),
    /// Export a trajectory's `tau,F` series or a verify report.
    Export(ExportArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Exact(_) => "exact",
            Command::Simulate(_) => "simulate",
            Command::Rescale(_) => "rescale",
            Command::Entropy(_) => "entropy",
            Command::Density(_) => "density",
            Command::Diagnose(_) => "diagnose",
            Command::Verify(_) => "verify",
            Command::Spectral(_) => "spectral",
            Command::Decay(_) => "decay",
            Command::Export(_) => "export",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Circle,
    Line,
    #[value(alias = "grim_reaper")]
    GrimReaper,
    #[value(alias = "paper_clip")]
    PaperClip,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExactArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Physical time, or rescaled time with `--rescaled`.
    #[arg(long, allow_hyphen_values = true)]
    pub time: f64,
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long)]
    pub rescaled: bool,
    /// Half-width of the grim-reaper window (below π/2).
    #[arg(long, default_value_t = 1.4)]
    pub x_max: f64,
    /// Half-length of the sampled line.
    #[arg(long, default_value_t = 10.0)]
    pub half_length: f64,
    #[arg(long)]
    pub out: PathBuf,
}

impl ExactArgs {
    pub fn family(&self) -> ExactFamily {
        match self.family {
            Family::Circle => ExactFamily::circle(),
            Family::Line => ExactFamily::Line {
                angle: 0.0,
                offset: 0.0,
                half_length: self.half_length,
            },
            Family::GrimReaper => ExactFamily::grim_reaper(self.x_max),
            Family::PaperClip => ExactFamily::PaperClip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Physical,
    Rescaled,
}

impl From<Mode> for FlowMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Physical => FlowMode::Physical,
            Mode::Rescaled => FlowMode::Rescaled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Physical)]
    pub mode: Mode,
    /// Length of the integration window in the flow's time variable.
    #[arg(long)]
    pub horizon: f64,
    /// Start time; defaults to the curve's own time stamp.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<f64>,
    /// Point count for uniform remeshing.
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    /// Remesh with curvature-adaptive spacing instead of `n` uniform points.
    #[arg(long)]
    pub adaptive: bool,
    /// Turning angle per edge for adaptive spacing.
    #[arg(long, default_value_t = 0.15)]
    pub angle_step: f64,
    /// Upper bound on the time step.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 0.05)]
    pub frame_interval: f64,
    /// Diffusive CFL factor: `dt ≤ cfl·h_min²`.
    #[arg(long, default_value_t = 0.25)]
    pub cfl: f64,
    /// Step halvings tried before a step is rejected.
    #[arg(long, default_value_t = 20)]
    pub max_halvings: usize,
    #[arg(long, default_value_t = 1)]
    pub remesh_every: usize,
    /// Stop once the curvature exceeds this.
    #[arg(long, default_value_t = 1e4)]
    pub kappa_cap: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RescaleArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EntropyArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Grid points per search axis.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_point(s: &str) -> Result<Vec2, String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `a,b`, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok(Vec2::new(p(a)?, p(b)?))
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DensityArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true, default_value = "0,0")]
    pub x0: Vec2,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: f64,
    /// Parabolic scale of the density ratio.
    #[arg(long)]
    pub r: f64,
    /// Localize with a cutoff of this radius.
    #[arg(long)]
    pub localized: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true, default_value = "0,0")]
    pub x0: Vec2,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-frame counts as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[command(args_conflicts_with_subcommands = true)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub form: Option<VerifyForm>,
    /// `all` or a comma-separated list of criterion ids.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum VerifyForm {
    /// Curvature and grim-reaper distance along sharp-vertex paths.
    Vertex(VertexArgs),
    /// Graphical radius per frame.
    Radius(RadiusArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct VertexArgs {
    #[arg(long)]
    pub traj: PathBuf,
    /// Half-width of the grim-reaper fit window in reaper units.
    #[arg(long, default_value_t = 1.4)]
    pub window: f64,
    /// Slack on the `|χ|` lower bound.
    #[arg(long, default_value_t = 0.02)]
    pub slack: f64,
    /// CSV output (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RadiusArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Expected number of sheets.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// Rotation taking the asymptotic line to the horizontal axis.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub angle: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectralArgs {
    #[arg(long)]
    pub traj: PathBuf,
    /// Cut-off radius of `η(y/r)`.
    #[arg(long, default_value_t = 4.0)]
    pub r: f64,
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub angle: f64,
    /// Radius of the ball for the `c2_norm` column.
    #[arg(long, default_value_t = 3.0)]
    pub c2_radius: f64,
    #[arg(long, default_value_t = 12.0)]
    pub y_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DecayArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Ball radius of the fitted norms; must match the table's `c2_radius`.
    #[arg(long = "R", default_value_t = 3.0)]
    pub radius: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[group(required = true, multiple = false, id = "source")]
pub struct ExportSource {
    /// Rescaled trajectory; exported as its `tau,F` series.
    #[arg(long)]
    pub traj: Option<PathBuf>,
    /// Report written by `verify --out`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExportArgs {
    #[command(flatten)]
    pub source: ExportSource,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: PathBuf,
}

/// A complete, replayable invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub command: Command,
}

impl RunConfig {
    /// Positive tolerances and scales, writable output locations.
    pub fn validate(&self) -> Result<(), String> {
        let mut errs = Vec::new();
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("--{name} must be positive, got {v}"));
            }
        };
        let mut outs: Vec<&Path> = Vec::new();
        match &self.command {
            Command::Exact(a) => {
                positive("x-max", a.x_max);
                positive("half-length", a.half_length);
                outs.push(&a.out);
            }
            Command::Simulate(a) => {
                positive("horizon", a.horizon);
                positive("dt", a.dt);
                positive("frame-interval", a.frame_interval);
                positive("cfl", a.cfl);
                positive("angle-step", a.angle_step);
                positive("kappa-cap", a.kappa_cap);
                outs.push(&a.out);
            }
            Command::Rescale(a) => outs.push(&a.out),
            Command::Entropy(a) => outs.extend(a.out.as_deref()),
            Command::Density(a) => {
                positive("r", a.r);
                if let Some(r) = a.localized {
                    positive("localized", r);
                }
                outs.extend(a.out.as_deref());
            }
            Command::Diagnose(a) => {
                outs.push(&a.out);
                outs.extend(a.csv.as_deref());
            }
            Command::Verify(a) => match &a.form {
                None => outs.extend(a.out.as_deref()),
                Some(VerifyForm::Vertex(v)) => {
                    positive("window", v.window);
                    positive("slack", v.slack);
                    outs.extend(v.out.as_deref());
                }
                Some(VerifyForm::Radius(v)) => {
                    positive("eps", v.eps);
                    outs.extend(v.out.as_deref());
                }
            },
            Command::Spectral(a) => {
                positive("r", a.r);
                positive("c2-radius", a.c2_radius);
                positive("y-max", a.y_max);
                positive("h", a.h);
                outs.push(&a.out);
            }
            Command::Decay(a) => {
                positive("R", a.radius);
                outs.extend(a.out.as_deref());
            }
            Command::Export(a) => outs.push(&a.out),
        }
        if self.threads == Some(0) {
            errs.push("--threads must be at least 1".into());
        }
        for p in outs {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            if !dir.is_dir() {
                errs.push(format!("output directory {} does not exist", dir.display()));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs.join("; "))
        }
    }
}
