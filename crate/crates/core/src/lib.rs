//! Numerical laboratory for curve-shortening flow (CSF) on planar polylines.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: discrete curves, Frenet data, resampling, embeddedness.
//! * [`exact`]: closed-form solutions (circle, line, grim reaper, paper clip)
//!   used as oracles by everything else.
//! * [`flow`]: explicit integration of CSF and of the rescaled flow.
//! * [`gaussian`]: Gaussian weighted length, entropy and density ratios.
//! * [`critical`]: tips, knuckles, vertices, zero counting and path tracking.
//! * [`asymptotics`]: grim-reaper fitting, regularity scale, graphical radius.
//! * [`spectral`]: Gaussian `L²` machinery for graph sheets of rescaled flows.
//!
//! Heavy inner loops (grid searches, per-frame analysis) go through [`par`],
//! which runs on rayon when the `parallel` feature is enabled.

pub mod asymptotics;
pub mod critical;
mod error;
pub mod exact;
pub mod flow;
pub mod gaussian;
pub mod geometry;
pub mod io;
pub mod par;
pub mod spectral;
pub mod spline;
pub(crate) mod zeros;

pub use error::{CsfError, Result};
pub use geometry::{DiscreteCurve, FrameData, Vec2};
