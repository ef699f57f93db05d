use thiserror::Error;

pub type Result<T> = std::result::Result<T, CsfError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsfError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("degenerate spacing: edge {edge} has length {length:e} (diameter {diameter:e})")]
    DegenerateSpacing {
        edge: usize,
        length: f64,
        diameter: f64,
    },
    #[error("time {time} is outside the domain of {what}")]
    OutOfDomain { what: String, time: f64 },
    #[error("step rejected after {attempts} attempts: {reason}")]
    StepRejected { attempts: usize, reason: String },
    #[error("requested time {time} is outside the trajectory window [{start}, {end}]")]
    OutOfWindow { time: f64, start: f64, end: f64 },
    #[error("flow is not proper inside the cutoff support: {0}")]
    NotProper(String),
    #[error("distance profile is degenerate (phi_s vanishes identically)")]
    DegenerateProfile,
    #[error("vertex set is degenerate (kappa_s vanishes identically)")]
    DegenerateVertexSet,
    #[error("chord between knuckles crosses the finger arc")]
    SelfCrossingChord,
    #[error("boundary condition violated: {0}")]
    BoundaryViolated(String),
    #[error("path broken: {0}")]
    PathBroken(String),
    #[error("zero curvature at index {0}")]
    ZeroCurvature(usize),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("orientation ambiguous: curvature vanishes at the vertex")]
    OrientationAmbiguous,
    #[error("trajectory window too small: {0}")]
    WindowTooSmall(String),
    #[error("sheet count mismatch: expected {expected}, found {found} at abscissa {at}")]
    SheetCountMismatch {
        expected: usize,
        found: usize,
        at: f64,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-positive value {value} at sample {index}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for CsfError {
    fn from(e: std::io::Error) -> Self {
        CsfError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CsfError {
    fn from(e: serde_json::Error) -> Self {
        CsfError::Parse(e.to_string())
    }
}
