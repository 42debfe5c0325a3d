use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("probability {value} for {context} is outside [0, 1]")]
    InvalidProbability { context: String, value: f64 },

    #[error("{0} must not be empty")]
    EmptyInput(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("system is not solvable: spectral radius {spectral_radius:.6} >= 1")]
    Solvability { spectral_radius: f64 },

    #[error("matrix I - A is singular")]
    Singular,

    #[error("unknown {kind} '{id}'")]
    UnknownId { kind: &'static str, id: String },

    #[error("configuration index {index} out of range for network '{network}' ({count} configurations)")]
    IndexOutOfRange {
        network: String,
        index: usize,
        count: usize,
    },

    #[error("configuration '{label}' of network '{network}' contains a cycle")]
    CyclicLayer { network: String, label: String },

    #[error("node '{node}' has no {hazard} fragility curve")]
    MissingCurve { node: String, hazard: String },

    #[error("curve '{curve}' expects {expected} but received {found}")]
    UnitMismatch {
        curve: String,
        expected: String,
        found: String,
    },

    #[error("intensity {value} for {context} is negative or not finite")]
    InvalidIntensity { context: String, value: f64 },

    #[error("invalid curve '{curve}': {reason}")]
    InvalidCurve { curve: String, reason: String },

    #[error("fixed point did not converge after {iterations} iterations (last change {last_change:e})")]
    NonConvergent {
        iterations: usize,
        last_change: f64,
        history: Vec<f64>,
    },

    #[error("network '{network}' cannot be expressed as an event tree: {reason}")]
    StructuralMismatch { network: String, reason: String },

    #[error("malformed fault tree: {0}")]
    MalformedTree(String),

    #[error("ensemble weights must be non-negative and not all zero")]
    ZeroWeights,

    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),

    #[error("reports cannot be combined: {0}")]
    IncompatibleReports(String),

    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub(crate) fn check_probability(context: &str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidProbability {
            context: context.to_string(),
            value,
        })
    }
}
