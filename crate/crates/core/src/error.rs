use thiserror::Error;

/// Errors produced by network construction, inference and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("acyclicity violated: edge from unit {parent} into unit {child} (parents must precede children)")]
    Acyclicity { child: usize, parent: usize },

    #[error("negative weight {weight} on edge ({child}, {parent}) in a noisy-or network")]
    NegativeWeight {
        child: usize,
        parent: usize,
        weight: f64,
    },

    #[error("negative bias {bias} on unit {unit} in a noisy-or network")]
    NegativeBias { unit: usize, bias: f64 },

    #[error("unit index {index} out of range 1..={n_units}")]
    BadIndex { index: usize, n_units: usize },

    #[error("duplicate {what} for unit(s) {index}")]
    Duplicate { what: &'static str, index: String },

    #[error("non-finite {what}")]
    NonFinite { what: String },

    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("network must have at least one unit")]
    Empty,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("activation domain error: {0}")]
    Domain(String),

    #[error("enumeration over {free} free units exceeds the bound of {bound}")]
    TooLarge { free: usize, bound: usize },

    #[error("mean vector entry {index} = {value} is not valid: {reason}")]
    InvalidMean {
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("scheme {scheme} is not available for {activation} networks")]
    IncompatibleScheme {
        scheme: &'static str,
        activation: &'static str,
    },

    #[error("degenerate clamp: ln Z = 0, relative error undefined")]
    DegenerateClamp,

    #[error("Legendre inversion did not converge (residual {residual:e} after {iterations} iterations)")]
    NotConverged { residual: f64, iterations: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
