use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: parameters, config documents, control sequences.
    Validation,
    /// A numerical routine could not deliver its contract.
    Numerical,
    /// Filesystem or serialization failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("lattice needs {required} stored values, above the cap of {cap}")]
    LatticeTooLarge { required: u64, cap: u64 },

    #[error("terminal payoff is not finite at node {node} (x = {x}): {value}")]
    NonFinitePayoff { node: i64, x: f64, value: f64 },

    #[error("generator `{generator}` returned a non-finite value at t = {t}, y = {y}, z = {z}")]
    NonFiniteGenerator { generator: String, t: f64, y: f64, z: f64 },

    #[error("no sign change found around {center} after {expansions} expansions (last radius {radius})")]
    BracketFailure { center: f64, radius: f64, expansions: usize },

    #[error("root not within tolerance {tol} after {iterations} iterations (residual {residual})")]
    ToleranceFailure { tol: f64, residual: f64, iterations: usize },

    #[error(
        "implicit step is not monotone at t = {t}: dt * u_t = {product} >= 1; \
         use at least {min_steps} time steps"
    )]
    StepConditionViolation { t: f64, product: f64, min_steps: usize },

    #[error("Picard iteration is not a contraction: dt * lipschitz = {product} >= 1")]
    ContractionViolation { product: f64 },

    #[error("brute-force enumeration needs {required} strategies, above the cap of {cap}")]
    EnumerationCap { required: f64, cap: f64 },

    #[error("control sequence has {got} entries, expected {expected}")]
    ControlLength { expected: usize, got: usize },

    #[error("control volatility {sigma} is not in the admissible set")]
    InadmissibleControl { sigma: f64 },

    #[error("at slice {slice}, node {node}: {source}")]
    AtNode {
        slice: usize,
        node: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at `{path}`: {message}{}", did_you_mean(.suggestion))]
    Config {
        path: String,
        message: String,
        suggestion: Option<String>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn did_you_mean(suggestion: &Option<String>) -> String {
    match suggestion {
        Some(s) => format!(" (did you mean `{s}`?)"),
        None => String::new(),
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. }
            | Error::LatticeTooLarge { .. }
            | Error::ControlLength { .. }
            | Error::InadmissibleControl { .. }
            | Error::EnumerationCap { .. }
            | Error::Config { .. } => ErrorKind::Validation,
            Error::NonFinitePayoff { .. }
            | Error::NonFiniteGenerator { .. }
            | Error::BracketFailure { .. }
            | Error::ToleranceFailure { .. }
            | Error::StepConditionViolation { .. }
            | Error::ContractionViolation { .. } => ErrorKind::Numerical,
            Error::AtNode { source, .. } => source.kind(),
            Error::Io { .. } | Error::Json(_) | Error::Csv(_) => ErrorKind::Io,
        }
    }

    pub(crate) fn at_node(self, slice: usize, node: i64) -> Error {
        Error::AtNode {
            slice,
            node,
            source: Box::new(self),
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io { path: path.into(), source }
    }
}
