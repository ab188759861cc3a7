use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A transform that should be unitary is not.
    #[error("transform is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    /// Phase at which the coincidence fringe is stationary; carries no phase information.
    #[error("uninformative phase: |dP/dphi| = {derivative:.3e}")]
    UninformativePhase { derivative: f64 },
    /// All relevant counts are zero.
    #[error("no data: {0}")]
    NoData(&'static str),
    /// Too few points or a degenerate design for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// Observation outside the range reachable by the fitted fringe.
    #[error("observation {observed} outside fringe range [{low}, {high}]")]
    OutOfRange { observed: f64, low: f64, high: f64 },
    /// Fringe inversion has several solutions and no branch was given.
    #[error("ambiguous inversion: {candidates} solutions in the fitted range, a branch hint is required")]
    Ambiguous { candidates: usize },
    /// Malformed input data.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// Reading or writing a stream failed.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_unit(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(domain(format!("{name} = {value} must lie in [0, 1]")));
    }
    Ok(())
}
