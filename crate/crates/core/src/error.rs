use thiserror::Error;

use crate::sim::SimTrace;

/// Errors raised by the library.
///
/// Variants split into two families: bad input (validation) and numerical
/// breakdown. [`Error::is_numerical`] tells them apart, which the CLI maps
/// to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("improper transfer function: numerator degree {num} exceeds denominator degree {den}")]
    Improper { num: usize, den: usize },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unknown name `{0}`")]
    Unknown(String),

    #[error("signal too short: {0}")]
    TooShort(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-minimum-phase model: zero at {re:+.6e}{im:+.6e}j cannot be inverted")]
    NonMinimumPhase { re: f64, im: f64 },

    #[error("evaluation at a pole (omega = {0})")]
    Pole(f64),

    #[error("describing function undefined at omega = {omega}: {reason}")]
    DfUndefined { omega: f64, reason: String },

    #[error("base linear loop is not stable: largest pole real part {0:.6e}")]
    BaseUnstable(f64),

    #[error("reset recursion diverges at omega = {omega}: spectral radius {radius}")]
    Divergent { omega: f64, radius: f64 },

    #[error("matrix exponential overflow at omega = {0}")]
    ExpmOverflow(f64),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("simulation diverged at t = {time}")]
    Diverged { time: f64, trace: Box<SimTrace> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Pole(_)
                | Error::DfUndefined { .. }
                | Error::BaseUnstable(_)
                | Error::Divergent { .. }
                | Error::ExpmOverflow(_)
                | Error::Singular(_)
                | Error::NoConvergence
                | Error::Diverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
