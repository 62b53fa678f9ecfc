use thiserror::Error;

/// Broad failure classes, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// A hypothesis without which the recursion is undefined does not hold.
    Hypothesis,
    /// A linear solve or quotient broke down.
    Numerical,
    /// Inconsistent or malformed input.
    Input,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error(
        "ellipticity violated: a = {value} at time node {time_node}, spatial node {space_node}"
    )]
    Ellipticity {
        time_node: usize,
        space_node: usize,
        value: f64,
    },

    #[error("singular system matrix at time node {node}")]
    SingularSystem { node: usize },

    #[error("non-finite state produced at time node {node}")]
    NonFinite { node: usize },

    #[error("propagation failed for kernel entry (n = {n}, j = {j}): {source}")]
    Kernel {
        n: usize,
        j: usize,
        source: Box<Error>,
    },

    #[error("measurement not separated from zero at node {node} (|phi| = {value:e})")]
    MeasurementNearZero { node: usize, value: f64 },

    #[error("quadrature denominator degenerate at node {node} ({value:e}), refine h")]
    DegenerateDenominator { node: usize, value: f64 },

    #[error("sign condition violated at t = 0: alpha(0) = {alpha0}, phi(0) = {phi0}")]
    SignAtOrigin { alpha0: f64, phi0: f64 },

    #[error("no positivity at t=0, phi(0)*alpha(0) sign condition violated (xi(0) = {xi0})")]
    NoPositivityAtOrigin { xi0: f64 },

    #[error("positivity horizon exceeded at node {node}")]
    PositivityHorizonExceeded { node: usize },

    #[error("series length {found} does not match grid ({expected} nodes)")]
    LengthMismatch { expected: usize, found: usize },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::MeasurementNearZero { .. }
            | Error::SignAtOrigin { .. }
            | Error::NoPositivityAtOrigin { .. }
            | Error::PositivityHorizonExceeded { .. } => ErrorClass::Hypothesis,
            Error::SingularSystem { .. }
            | Error::NonFinite { .. }
            | Error::DegenerateDenominator { .. } => ErrorClass::Numerical,
            Error::Kernel { source, .. } => source.class(),
            Error::DimensionMismatch { .. }
            | Error::InvalidGrid(_)
            | Error::InvalidProblem(_)
            | Error::Ellipticity { .. }
            | Error::LengthMismatch { .. } => ErrorClass::Input,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
