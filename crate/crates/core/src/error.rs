use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the library. The variant name doubles as the
/// machine-readable error code emitted by the command line front end.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution parameters: {0}")]
    InvalidDistribution(String),

    #[error("tilt by {gamma} lies outside the moment generating function domain")]
    TiltOutOfDomain { gamma: f64 },

    #[error("closed-form tilting is not available for the {family} family")]
    TiltUnsupported { family: &'static str },

    #[error("argument outside the domain: {0}")]
    DomainError(String),

    #[error("formula requires a stable queue, got rho = {rho}")]
    UnstableRegime { rho: f64 },

    #[error("no positive root: {0}")]
    NoRoot(String),

    #[error("sample is empty")]
    EmptySample,

    #[error("grids or parameter digests differ: {0}")]
    GridMismatch(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("fit window holds {found} usable points, need at least {needed}")]
    InsufficientWindow { found: usize, needed: usize },

    #[error("fit did not produce a positive decay rate (got {0})")]
    NonPositiveDecay(f64),

    #[error("only {found} qualifying cycles, need at least {needed}")]
    TooFewQualifiers { found: usize, needed: usize },

    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),
}

impl Error {
    /// Stable identifier for error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::TiltOutOfDomain { .. } => "TiltOutOfDomain",
            Error::TiltUnsupported { .. } => "TiltUnsupported",
            Error::DomainError(_) => "DomainError",
            Error::UnstableRegime { .. } => "UnstableRegime",
            Error::NoRoot(_) => "NoRoot",
            Error::EmptySample => "EmptySample",
            Error::GridMismatch(_) => "GridMismatch",
            Error::DegenerateSample(_) => "DegenerateSample",
            Error::InsufficientWindow { .. } => "InsufficientWindow",
            Error::NonPositiveDecay(_) => "NonPositiveDecay",
            Error::TooFewQualifiers { .. } => "TooFewQualifiers",
            Error::InvalidParams(_) => "InvalidParams",
        }
    }
}
