use thiserror::Error;

/// Errors raised by the numerical layers.
///
/// Every variant is a domain outcome that a caller may legitimately want to
/// branch on (the CLI maps all of them to exit code 1 with a JSON body).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exponents must differ (p = q = {0})")]
    EqualExponents(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponents outside the fold strips (p = {p}, q = {q})")]
    OutsideFoldStrips { p: f64, q: f64 },

    #[error("linear system is singular (determinant {det:e})")]
    SingularSystem { det: f64 },

    #[error("first fibering derivative must vanish, got {0:e}")]
    NonzeroFirstDerivative(f64),

    #[error("no sign change of the shooting map over the scan ({scanned} shots)")]
    NoSolutionBracket { scanned: usize },

    #[error("shooting did not converge: {0}")]
    NonConvergence(String),

    #[error("tail not resolved before the truncation cap (radius {radius:e}, tail fraction {fraction:e})")]
    TailNotResolved { radius: f64, fraction: f64 },

    #[error("requested Nehari branch absent for lambda = {lambda} (fold threshold {threshold})")]
    BranchAbsent { lambda: f64, threshold: f64 },

    #[error("Nehari set empty: lambda = {lambda} is not above the threshold estimate {threshold}")]
    FoldEmpty { lambda: f64, threshold: f64 },

    #[error("optimizer stagnated after {iterations} iterations: {reason}")]
    Stagnation { iterations: usize, reason: String },

    #[error("linearized potential is singular: u vanishes at interior radius {radius}")]
    SingularPotential { radius: f64 },

    #[error("time step too large: energy identity violated after {halvings} halvings")]
    StepSizeTooLarge { halvings: usize },

    #[error("fit window too short ({points} points)")]
    WindowTooShort { points: usize },

    #[error("operation not available for domain {0}")]
    UnsupportedDomain(String),

    #[error("malformed profile: {0}")]
    MalformedProfile(String),
}

impl Error {
    /// Stable machine-readable identifier of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EqualExponents(_) => "EqualExponents",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::OutsideFoldStrips { .. } => "OutsideFoldStrips",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::NonzeroFirstDerivative(_) => "NonzeroFirstDerivative",
            Error::NoSolutionBracket { .. } => "NoSolutionBracket",
            Error::NonConvergence(_) => "NonConvergence",
            Error::TailNotResolved { .. } => "TailNotResolved",
            Error::BranchAbsent { .. } => "BranchAbsent",
            Error::FoldEmpty { .. } => "FoldEmpty",
            Error::Stagnation { .. } => "Stagnation",
            Error::SingularPotential { .. } => "SingularPotential",
            Error::StepSizeTooLarge { .. } => "StepSizeTooLarge",
            Error::WindowTooShort { .. } => "WindowTooShort",
            Error::UnsupportedDomain(_) => "UnsupportedDomain",
            Error::MalformedProfile(_) => "MalformedProfile",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
