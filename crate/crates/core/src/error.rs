use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not unimodular: det = {det} (tolerance {tolerance})")]
    NonUnimodular { det: f64, tolerance: f64 },

    #[error("dilation must be positive and finite, got r = {0}")]
    InvalidDilation(f64),

    #[error("the zero vector has no projective class")]
    ZeroVector,

    #[error("integration failed at x = {x}: {reason}")]
    IntegrationFailure { x: f64, reason: String },

    #[error("x = {x} lies outside the domain [{lo}, {hi}]")]
    DomainError { x: f64, lo: f64, hi: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("E = {energy} is not an eigenvalue: mismatch {mismatch:e} exceeds tolerance {tolerance:e}")]
    NotAnEigenvalue {
        energy: f64,
        mismatch: f64,
        tolerance: f64,
    },

    #[error("site {site}: could not draw a positive dilation ({reason})")]
    UnsupportedSupport { site: usize, reason: String },

    #[error("insufficient oscillation: found {found} usable zeros, need {needed}")]
    InsufficientOscillation { found: usize, needed: usize },

    #[error("E = {energy} is not an eigenvalue of the unperturbed problem (mismatch {mismatch:e})")]
    NotUnperturbedEigenvalue { energy: f64, mismatch: f64 },

    #[error("target class is not bracketed by the Pruefer lift on [{t1}, {t2}]")]
    TargetNotBracketed { t1: f64, t2: f64 },
}

impl Error {
    /// True for errors caused by invalid input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NonUnimodular { .. }
                | Error::InvalidDilation(_)
                | Error::ZeroVector
                | Error::DomainError { .. }
                | Error::InvalidPotential(_)
                | Error::InvalidProblem(_)
                | Error::InvalidEnsemble(_)
                | Error::InvalidArgument(_)
        )
    }
}
