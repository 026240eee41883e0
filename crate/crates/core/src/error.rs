use thiserror::Error;

/// Everything that can go wrong while building universes, embeddings and curves.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },

    #[error("matrix asymmetry {relative:.3e} exceeds relative tolerance {tolerance:.1e}")]
    Asymmetric { relative: f64, tolerance: f64 },

    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.6e}, largest {max_eigenvalue:.6e})")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("weights sum to {sum:.15}, budget requires 1")]
    BudgetViolation { sum: f64 },

    #[error("embedding was built from a different universe")]
    EmbeddingMismatch,

    #[error("distance matrix is singular: 1'D^-1 = {value:.3e}")]
    SingularD { value: f64 },

    #[error("maximum diversification return {q_max:.6e} is not positive; input is inconsistent")]
    NonPositiveQmax { q_max: f64 },

    #[error("distance matrix has nonzero diagonal entry {value:.3e} at {index}")]
    NonZeroDiagonal { index: usize, value: f64 },

    #[error("distance matrix has negative entry {value:.3e} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("covariance matrix is singular; operation requires a positive definite covariance")]
    SingularCovariance,

    #[error("expected returns are required for this operation")]
    MissingReturns,

    #[error("expected returns are proportional to the ones vector; all portfolios have the same return")]
    DegenerateReturns,

    #[error("risk-free rate is required for this operation")]
    MissingRiskFree,

    #[error("tangency portfolio does not exist: the minimum variance portfolio return must exceed the risk-free rate (b - r0*a = {margin:.6e})")]
    TangencyInfeasible { margin: f64 },

    #[error("risk level sigma = {sigma:.6e} is below the minimum variance level {sigma_mvp:.6e}")]
    RiskBelowMvp { sigma: f64, sigma_mvp: f64 },

    #[error("variance vector is proportional to the ones vector (rho = 0); mixing weight is undefined")]
    DegenerateRho,

    #[error("matrix is not symmetric positive definite")]
    NotSpd,

    #[error("negative variance {value:.6e} for asset {index}")]
    NegativeVariance { index: usize, value: f64 },

    #[error("asset {index} has zero variance")]
    ZeroVariance { index: usize },

    #[error("diversification ratio optimum is not attainable with positive ratio (1'V^-1 sqrt(eta) = {value:.3e})")]
    NonPositiveRatio { value: f64 },

    #[error("closed-form MDP fails the sweep audit: ratio {closed_form:.12e} vs sweep maximum {sweep:.12e}")]
    MdpAuditFailed { closed_form: f64, sweep: f64 },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("panel has {found} usable rows, need at least {required}")]
    TooFewRows { found: usize, required: usize },

    #[error("dates are not strictly increasing at row {row}")]
    NonMonotoneDates { row: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonSquare { .. } => "NonSquare",
            Error::Asymmetric { .. } => "Asymmetric",
            Error::NotPsd { .. } => "NotPSD",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::BudgetViolation { .. } => "BudgetViolation",
            Error::EmbeddingMismatch => "EmbeddingMismatch",
            Error::SingularD { .. } => "SingularD",
            Error::NonPositiveQmax { .. } => "NonPositiveQmax",
            Error::NonZeroDiagonal { .. } => "NonZeroDiagonal",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::SingularCovariance => "SingularCovariance",
            Error::MissingReturns => "MissingReturns",
            Error::DegenerateReturns => "DegenerateReturns",
            Error::MissingRiskFree => "MissingRiskFree",
            Error::TangencyInfeasible { .. } => "TangencyInfeasible",
            Error::RiskBelowMvp { .. } => "RiskBelowMVP",
            Error::DegenerateRho => "DegenerateRho",
            Error::NotSpd => "NotSPD",
            Error::NegativeVariance { .. } => "NegativeVariance",
            Error::ZeroVariance { .. } => "ZeroVariance",
            Error::NonPositiveRatio { .. } => "NonPositiveRatio",
            Error::MdpAuditFailed { .. } => "MdpAuditFailed",
            Error::Parse { .. } => "ParseError",
            Error::TooFewRows { .. } => "TooFewRows",
            Error::NonMonotoneDates { .. } => "NonMonotoneDates",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
