use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension {dim} exceeds the dense budget of {budget}")]
    BudgetExceeded { dim: usize, budget: usize },

    #[error("operator does not match the basis: {0}")]
    BasisMismatch(String),

    #[error("site {site} is outside 1..={len}")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("spin quantum number {0} is not a non-negative half-integer")]
    InvalidSpin(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("eigendecomposition failed to converge")]
    EigenFailure,

    #[error("temperature must be non-negative, got {0}")]
    NegativeTemperature(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (norm {0})")]
    Unnormalized(f64),

    #[error("Krylov propagation did not converge within {0} sub-steps")]
    KrylovNonConvergence(usize),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("F(0) = {0:e} is too small to normalize by")]
    VanishingNormalization(f64),

    #[error("operator {0} is not unitary")]
    NonUnitary(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no interior local minimum on the grid")]
    NoMinimum,

    #[error("no scrambling on grid: Re F never drops below 1 - {0}")]
    NoScrambling(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rescaled supports do not overlap")]
    NoOverlap,

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no crossing of the curves inside the grid")]
    NoCrossing,

    #[error("butterfly-velocity scaling forms need z >= 1, got z = {0}")]
    DynamicalExponentBelowOne(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
