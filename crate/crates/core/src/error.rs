use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not Hermitian (max |A - A^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("positivity violated: eigenvalue {eigenvalue:.3e} below tolerance")]
    NotPositive { eigenvalue: f64 },

    #[error("effect spectrum outside [0, 1]: eigenvalue {eigenvalue:.3e}")]
    EffectBound { eigenvalue: f64 },

    #[error("trace is {trace:.12}, expected 1")]
    NotUnitTrace { trace: f64 },

    #[error("matrix is not unitary (max |U^dag U - I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("effects do not resolve the identity (max deviation {deviation:.3e})")]
    Incomplete { deviation: f64 },

    #[error("Kraus operators are not trace preserving (max |sum K^dag K - I| = {deviation:.3e})")]
    NotTracePreserving { deviation: f64 },

    #[error("Choi matrix has eigenvalue {eigenvalue:.3e}; map is not completely positive")]
    CpViolation { eigenvalue: f64 },

    #[error("invalid labels: {0}")]
    Labels(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outcome {label:?} has probability {probability:.3e}; cannot condition on it")]
    ZeroProbability { label: String, probability: f64 },

    #[error("pointer grid inadequate: {reason}; try n_points >= {suggested_n_points}")]
    Resolution {
        reason: String,
        suggested_n_points: usize,
    },

    #[error("operator family is not informationally complete (rank {rank}, need {needed})")]
    InformationallyIncomplete { rank: usize, needed: usize },

    #[error("compatibility boundary undecided: {0}")]
    BoundaryUndecided(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
