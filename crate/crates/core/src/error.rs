use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("RIS phase vector is not unit modulus (max deviation {0:e})")]
    NotUnitModulus(f64),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("path sampling failed: no admissible angle set after {attempts} attempts")]
    SamplingFailed { attempts: usize },

    #[error("input contains NaN or infinite values")]
    NonFinite,

    #[error("matrix carries no signal energy")]
    EmptySignal,

    #[error("spatial frequency {freq} is outside the visible region for spacing ratio {spacing_ratio}")]
    OutOfRange { freq: f64, spacing_ratio: f64 },

    #[error("rank deficient system: {0}")]
    RankDeficient(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training overhead {training} exceeds coherence time {coherence}")]
    OverheadExceedsCoherence { training: usize, coherence: usize },

    #[error("invalid experiment spec at `{field}`: {reason}")]
    Spec { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
