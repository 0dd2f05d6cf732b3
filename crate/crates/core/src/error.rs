use thiserror::Error;

pub type Result<T, E = NatError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NatError {
    #[error("invalid genome at position {position}: {reason}")]
    InvalidGenome { position: usize, reason: String },

    #[error("invalid configuration `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("objective dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("not enough candidates: need {needed}, have {available}")]
    NotEnoughCandidates { needed: usize, available: usize },

    #[error("hypervolume supports 2 to 4 objectives, got {0}")]
    UnsupportedObjectives(usize),

    #[error("singular RBF system: {0}")]
    SingularSystem(String),

    #[error("input out of domain: {0}")]
    OutOfDomain(String),

    #[error("evaluator failed: {0}")]
    Evaluator(String),

    #[error("evaluator failed during iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<NatError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl NatError {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        NatError::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that originate in an evaluator rather than in user input.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            NatError::Evaluator(_) | NatError::Iteration { .. } | NatError::Io(_)
        )
    }
}
