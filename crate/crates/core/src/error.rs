use thiserror::Error;

/// Errors raised by the simulation, filtering and bound routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integration became unstable at step {step}: {detail} (reduce dt)")]
    IntegrationInstability { step: usize, detail: String },

    #[error("filter covariance lost positive semidefiniteness at step {step} (min eigenvalue {min_eigenvalue:e})")]
    FilterDivergence { step: usize, min_eigenvalue: f64 },

    #[error("squeezing parameter undefined for zero mean polarization")]
    UndefinedSqueezing,

    #[error("T2 is infinite: both dephasing rates are zero")]
    InfiniteCoherenceTime,

    #[error("degenerate bound: {0}")]
    DegenerateBound(&'static str),

    #[error("time grids of the supplied records do not match")]
    GridMismatch,

    #[error("{failed} of {total} trajectories failed (first: {first})")]
    EnsembleFailed {
        failed: usize,
        total: usize,
        first: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl Error {
    /// Relabels a per-step error with the index of the step that raised it.
    pub fn at_step(self, k: usize) -> Error {
        match self {
            Error::IntegrationInstability { detail, .. } => {
                Error::IntegrationInstability { step: k, detail }
            }
            Error::FilterDivergence { min_eigenvalue, .. } => Error::FilterDivergence {
                step: k,
                min_eigenvalue,
            },
            other => other,
        }
    }
}
