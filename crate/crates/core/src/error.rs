use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{0} is singular")]
    Singular(&'static str),
    #[error("{0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("capability limit: {0}")]
    Capability(String),
    #[error("matrix is not a P-matrix")]
    NotPMatrix,
    #[error("iteration limit reached after {iterations} sweeps (residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },
    #[error("quadrature refinement disagreement {0:e} exceeds tolerance")]
    Accuracy(f64),
    #[error("timestep too large: {0}")]
    TimestepTooLarge(String),
    #[error("grid alignment: {0}")]
    Alignment(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// Innermost error with step wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
