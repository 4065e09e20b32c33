use alloc::string::String;

/// Errors produced by `folio-core`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("operand belongs to a different tape")]
    TapeMismatch,
    #[error("data error: {0}")]
    Data(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("clustering error: {0}")]
    Clustering(String),
    #[error("training diverged at epoch {epoch}: {reason}")]
    TrainingDiverged { epoch: usize, reason: String },
    #[error("walk-forward step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),
    #[error("undefined test: {0}")]
    UndefinedTest(&'static str),
    #[error("search failed: all {0} trials failed")]
    SearchFailed(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
