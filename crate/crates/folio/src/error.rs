use std::path::PathBuf;

/// Errors produced by the `folio` application layer.
#[derive(Debug, thiserror::Error)]
pub enum FolioError {
    #[error(transparent)]
    Core(#[from] folio_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}:{line}: column {column:?}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{}: missing values at {cells}", path.display())]
    MissingCells { path: PathBuf, cells: String },
    #[error("{}: {source}", path.display())]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = FolioError> = std::result::Result<T, E>;

impl FolioError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for configuration problems, 3 for data
    /// problems, 4 for numerical or training failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(e) => core_exit_code(e),
            Self::Config(_) | Self::Toml { .. } => 2,
            Self::Io { .. }
            | Self::Csv { .. }
            | Self::Parse { .. }
            | Self::MissingCells { .. }
            | Self::Json { .. } => 3,
        }
    }
}

fn core_exit_code(e: &folio_core::Error) -> i32 {
    use folio_core::Error as E;
    match e {
        E::Config(_) => 2,
        E::Alignment(_) | E::ConstraintViolation(_) | E::Shape(_) | E::Data(_) => 3,
        E::Step { source, .. } => core_exit_code(source),
        E::Domain(_)
        | E::TapeMismatch
        | E::Numerical(_)
        | E::Clustering(_)
        | E::TrainingDiverged { .. }
        | E::UndefinedMetric(_)
        | E::UndefinedTest(_)
        | E::SearchFailed(_) => 4,
    }
}
