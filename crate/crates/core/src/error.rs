use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// `R V R'` could not be inverted. `restriction` is the row of `R` with
    /// the smallest pivot.
    #[error("restriction matrix is numerically singular at row {restriction}: {detail}")]
    Singular { restriction: usize, detail: String },

    #[error("series `{0}` not found in dataset")]
    MissingSeries(String),

    #[error("internal numerical error: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command line tool: 1 for input
    /// problems, 2 for numerical degeneracy.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular { .. } | Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}
