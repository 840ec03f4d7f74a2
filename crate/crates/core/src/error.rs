use std::path::PathBuf;

use crate::gridworld::State;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A grid or agent setting violates one of its invariants. `field` names
    /// the offending setting as it appears in the config file.
    #[error("invalid `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },

    #[error("state ({}, {}) cannot act: {reason}", .state.row, .state.col)]
    InvalidState { state: State, reason: &'static str },

    #[error("state ({}, {}) is not indexed by this table", .0.row, .0.col)]
    UnindexedState(State),

    #[error("q-tables are bound to different grids")]
    MismatchedTables,

    #[error("epsilon must lie in [0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed config: {0}")]
    ConfigParse(#[from] serde_json::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn field(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field,
            reason: reason.into(),
        }
    }
}
