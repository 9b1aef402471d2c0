use std::path::PathBuf;

use thiserror::Error;

use crate::flows::{FlowType, InvestorGroup};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no records")]
    NoRecords,

    #[error("invalid record #{index} ({date} {group}/{side}): {reason}")]
    InvalidRecord {
        index: usize,
        date: String,
        group: String,
        side: String,
        reason: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("series ({group}, {flow}) not present in panel")]
    MissingSeries {
        group: InvestorGroup,
        flow: FlowType,
    },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("series too short for DFA (length {length})")]
    SeriesTooShort { length: usize },

    #[error("singular polynomial fit at scale {scale} (order {order})")]
    SingularFit { scale: usize, order: usize },

    #[error("insufficient scales: {found} admissible points, need at least 4")]
    InsufficientScales { found: usize },

    #[error("series length {length} is shorter than rolling window {window}")]
    WindowTooLong { length: usize, window: usize },

    #[error("insufficient tail: {0}")]
    InsufficientTail(String),

    #[error("degenerate regressor")]
    DegenerateRegressor,

    #[error("no overlapping dates between rolling Hurst and volatility series")]
    EmptyAlignment,

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("malformed artifact {}: {message}", path.display())]
    Schema { path: PathBuf, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
