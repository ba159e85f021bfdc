use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("duplicate edge ({source_node}, {target_node})")]
    DuplicateEdge {
        source_node: String,
        target_node: String,
    },

    #[error("self-loop on node {0}")]
    SelfLoop(String),

    #[error("opinion {opinion} of node {node} is outside [0, 1]")]
    OpinionOutOfRange { node: String, opinion: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("agent {agent} has no targets")]
    EmptyTargets { agent: usize },

    #[error("policy returned opinion {opinion} for agent {agent} outside [{lo}, {hi}]")]
    PolicyOutOfBounds {
        agent: usize,
        opinion: f64,
        lo: f64,
        hi: f64,
    },

    #[error("search space too large: {0}")]
    SearchSpace(String),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("missing credential: environment variable {0} is not set")]
    MissingCredential(String),

    #[error("http request failed with status {status}: {body}")]
    Http { status: u16, body: String },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("completion response contained no text")]
    EmptyCompletion,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. } | Error::Http { .. } | Error::Transport(_) | Error::EmptyCompletion
        )
    }
}
