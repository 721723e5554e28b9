use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A spec or config violates one of its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition (shapes, empty inputs, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate batch: batch-norm layer {layer} received {rows} row(s) in train mode")]
    DegenerateBatch { layer: usize, rows: usize },

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("density ratio undefined: synthetic density is zero at this point")]
    UndefinedRatio,

    #[error(
        "acceptance rate {rate:.2e} fell below floor {floor:.0e} after {n_seen} candidates \
         ({n_accepted} accepted, M = {m:.4})"
    )]
    AcceptanceFloor {
        rate: f64,
        floor: f64,
        n_seen: u64,
        n_accepted: u64,
        m: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Whether this error stems from bad configuration rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json { .. })
    }
}
