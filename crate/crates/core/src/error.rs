use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration rejected before any work starts.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{0} requires a non-empty input")]
    Empty(&'static str),

    #[error("exhaustive search refused: {nodes} nodes exceeds the cap of {cap}")]
    OracleCap { nodes: usize, cap: usize },

    #[error("topology is not organized in disjoint node pairs")]
    Unpaired,

    #[error("scheme requires full-duplex nodes but node {0} is half-duplex")]
    HalfDuplexNode(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by user-supplied configuration rather than by
    /// a failure while running.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Json(_))
    }
}
