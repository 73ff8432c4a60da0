use thiserror::Error;

/// Errors produced by graph manipulation, model fitting and the data pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} is out of range for a graph on {d} vertices")]
    VertexOutOfRange { vertex: usize, d: usize },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("graph contains a directed cycle")]
    Cyclic,

    #[error("graph is not a bow-free acyclic path diagram")]
    NotBap,

    #[error("parameter entry ({row}, {col}) is nonzero but the graph has no matching edge")]
    SparsityViolation { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("singular matrix encountered in {0}")]
    Singular(&'static str),

    #[error("need at least {required} samples for {d} variables, got {n}")]
    InsufficientSamples { n: usize, d: usize, required: usize },

    #[error("{what} exceeds the supported limit of {limit}")]
    TooLarge { what: &'static str, limit: usize },

    #[error("parameters are not standardized: implied variance of vertex {vertex} is {variance}")]
    NotStandardized { vertex: usize, variance: f64 },

    #[error("graphs are not compatible: {0}")]
    Incompatible(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
