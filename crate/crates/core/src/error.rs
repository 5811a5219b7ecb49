use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("self-loop on node `{0}`")]
    SelfLoop(String),

    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),

    #[error("graph must have exactly one outcome node, found {0}")]
    OutcomeCount(usize),

    #[error("invalid node `{node}`: {reason}")]
    InvalidNode { node: String, reason: String },

    #[error("invalid path {path}: {reason}")]
    InvalidPath { path: String, reason: String },

    #[error("graph contains a directed cycle: {0}")]
    Cycle(String),

    #[error("identifiability violation: {0}")]
    Identifiability(String),

    #[error("parameter mismatch for node `{node}`: {reason}")]
    Params { node: String, reason: String },

    #[error("missing root distribution for parentless node `{0}`")]
    MissingRoot(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("missing noise record for node `{0}`")]
    MissingNoise(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("design for node `{node}` has {rows} rows but {cols} columns")]
    TooFewRows { node: String, rows: usize, cols: usize },

    #[error("logistic fit for node `{node}` did not converge after {iterations} iterations")]
    IrlsNonConvergence { node: String, iterations: usize },

    #[error("singular system while fitting node `{0}`")]
    Singular(String),

    #[error("invalid query: {0}")]
    Query(String),

    #[error("invalid counterfactual config: {0}")]
    Counterfactual(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("adult data: {0}")]
    Adult(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn from_json_syntax(err: serde_json::Error) -> Self {
        Error::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
