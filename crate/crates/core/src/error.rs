use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("graphs are defined on different node sets")]
    NodeMismatch,

    #[error("d-separation requires a DAG; acyclify the graph first")]
    RequiresDag,

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("label `{label}` is not in the domain of `{variable}`")]
    UnknownLabel { variable: String, label: String },

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid SCM: {}", .0.join("; "))]
    Invalid(Vec<String>),

    #[error("unsolvable: no solution for noise assignment {witness}")]
    Unsolvable { witness: String },

    #[error("not uniquely solvable: noise assignment {witness} has {count} solutions")]
    NotUniquelySolvable { witness: String, count: usize },

    #[error("conditioning event {0} has probability zero")]
    ZeroProbability(String),

    #[error("complexity cap exceeded: {0}")]
    CapExceeded(String),

    #[error("exact arithmetic overflow: {0}")]
    Overflow(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("unknown example `{0}`")]
    UnknownExample(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
