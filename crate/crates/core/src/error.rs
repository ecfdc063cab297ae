use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weight {weight} on edge {src} -> {dst}: must be finite, nonzero and in [-1, 1]")]
    WeightOutOfRange { src: String, dst: String, weight: f64 },

    #[error("duplicate edge {src} -> {dst}; dedupe records before building the graph")]
    DuplicateEdge { src: String, dst: String },

    #[error("empty node label in record {index}")]
    EmptyLabel { index: usize },

    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("all {lines} data lines malformed; first: line {first_line}: {reason}")]
    AllLinesMalformed { lines: usize, first_line: usize, reason: String },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { what: &'static str, iterations: usize, residual: f64 },

    #[error("system row {row} is not strictly diagonally dominant")]
    NotDiagonallyDominant { row: usize },

    #[error("internal opinion s[{index}] = {value} outside [-1, 1]")]
    InfeasibleOpinion { index: usize, value: f64 },

    #[error("numerical breakdown: {0}")]
    Numerical(String),

    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::WeightOutOfRange { .. } => "weight_out_of_range",
            Error::DuplicateEdge { .. } => "duplicate_edge",
            Error::EmptyLabel { .. } => "empty_label",
            Error::NodeOutOfRange { .. } => "node_out_of_range",
            Error::Dimension { .. } => "dimension",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Parse(_) => "parse",
            Error::AllLinesMalformed { .. } => "all_lines_malformed",
            Error::NotConverged { .. } => "not_converged",
            Error::NotDiagonallyDominant { .. } => "not_diagonally_dominant",
            Error::InfeasibleOpinion { .. } => "infeasible_opinion",
            Error::Numerical(_) => "numerical",
            Error::CrossCheck(_) => "cross_check",
            Error::Config(_) => "config",
            Error::Context { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
