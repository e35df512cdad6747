use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate edge {source_node} -> {target} (line {line})")]
    DuplicateEdge {
        source_node: usize,
        target: usize,
        line: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is singular (zero pivot in column {0})")]
    Singular(usize),

    #[error("series diverges: term {terms} still has magnitude {last_term:e}")]
    Divergent { terms: usize, last_term: f64 },

    #[error("coefficient sequence is not normalised: alpha_0 = {0}")]
    NotNormalised(f64),

    #[error("kernel has no closed-form modulation function: {0}")]
    NoClosedForm(String),

    #[error("feature matrices share seed {0}; diagonal estimates would be biased")]
    SeedCollision(u64),

    #[error("matrix of size {0} exceeds the dense materialisation limit")]
    TooLarge(usize),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
