use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("invalid quantifier: {0}")]
    InvalidQuantifier(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("unknown quantifier `{0}`")]
    UnknownQuantifier(String),

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("arity mismatch for `{name}`: expected {expected}, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("tuple length {got} does not match variable tuple of length {expected}")]
    TupleLengthMismatch { expected: usize, got: usize },

    #[error("element {element} out of range for domain of size {domain}")]
    ElementOutOfRange { element: usize, domain: usize },

    #[error("tuple does not respect the repetitions of the variable tuple")]
    RepetitionViolation,

    #[error("variable tuple must be non-empty")]
    EmptyVarTuple,

    #[error("assignments do not share a domain of variables")]
    AssignmentDomainMismatch,

    #[error("contexts use different vocabularies")]
    VocabularyMismatch,

    #[error("quantifier `{name}` has width {width}, got {got} argument(s)")]
    WidthMismatch {
        name: String,
        width: usize,
        got: usize,
    },

    #[error("cap `{cap}` exceeded: {actual} > {limit}")]
    CapExceeded {
        cap: String,
        limit: usize,
        actual: usize,
    },

    #[error("division by zero while evaluating a cardinality predicate")]
    DivisionByZero,

    #[error("illegal move: {0}")]
    IllegalMove(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Convenience constructor for cap refusals; names the cap so callers can
    /// report which knob to raise.
    pub fn cap(cap: &str, limit: usize, actual: usize) -> Self {
        Error::CapExceeded {
            cap: cap.to_string(),
            limit,
            actual,
        }
    }
}
