use thiserror::Error;

/// Errors produced by the decoding engine and its supporting modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("corpus sentence {0} is empty")]
    EmptySentence(usize),

    #[error("min_count must be at least 1")]
    ZeroMinCount,

    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: u32, size: usize },

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("prefix contains the end-of-sequence token at position {0}")]
    PrefixContainsEos(usize),

    #[error("invalid step scores: {0}")]
    InvalidStepScores(String),

    #[error("invalid n-gram parameters: {0}")]
    InvalidNGram(String),

    #[error("invalid table scorer: {0}")]
    InvalidTable(String),

    #[error("condition key must be non-empty")]
    EmptyCondition,

    #[error("penalty contract violated: {0}")]
    PenaltyViolation(String),

    #[error("invalid decode configuration: {0}")]
    InvalidConfig(String),

    #[error("{scores} score vectors supplied for {live} unfinished hypotheses")]
    MisalignedScores { scores: usize, live: usize },

    #[error("expected {expected} conditions, got {actual}")]
    ConditionCount { expected: usize, actual: usize },

    #[error("search space of {0} sequences exceeds the oracle limit")]
    SearchSpaceTooLarge(u128),

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
