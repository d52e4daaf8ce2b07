//! Inter-sentence diverse beam search.
//!
//! Generates a story one segment at a time. The first segment comes from
//! plain beam search; every later segment is searched with a penalty on
//! tokens already used by the segments before it, so that near-identical
//! conditioning inputs do not yield the same sentence over and over.
//!
//! The search is independent of the model behind it: anything implementing
//! [`scoring::StepScorer`] can drive it. Two scorers ship with the crate, a
//! Laplace-smoothed n-gram model and a table-driven scorer.

pub mod cli;
pub mod decoding;
pub mod diversity;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod scoring;
pub mod vocab;

pub use decoding::{
    beam_search, decode_batch, expand_and_select, inter_sentence_dbs, Beam, DecodeConfig,
    Hypothesis, SegmentResult, StoryResult,
};
pub use diversity::{bag_of_words, hamming_penalty, BagOfWords, DiversityPenalty, PenaltyVector};
pub use error::{Error, Result};
pub use metrics::{diversity_report, DiversityReport};
pub use scoring::{Condition, NGramModel, StepScorer, StepScores, TableScorer};
pub use vocab::{build_vocabulary, Corpus, TokenId, Vocabulary};
