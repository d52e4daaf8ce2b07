//! The step-scorer contract and its implementations.
//!
//! A scorer maps a conditioning key and the tokens emitted so far to a
//! natural-log distribution over the whole vocabulary. `<pad>` and `<bos>`
//! are never generable and always score negative infinity.

mod ngram;
mod table;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::TokenId;

pub use ngram::{train_ngram, NGramModel};
pub use table::{load_table_scorer, TableDocument, TableRow, TableScorer, ROW_SUM_TOLERANCE};

/// Maximum allowed deviation of a distribution's log-sum-exp from zero.
pub const LOGSUMEXP_TOLERANCE: f64 = 1e-9;

/// Opaque key identifying the conditioning input of one segment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Condition(String);

impl Condition {
    pub fn new(key: impl Into<String>) -> Result<Self> {
        let key = key.into();
        if key.is_empty() {
            return Err(Error::EmptyCondition);
        }
        Ok(Self(key))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Condition {
    type Error = Error;

    fn try_from(key: String) -> Result<Self> {
        Self::new(key)
    }
}

impl From<Condition> for String {
    fn from(c: Condition) -> String {
        c.0
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Log-probabilities for one decode step, indexed by [`TokenId`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepScores {
    logprobs: Vec<f64>,
}

impl StepScores {
    /// Validates and wraps a log-probability vector.
    pub fn new(logprobs: Vec<f64>, vocab_size: usize) -> Result<Self> {
        if logprobs.len() != vocab_size {
            return Err(Error::InvalidStepScores(format!(
                "length {} does not match vocabulary size {vocab_size}",
                logprobs.len()
            )));
        }
        if logprobs.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::InvalidStepScores("NaN or +inf entry".into()));
        }
        for special in [TokenId::PAD, TokenId::BOS] {
            if logprobs[special.index()] != f64::NEG_INFINITY {
                return Err(Error::InvalidStepScores(format!(
                    "token {special} must be ungenerable"
                )));
            }
        }
        let lse = log_sum_exp(&logprobs);
        if lse.is_nan() || lse.abs() > LOGSUMEXP_TOLERANCE {
            return Err(Error::InvalidStepScores(format!(
                "log-sum-exp is {lse:e}, not 0"
            )));
        }
        Ok(Self { logprobs })
    }

    /// Builds scores from probabilities. Zero probabilities become -inf.
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        Self::new(probs.iter().map(|p| p.ln()).collect(), probs.len())
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn get(&self, token: TokenId) -> f64 {
        self.logprobs[token.index()]
    }

    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }

    pub fn log_sum_exp(&self) -> f64 {
        log_sum_exp(&self.logprobs)
    }

    /// Tokens with finite score, in id order.
    pub fn generable(&self) -> impl Iterator<Item = (TokenId, f64)> + '_ {
        self.logprobs
            .iter()
            .enumerate()
            .filter(|(_, lp)| lp.is_finite())
            .map(|(i, &lp)| (TokenId(i as u32), lp))
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Next-token distribution given a condition and the emitted prefix.
///
/// Implementations must be deterministic and must reject a prefix that
/// already contains `<eos>`.
pub trait StepScorer: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn score_step(&self, condition: &Condition, prefix: &[TokenId]) -> Result<StepScores>;
}

impl<S: StepScorer + ?Sized> StepScorer for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn score_step(&self, condition: &Condition, prefix: &[TokenId]) -> Result<StepScores> {
        (**self).score_step(condition, prefix)
    }
}

pub(crate) fn check_prefix(prefix: &[TokenId]) -> Result<()> {
    match prefix.iter().position(|&t| t == TokenId::EOS) {
        Some(i) => Err(Error::PrefixContainsEos(i)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_scores_validation() {
        let ninf = f64::NEG_INFINITY;
        let half = 0.5f64.ln();
        assert!(StepScores::new(vec![ninf, ninf, half, half], 4).is_ok());
        assert!(StepScores::new(vec![ninf, ninf, half, half], 5).is_err());
        assert!(StepScores::new(vec![half, ninf, half, ninf], 4).is_err());
        assert!(StepScores::new(vec![ninf, ninf, half, 0.0], 4).is_err());
        assert!(StepScores::new(vec![ninf, ninf, f64::NAN, 0.0], 4).is_err());
    }

    #[test]
    fn generable_skips_impossible_tokens() {
        let s = StepScores::from_probs(&[0.0, 0.0, 0.25, 0.0, 0.75]).unwrap();
        let ids: Vec<_> = s.generable().map(|(t, _)| t.0).collect();
        assert_eq!(ids, [2, 4]);
    }

    #[test]
    fn condition_must_be_non_empty() {
        assert!(Condition::new("").is_err());
        assert_eq!(Condition::new("img1").unwrap().as_str(), "img1");
    }
}
