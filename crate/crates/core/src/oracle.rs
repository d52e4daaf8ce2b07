//! Brute-force references for certifying the decoder.
//!
//! Nothing here shares code with the search path in [`crate::decoding`]:
//! candidates are fully materialized and sorted, and whole sequences are
//! enumerated. Intended for tests and small inputs only.

use std::cmp::Ordering;

use crate::decoding::{Beam, Hypothesis, Step};
use crate::diversity::PenaltyVector;
use crate::error::{Error, Result};
use crate::scoring::{Condition, StepScorer, StepScores};
use crate::vocab::{TokenId, Vocabulary};

/// Largest number of sequences [`exhaustive_best`] will enumerate.
pub const SEARCH_SPACE_LIMIT: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// The winning sequence, including a trailing `<eos>` if it has one.
    pub best_tokens: Vec<TokenId>,
    /// Penalized objective of the winner.
    pub best_score: f64,
    /// Unpenalized log-probability of the winner.
    pub best_raw_score: f64,
    /// Number of complete sequences scored.
    pub enumerated: usize,
}

fn tie_key(token: TokenId) -> (u8, u32) {
    if token == TokenId::EOS {
        (1, token.0)
    } else {
        (0, token.0)
    }
}

struct Search<'a, S: ?Sized> {
    scorer: &'a S,
    condition: &'a Condition,
    max_len: usize,
    lambda: f64,
    penalty: &'a PenaltyVector,
    best: Option<(f64, f64, Vec<TokenId>)>,
    enumerated: usize,
}

impl<S: StepScorer + ?Sized> Search<'_, S> {
    fn visit(
        &mut self,
        content: &mut Vec<TokenId>,
        emitted: &mut Vec<TokenId>,
        raw: f64,
        aug: f64,
    ) -> Result<()> {
        let scores = self.scorer.score_step(self.condition, content)?;
        for (i, &lp) in scores.logprobs().iter().enumerate() {
            if !lp.is_finite() {
                continue;
            }
            let token = TokenId(i as u32);
            let contribution = self.lambda * self.penalty.values()[i] + 0.0;
            let (raw, aug) = (raw + lp, aug + (lp + contribution));
            emitted.push(token);
            if token == TokenId::EOS || emitted.len() == self.max_len {
                self.record(raw, aug, emitted);
            } else {
                content.push(token);
                self.visit(content, emitted, raw, aug)?;
                content.pop();
            }
            emitted.pop();
        }
        Ok(())
    }

    fn record(&mut self, raw: f64, aug: f64, seq: &[TokenId]) {
        self.enumerated += 1;
        let better = match &self.best {
            None => true,
            Some((best_aug, _, best_seq)) => match aug.partial_cmp(best_aug) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => {
                    let a: Vec<_> = seq.iter().map(|&t| tie_key(t)).collect();
                    let b: Vec<_> = best_seq.iter().map(|&t| tie_key(t)).collect();
                    a < b
                }
                _ => false,
            },
        };
        if better {
            self.best = Some((aug, raw, seq.to_vec()));
        }
    }
}

/// Highest-scoring sequence of at most `max_len` steps under the penalized
/// objective `sum(logprob) + lambda * sum(penalty)`.
///
/// Sequences end at `<eos>` or after exactly `max_len` tokens.
pub fn exhaustive_best<S: StepScorer + ?Sized>(
    scorer: &S,
    condition: &Condition,
    vocab: &Vocabulary,
    max_len: usize,
    lambda: f64,
    penalty: &PenaltyVector,
) -> Result<OracleResult> {
    if max_len < 1 {
        return Err(Error::InvalidConfig("max length must be at least 1".into()));
    }
    if penalty.len() != vocab.len() || scorer.vocab_size() != vocab.len() {
        return Err(Error::InvalidConfig("vocabulary size mismatch".into()));
    }
    let generable = vocab.len().saturating_sub(2) as u128;
    let space = generable.checked_pow(max_len as u32).unwrap_or(u128::MAX);
    if space > SEARCH_SPACE_LIMIT {
        return Err(Error::SearchSpaceTooLarge(space));
    }

    let mut search = Search {
        scorer,
        condition,
        max_len,
        lambda,
        penalty,
        best: None,
        enumerated: 0,
    };
    search.visit(&mut Vec::new(), &mut Vec::new(), 0.0, 0.0)?;
    let (best_score, best_raw_score, best_tokens) = search
        .best
        .expect("a valid distribution has at least one finite entry");
    Ok(OracleResult {
        best_tokens,
        best_score,
        best_raw_score,
        enumerated: search.enumerated,
    })
}

/// Reference for [`crate::decoding::expand_and_select`]: builds every
/// candidate hypothesis, stable-sorts the lot and keeps the first `width`.
pub fn exhaustive_step_select(
    beam: &Beam,
    scores: &[StepScores],
    penalty: &PenaltyVector,
    lambda: f64,
    width: usize,
) -> Result<Beam> {
    if width == 0 || !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig("bad width or lambda".into()));
    }
    let live = beam.hypotheses().iter().filter(|h| !h.finished).count();
    if live != scores.len() {
        return Err(Error::MisalignedScores {
            scores: scores.len(),
            live,
        });
    }
    if scores.iter().any(|s| s.len() != penalty.len()) {
        return Err(Error::InvalidStepScores("length mismatch".into()));
    }

    // (aug, tie key, parent index, hypothesis)
    let mut all: Vec<(f64, (u8, u32), usize, Hypothesis)> = Vec::new();
    let mut next_scores = 0;
    for (parent, hyp) in beam.hypotheses().iter().enumerate() {
        if hyp.finished {
            let last = hyp.steps.last().map_or(TokenId::EOS, |s| s.token);
            all.push((hyp.aug_score, tie_key(last), parent, hyp.clone()));
            continue;
        }
        let row = &scores[next_scores];
        next_scores += 1;
        for (i, &lp) in row.logprobs().iter().enumerate() {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let token = TokenId(i as u32);
            let contribution = lambda * penalty.values()[i] + 0.0;
            let mut child = hyp.clone();
            child.raw_score = hyp.raw_score + lp;
            child.aug_score = hyp.aug_score + (lp + contribution);
            child.steps.push(Step {
                token,
                logprob: lp,
                penalty: contribution,
            });
            if token == TokenId::EOS {
                child.finished = true;
            } else {
                child.tokens.push(token);
            }
            all.push((child.aug_score, tie_key(token), parent, child));
        }
    }

    all.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite scores")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    all.truncate(width);
    Ok(Beam::new(all.into_iter().map(|c| c.3).collect()))
}
