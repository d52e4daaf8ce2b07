//! Beam search and inter-sentence diverse beam search.
//!
//! The first segment is decoded with plain beam search. Every later segment
//! is decoded with a penalty vector computed from the best hypotheses of all
//! earlier segments, frozen for the whole segment. Each emitted token adds
//! `lambda * penalty[token]` to the hypothesis score used for ranking; the
//! unpenalized log-probability is tracked alongside it.

mod output;
mod select;

use std::cmp::Ordering;
use std::thread;

use crate::diversity::{checked_penalty, DiversityPenalty, PenaltyVector};
use crate::error::{Error, Result};
use crate::scoring::{Condition, StepScorer};
use crate::vocab::{TokenId, Vocabulary};

pub use output::{round_sig, SegmentDocument, StepDocument, StoryDocument};
pub use select::expand_and_select;

pub const DEFAULT_BEAM_WIDTH: usize = 3;
pub const DEFAULT_LAMBDA: f64 = 2.0;
pub const DEFAULT_MAX_LEN: usize = 20;
pub const DEFAULT_NUM_SEGMENTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Diversity strength. Zero disables the penalty.
    pub lambda: f64,
    /// Maximum number of decode steps per segment, counting the `<eos>` step.
    pub max_len: usize,
    pub num_segments: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_width: DEFAULT_BEAM_WIDTH,
            lambda: DEFAULT_LAMBDA,
            max_len: DEFAULT_MAX_LEN,
            num_segments: DEFAULT_NUM_SEGMENTS,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width < 1 {
            return Err(Error::InvalidConfig("beam width must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.max_len < 1 {
            return Err(Error::InvalidConfig("max length must be at least 1".into()));
        }
        if self.num_segments < 1 {
            return Err(Error::InvalidConfig("need at least one segment".into()));
        }
        Ok(())
    }
}

/// One emitted token with its log-probability and its weighted penalty
/// `lambda * penalty[token]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub token: TokenId,
    pub logprob: f64,
    pub penalty: f64,
}

/// A partial or complete segment.
///
/// `tokens` excludes `<eos>`; `steps` records every emitted token including
/// a final `<eos>`. A hypothesis that hit the length limit is finished
/// without an `<eos>` step.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    pub steps: Vec<Step>,
    pub raw_score: f64,
    pub aug_score: f64,
    pub finished: bool,
}

impl Hypothesis {
    pub fn root() -> Self {
        Self {
            tokens: Vec::new(),
            steps: Vec::new(),
            raw_score: 0.0,
            aug_score: 0.0,
            finished: false,
        }
    }

    fn push(&mut self, step: Step) {
        debug_assert!(!self.finished);
        self.raw_score += step.logprob;
        self.aug_score += step.logprob + step.penalty;
        if step.token == TokenId::EOS {
            self.finished = true;
        } else {
            self.tokens.push(step.token);
        }
        self.steps.push(step);
    }

    /// Recomputes `(raw_score, aug_score)` from the recorded steps.
    pub fn replay(&self) -> (f64, f64) {
        self.steps.iter().fold((0.0, 0.0), |(raw, aug), s| {
            (raw + s.logprob, aug + s.logprob + s.penalty)
        })
    }
}

/// `<eos>` ranks after every other token when breaking score ties.
pub(crate) fn token_rank(token: TokenId) -> (bool, u32) {
    (token == TokenId::EOS, token.0)
}

fn sequence_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.aug_score.total_cmp(&a.aug_score).then_with(|| {
        let ra = a.steps.iter().map(|s| token_rank(s.token));
        let rb = b.steps.iter().map(|s| token_rank(s.token));
        ra.cmp(rb)
    })
}

/// Hypotheses ordered best first by augmented score.
#[derive(Clone, Debug, PartialEq)]
pub struct Beam {
    hypotheses: Vec<Hypothesis>,
}

impl Beam {
    pub fn initial() -> Self {
        Self {
            hypotheses: vec![Hypothesis::root()],
        }
    }

    /// Builds a beam from arbitrary hypotheses, sorting them by augmented
    /// score (stable for equal scores).
    pub fn new(mut hypotheses: Vec<Hypothesis>) -> Self {
        hypotheses.sort_by(|a, b| b.aug_score.total_cmp(&a.aug_score));
        Self { hypotheses }
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn into_hypotheses(self) -> Vec<Hypothesis> {
        self.hypotheses
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn live(&self) -> impl Iterator<Item = &Hypothesis> {
        self.hypotheses.iter().filter(|h| !h.finished)
    }

    pub fn live_count(&self) -> usize {
        self.live().count()
    }
}

/// What happened at one decode step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    /// Size of the candidate set the step selected from.
    pub candidates: usize,
    /// One entry per kept hypothesis, best first; `None` marks a finished
    /// hypothesis carried over unchanged.
    pub selected: Vec<Option<Step>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentResult {
    pub condition: Condition,
    pub best: Hypothesis,
    /// Up to `beam_width` finished hypotheses, best first.
    pub all_finished: Vec<Hypothesis>,
    /// Penalty vector frozen for this segment.
    pub penalty: PenaltyVector,
    pub trace: Vec<StepTrace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoryResult {
    pub segments: Vec<SegmentResult>,
    pub story_tokens: Vec<TokenId>,
}

impl StoryResult {
    pub fn segment_tokens(&self) -> Vec<Vec<TokenId>> {
        self.segments
            .iter()
            .map(|s| s.best.tokens.clone())
            .collect()
    }
}

struct FinishedPool {
    capacity: usize,
    entries: Vec<Hypothesis>,
}

impl FinishedPool {
    fn offer(&mut self, h: Hypothesis) {
        self.entries.push(h);
        self.entries.sort_by(sequence_order);
        self.entries.truncate(self.capacity);
    }

    fn worst(&self) -> Option<f64> {
        if self.entries.len() < self.capacity {
            return None;
        }
        self.entries.last().map(|h| h.aug_score)
    }
}

/// Decodes one segment with a fixed penalty vector.
///
/// Stops after `max_len` steps, when no unfinished hypothesis remains, or
/// once `beam_width` hypotheses have finished and every unfinished one
/// already scores below the worst of them. Unfinished hypotheses still
/// alive after the last step are finished at their current score.
pub fn beam_search<S: StepScorer + ?Sized>(
    scorer: &S,
    condition: &Condition,
    vocab: &Vocabulary,
    config: &DecodeConfig,
    penalty: &PenaltyVector,
) -> Result<SegmentResult> {
    config.validate()?;
    let size = vocab.len();
    if scorer.vocab_size() != size || penalty.len() != size {
        return Err(Error::InvalidConfig(format!(
            "vocabulary size {size}, scorer size {}, penalty size {}",
            scorer.vocab_size(),
            penalty.len()
        )));
    }

    let mut beam = Beam::initial();
    let mut pool = FinishedPool {
        capacity: config.beam_width,
        entries: Vec::new(),
    };
    let mut trace = Vec::new();

    for step in 1..=config.max_len {
        let best_live = beam.live().map(|h| h.aug_score).next();
        let Some(best_live) = best_live else { break };
        if pool.worst().is_some_and(|worst| best_live < worst) {
            break;
        }
        let scores = beam
            .live()
            .map(|h| scorer.score_step(condition, &h.tokens))
            .collect::<Result<Vec<_>>>()?;
        let selection = select::select(&beam, &scores, penalty, config.lambda, config.beam_width)?;
        beam = selection.beam;
        if step == config.max_len {
            for h in beam.hypotheses.iter_mut() {
                h.finished = true;
            }
        }
        for h in beam.hypotheses() {
            if h.finished && h.steps.len() == step {
                pool.offer(h.clone());
            }
        }
        trace.push(StepTrace {
            candidates: selection.candidates,
            selected: selection.chosen,
        });
    }

    let best = pool
        .entries
        .first()
        .cloned()
        .expect("every decode finishes at least one hypothesis");
    Ok(SegmentResult {
        condition: condition.clone(),
        best,
        all_finished: pool.entries,
        penalty: penalty.clone(),
        trace,
    })
}

/// Decodes one segment per condition, penalizing each segment against the
/// best hypotheses of the segments before it.
pub fn inter_sentence_dbs<S: StepScorer + ?Sized>(
    scorer: &S,
    conditions: &[Condition],
    vocab: &Vocabulary,
    config: &DecodeConfig,
    penalty_fn: &dyn DiversityPenalty,
) -> Result<StoryResult> {
    if conditions.is_empty() {
        return Err(Error::InvalidConfig("no conditions given".into()));
    }
    config.validate()?;
    if conditions.len() != config.num_segments {
        return Err(Error::ConditionCount {
            expected: config.num_segments,
            actual: conditions.len(),
        });
    }

    let mut previous: Vec<Vec<TokenId>> = Vec::with_capacity(conditions.len());
    let mut segments = Vec::with_capacity(conditions.len());
    for condition in conditions {
        let penalty = if previous.is_empty() {
            PenaltyVector::zeros(vocab.len())
        } else {
            checked_penalty(penalty_fn, &previous, vocab.len())?
        };
        let segment = beam_search(scorer, condition, vocab, config, &penalty)?;
        previous.push(segment.best.tokens.clone());
        segments.push(segment);
    }
    Ok(StoryResult {
        story_tokens: previous.concat(),
        segments,
    })
}

/// Decodes independent stories on up to `workers` threads. Results come
/// back in input order.
pub fn decode_batch<S: StepScorer + ?Sized>(
    scorer: &S,
    stories: &[Vec<Condition>],
    vocab: &Vocabulary,
    config: &DecodeConfig,
    penalty_fn: &dyn DiversityPenalty,
    workers: usize,
) -> Vec<Result<StoryResult>> {
    let decode = |conditions: &Vec<Condition>| {
        let config = DecodeConfig {
            num_segments: conditions.len(),
            ..*config
        };
        inter_sentence_dbs(scorer, conditions, vocab, &config, penalty_fn)
    };
    let workers = workers.clamp(1, stories.len().max(1));
    let chunk = stories.len().div_ceil(workers).max(1);
    thread::scope(|scope| {
        let handles: Vec<_> = stories
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(decode).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("decode worker panicked"))
            .collect()
    })
}
