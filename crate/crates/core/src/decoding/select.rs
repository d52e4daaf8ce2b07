use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{token_rank, Beam, Step};
use crate::diversity::PenaltyVector;
use crate::error::{Error, Result};
use crate::scoring::StepScores;
use crate::vocab::TokenId;

/// One entry of the candidate set, before it is materialized.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    aug: f64,
    rank: (bool, u32),
    parent: usize,
    extension: Option<Step>,
}

impl Candidate {
    fn cmp_quality(&self, other: &Self) -> Ordering {
        self.aug
            .total_cmp(&other.aug)
            .then_with(|| other.rank.cmp(&self.rank))
            .then_with(|| other.parent.cmp(&self.parent))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_quality(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_quality(other)
    }
}

pub(super) struct Selection {
    pub beam: Beam,
    pub candidates: usize,
    pub chosen: Vec<Option<Step>>,
}

/// One step of penalized beam expansion.
///
/// Every unfinished hypothesis is extended by every token with a finite
/// score; each extension is scored `aug + logprob + lambda * penalty[token]`.
/// Finished hypotheses compete for the `width` slots at their current score.
/// Ties go to the lower token id (with `<eos>` ranked after every other
/// token), then to the lower incoming-beam index.
///
/// `scores[k]` belongs to the k-th unfinished hypothesis of `beam`.
pub fn expand_and_select(
    beam: &Beam,
    scores: &[StepScores],
    penalty: &PenaltyVector,
    lambda: f64,
    width: usize,
) -> Result<Beam> {
    select(beam, scores, penalty, lambda, width).map(|s| s.beam)
}

pub(super) fn select(
    beam: &Beam,
    scores: &[StepScores],
    penalty: &PenaltyVector,
    lambda: f64,
    width: usize,
) -> Result<Selection> {
    if width < 1 {
        return Err(Error::InvalidConfig("beam width must be at least 1".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let live = beam.live_count();
    if scores.len() != live {
        return Err(Error::MisalignedScores {
            scores: scores.len(),
            live,
        });
    }
    if let Some(s) = scores.iter().find(|s| s.len() != penalty.len()) {
        return Err(Error::InvalidStepScores(format!(
            "{} scores against a penalty of length {}",
            s.len(),
            penalty.len()
        )));
    }

    let mut heap: BinaryHeap<Reverse<Candidate>> = BinaryHeap::with_capacity(width + 1);
    let mut offer = |c: Candidate| {
        heap.push(Reverse(c));
        if heap.len() > width {
            heap.pop();
        }
    };

    let mut candidates = 0;
    let mut live_scores = scores.iter();
    for (parent, hyp) in beam.hypotheses().iter().enumerate() {
        if hyp.finished {
            candidates += 1;
            let last = hyp.steps.last().map_or(TokenId::EOS, |s| s.token);
            offer(Candidate {
                aug: hyp.aug_score,
                rank: token_rank(last),
                parent,
                extension: None,
            });
            continue;
        }
        let step_scores = live_scores.next().expect("length checked above");
        for (token, logprob) in step_scores.generable() {
            candidates += 1;
            // adding +0.0 turns a -0.0 product into 0.0
            let contribution = lambda * penalty.get(token) + 0.0;
            offer(Candidate {
                aug: hyp.aug_score + (logprob + contribution),
                rank: token_rank(token),
                parent,
                extension: Some(Step {
                    token,
                    logprob,
                    penalty: contribution,
                }),
            });
        }
    }

    let winners = heap.into_sorted_vec();
    let mut hypotheses = Vec::with_capacity(winners.len());
    let mut chosen = Vec::with_capacity(winners.len());
    for Reverse(c) in winners {
        let parent = &beam.hypotheses()[c.parent];
        let hyp = match c.extension {
            None => parent.clone(),
            Some(step) => {
                let mut h = parent.clone();
                h.push(step);
                debug_assert_eq!(h.aug_score, c.aug);
                h
            }
        };
        chosen.push(c.extension);
        hypotheses.push(hyp);
    }
    Ok(Selection {
        beam: Beam { hypotheses },
        candidates,
        chosen,
    })
}
