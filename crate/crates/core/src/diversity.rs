//! Diversity penalties computed from previously emitted segments.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::vocab::TokenId;

/// Occurrence counts of non-reserved tokens across a set of segments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BagOfWords {
    counts: BTreeMap<TokenId, u32>,
}

impl BagOfWords {
    pub fn count(&self, token: TokenId) -> u32 {
        self.counts.get(&token).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, u32)> + '_ {
        self.counts.iter().map(|(&t, &n)| (t, n))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }
}

pub fn bag_of_words<S: AsRef<[TokenId]>>(segments: &[S]) -> BagOfWords {
    let mut counts = BTreeMap::new();
    for &token in segments.iter().flat_map(|s| s.as_ref()) {
        if !token.is_special() {
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    BagOfWords { counts }
}

/// Per-token penalty Δ, indexed by [`TokenId`]. Entries are never positive.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyVector {
    values: Vec<f64>,
}

impl PenaltyVector {
    pub fn zeros(vocab_size: usize) -> Self {
        Self {
            values: vec![0.0; vocab_size],
        }
    }

    /// Wraps raw values after checking the sign and finiteness of each entry
    /// and that reserved tokens carry no penalty.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v <= 0.0) {
                return Err(Error::PenaltyViolation(format!(
                    "entry {i} is {v}, penalties must be finite and non-positive"
                )));
            }
            if TokenId(i as u32).is_special() && v != 0.0 {
                return Err(Error::PenaltyViolation(format!(
                    "reserved token {i} has penalty {v}"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, token: TokenId) -> f64 {
        self.values[token.index()]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks the vector against the bag it was derived from: right length,
    /// and zero wherever the bag has no occurrences.
    pub fn validate_against(&self, bag: &BagOfWords, vocab_size: usize) -> Result<()> {
        if self.values.len() != vocab_size {
            return Err(Error::PenaltyViolation(format!(
                "length {} does not match vocabulary size {vocab_size}",
                self.values.len()
            )));
        }
        Self::new(self.values.clone())?;
        for (i, &v) in self.values.iter().enumerate() {
            if v != 0.0 && bag.count(TokenId(i as u32)) == 0 {
                return Err(Error::PenaltyViolation(format!(
                    "token {i} is penalized but never occurred"
                )));
            }
        }
        Ok(())
    }
}

/// Δ[v] = -count(v). Reserved tokens are never in the bag, so stay at 0.
pub fn hamming_penalty(bag: &BagOfWords, vocab_size: usize) -> PenaltyVector {
    let mut values = vec![0.0; vocab_size];
    for (token, n) in bag.iter() {
        if let Some(v) = values.get_mut(token.index()) {
            *v = -f64::from(n);
        }
    }
    PenaltyVector { values }
}

/// A diversity function over the segments emitted so far.
pub trait DiversityPenalty: Send + Sync {
    fn name(&self) -> &'static str;

    fn penalty(&self, previous: &[Vec<TokenId>], vocab_size: usize) -> PenaltyVector;
}

/// Penalizes each token by the number of times it occurred before.
#[derive(Clone, Copy, Debug, Default)]
pub struct Hamming;

impl DiversityPenalty for Hamming {
    fn name(&self) -> &'static str {
        "hamming"
    }

    fn penalty(&self, previous: &[Vec<TokenId>], vocab_size: usize) -> PenaltyVector {
        hamming_penalty(&bag_of_words(previous), vocab_size)
    }
}

/// Penalizes each previously seen token by 1, regardless of count.
#[derive(Clone, Copy, Debug, Default)]
pub struct BinaryPresence;

impl DiversityPenalty for BinaryPresence {
    fn name(&self) -> &'static str {
        "binary"
    }

    fn penalty(&self, previous: &[Vec<TokenId>], vocab_size: usize) -> PenaltyVector {
        let mut values = vec![0.0; vocab_size];
        for (token, _) in bag_of_words(previous).iter() {
            if let Some(v) = values.get_mut(token.index()) {
                *v = -1.0;
            }
        }
        PenaltyVector { values }
    }
}

/// Runs `penalty` and checks that its output honours the contract.
pub fn checked_penalty(
    penalty: &dyn DiversityPenalty,
    previous: &[Vec<TokenId>],
    vocab_size: usize,
) -> Result<PenaltyVector> {
    let vector = penalty.penalty(previous, vocab_size);
    vector.validate_against(&bag_of_words(previous), vocab_size)?;
    Ok(vector)
}

pub fn penalty_by_name(name: &str) -> Option<Box<dyn DiversityPenalty>> {
    match name {
        "hamming" => Some(Box::new(Hamming)),
        "binary" => Some(Box::new(BinaryPresence)),
        _ => None,
    }
}
