//! Surface repetition statistics for a multi-segment story.
//!
//! Reserved tokens (`<eos>`, `<unk>`, ...) are dropped before anything is
//! counted. N-grams never span a segment boundary.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::vocab::is_special_token;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub distinct_1: f64,
    pub distinct_2: f64,
    pub mean_pairwise_jaccard: f64,
    pub repeated_segment_pairs: usize,
}

/// Unique n-grams over total n-grams, pooled across segments. Zero when
/// there are no n-grams.
pub fn distinct_n<S: AsRef<str>>(segments: &[Vec<S>], n: usize) -> f64 {
    let mut total = 0usize;
    let mut unique: HashSet<Vec<&str>> = HashSet::new();
    for seg in segments {
        let words = content(seg);
        if n == 0 || words.len() < n {
            continue;
        }
        for gram in words.windows(n) {
            total += 1;
            unique.insert(gram.to_vec());
        }
    }
    if total == 0 {
        0.0
    } else {
        unique.len() as f64 / total as f64
    }
}

pub fn diversity_report<S: AsRef<str>>(segments: &[Vec<S>]) -> DiversityReport {
    let stripped: Vec<Vec<&str>> = segments.iter().map(|s| content(s)).collect();
    let sets: Vec<BTreeSet<&str>> = stripped
        .iter()
        .map(|s| s.iter().copied().collect())
        .collect();

    let mut pairs = 0usize;
    let mut jaccard_sum = 0.0;
    let mut repeated = 0usize;
    for i in 0..stripped.len() {
        for j in i + 1..stripped.len() {
            pairs += 1;
            jaccard_sum += jaccard(&sets[i], &sets[j]);
            if stripped[i] == stripped[j] {
                repeated += 1;
            }
        }
    }

    DiversityReport {
        distinct_1: distinct_n(&stripped, 1),
        distinct_2: distinct_n(&stripped, 2),
        mean_pairwise_jaccard: if pairs == 0 {
            0.0
        } else {
            jaccard_sum / pairs as f64
        },
        repeated_segment_pairs: repeated,
    }
}

fn content<S: AsRef<str>>(segment: &[S]) -> Vec<&str> {
    segment
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !is_special_token(t))
        .collect()
}

/// Two empty sets score 0.
fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}
