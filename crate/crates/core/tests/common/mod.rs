#![allow(dead_code)]

use std::sync::Mutex;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use storybeam::error::Result;
use storybeam::scoring::{Condition, StepScorer, StepScores, TableDocument, TableRow, TableScorer};
use storybeam::TokenId;

pub const CONDITION_POOL: [&str; 4] = ["c0", "c1", "c2", "c3"];

pub fn cond(key: &str) -> Condition {
    Condition::new(key).unwrap()
}

/// The 0.5 / 0.3 / 0.2 table over (a, b, <eos>) used throughout the docs.
pub fn skewed_fixture() -> TableScorer {
    TableScorer::new(TableDocument {
        vocab: vec!["a".into(), "b".into(), "<eos>".into()],
        default_row: vec![0.5, 0.3, 0.2],
        rows: vec![],
    })
    .unwrap()
}

fn random_row(rng: &mut StdRng, width: usize) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..width)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    0.0
                } else {
                    rng.gen_range(0.01..1.0)
                }
            })
            .collect();
        // quantize a few entries so exact ties show up
        if rng.gen_bool(0.3) {
            for x in w.iter_mut() {
                *x = (*x * 4.0).ceil() / 4.0;
            }
        }
        let sum: f64 = w.iter().sum();
        if sum > 0.0 {
            return w.iter().map(|x| x / sum).collect();
        }
    }
}

/// A random table scorer with `content` ordinary tokens plus `<eos>`,
/// condition-specific rows and context rows.
pub fn random_table(rng: &mut StdRng, content: usize) -> TableScorer {
    let mut vocab: Vec<String> = (0..content).map(|i| format!("w{i}")).collect();
    vocab.push("<eos>".into());
    let width = vocab.len();
    let row_count = rng.gen_range(0..6);
    let rows = (0..row_count)
        .map(|_| {
            let condition = rng
                .gen_bool(0.6)
                .then(|| CONDITION_POOL[rng.gen_range(0..CONDITION_POOL.len())].to_owned());
            let ctx_len = rng.gen_range(0..3);
            let context = (0..ctx_len)
                .map(|_| format!("w{}", rng.gen_range(0..content)))
                .collect();
            TableRow {
                condition,
                context,
                probs: random_row(rng, width),
            }
        })
        .collect();
    TableScorer::new(TableDocument {
        vocab,
        default_row: random_row(rng, width),
        rows,
    })
    .unwrap()
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Wraps a scorer and records the worst log-sum-exp deviation seen.
pub struct Instrumented<S> {
    pub inner: S,
    stats: Mutex<(usize, f64)>,
}

impl<S> Instrumented<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            stats: Mutex::new((0, 0.0)),
        }
    }

    /// (number of calls, max |log-sum-exp|)
    pub fn stats(&self) -> (usize, f64) {
        *self.stats.lock().unwrap()
    }
}

impl<S: StepScorer> StepScorer for Instrumented<S> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn score_step(&self, condition: &Condition, prefix: &[TokenId]) -> Result<StepScores> {
        let scores = self.inner.score_step(condition, prefix)?;
        let dev = scores.log_sum_exp().abs();
        let mut stats = self.stats.lock().unwrap();
        stats.0 += 1;
        if dev.is_nan() || dev > stats.1 {
            stats.1 = dev;
        }
        Ok(scores)
    }
}
