use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_prefix, Condition, StepScorer, StepScores};
use crate::error::{Error, Result};
use crate::vocab::{Corpus, TokenId, Vocabulary};

/// Laplace-smoothed n-gram language model.
///
/// Contexts are exactly `order - 1` tokens, left-padded with `<bos>`. The
/// event space is the vocabulary minus `<pad>` and `<bos>`, so
/// `P(v | c) = (count(c, v) + alpha) / (total(c) + alpha * (|V| - 2))`.
/// The conditioning key is ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    vocab: Vocabulary,
    counts: BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>>,
}

pub fn train_ngram(
    corpus: &Corpus,
    vocab: &Vocabulary,
    order: usize,
    alpha: f64,
) -> Result<NGramModel> {
    let mut model = NGramModel::empty(vocab.clone(), order, alpha)?;
    for sentence in corpus.sentences() {
        let mut framed = vec![TokenId::BOS; order - 1];
        framed.extend(vocab.encode(sentence));
        framed.push(TokenId::EOS);
        for window in framed.windows(order) {
            let (context, token) = window.split_at(order - 1);
            *model
                .counts
                .entry(context.to_vec())
                .or_default()
                .entry(token[0])
                .or_default() += 1;
        }
    }
    Ok(model)
}

impl NGramModel {
    fn empty(vocab: Vocabulary, order: usize, alpha: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidNGram("order must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidNGram(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self {
            order,
            alpha,
            vocab,
            counts: BTreeMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, context: &[TokenId], token: TokenId) -> u64 {
        self.counts
            .get(context)
            .and_then(|row| row.get(&token))
            .copied()
            .unwrap_or(0)
    }

    fn context_of(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let width = self.order - 1;
        let mut context = vec![TokenId::BOS; width.saturating_sub(prefix.len())];
        context.extend_from_slice(&prefix[prefix.len().saturating_sub(width)..]);
        context
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NGramFile::from_model(self)?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<NGramFile>(text)?.into_model()
    }
}

impl StepScorer for NGramModel {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn score_step(&self, _condition: &Condition, prefix: &[TokenId]) -> Result<StepScores> {
        check_prefix(prefix)?;
        let size = self.vocab.len();
        let events = (size - 2) as f64;
        let row = self.counts.get(&self.context_of(prefix));
        let total: u64 = row.map(|r| r.values().sum()).unwrap_or(0);
        let denom = total as f64 + self.alpha * events;
        let mut logprobs = vec![f64::NEG_INFINITY; size];
        for (i, lp) in logprobs.iter_mut().enumerate().skip(2) {
            let count = row
                .and_then(|r| r.get(&TokenId(i as u32)))
                .copied()
                .unwrap_or(0);
            *lp = ((count as f64 + self.alpha) / denom).ln();
        }
        StepScores::new(logprobs, size)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NGramFile {
    order: usize,
    alpha: f64,
    vocab: Vec<String>,
    counts: Vec<CountEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountEntry {
    context: Vec<String>,
    token: String,
    count: u64,
}

impl NGramFile {
    fn from_model(model: &NGramModel) -> Result<Self> {
        let mut counts = Vec::new();
        for (context, row) in &model.counts {
            for (&token, &count) in row {
                counts.push(CountEntry {
                    context: model.vocab.decode_tokens(context)?,
                    token: model.vocab.token(token)?.to_owned(),
                    count,
                });
            }
        }
        Ok(Self {
            order: model.order,
            alpha: model.alpha,
            vocab: model.vocab.tokens().to_vec(),
            counts,
        })
    }

    fn into_model(self) -> Result<NGramModel> {
        let vocab = Vocabulary::from_tokens(self.vocab)?;
        let mut model = NGramModel::empty(vocab, self.order, self.alpha)?;
        let lookup = |t: &str| {
            model
                .vocab
                .id(t)
                .ok_or_else(|| Error::InvalidNGram(format!("unknown token {t:?}")))
        };
        let mut counts: BTreeMap<Vec<TokenId>, BTreeMap<TokenId, u64>> = BTreeMap::new();
        for entry in self.counts {
            if entry.context.len() != self.order - 1 {
                return Err(Error::InvalidNGram(format!(
                    "context {:?} has length {}, expected {}",
                    entry.context,
                    entry.context.len(),
                    self.order - 1
                )));
            }
            let context = entry
                .context
                .iter()
                .map(|t| lookup(t))
                .collect::<Result<Vec<_>>>()?;
            let token = lookup(&entry.token)?;
            if token == TokenId::PAD || token == TokenId::BOS {
                return Err(Error::InvalidNGram(format!(
                    "{} is not an event",
                    entry.token
                )));
            }
            if context
                .iter()
                .any(|t| t.is_special() && *t != TokenId::BOS && *t != TokenId::UNK)
            {
                return Err(Error::InvalidNGram(format!(
                    "bad context {:?}",
                    entry.context
                )));
            }
            if counts
                .entry(context)
                .or_default()
                .insert(token, entry.count)
                .is_some()
            {
                return Err(Error::InvalidNGram("duplicate count entry".into()));
            }
        }
        model.counts = counts;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cond() -> Condition {
        Condition::new("c").unwrap()
    }

    fn prob(model: &NGramModel, prefix: &[TokenId], token: &str) -> f64 {
        let id = model.vocab().id(token).unwrap();
        model.score_step(&cond(), prefix).unwrap().get(id).exp()
    }

    #[test]
    fn laplace_formula_on_singleton_corpus() {
        let corpus = Corpus::from_text("a");
        let vocab = Vocabulary::with_tokens(["a"]).unwrap();
        let m = train_ngram(&corpus, &vocab, 1, 1.0).unwrap();
        // events {<eos>, <unk>, a}; count(a)=1, count(eos)=1, total=2
        assert!((prob(&m, &[], "a") - 0.4).abs() < 1e-12);
        assert!((prob(&m, &[], "<eos>") - 0.4).abs() < 1e-12);
        assert!((prob(&m, &[], "<unk>") - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unigram_approaches_relative_frequency() {
        let corpus = Corpus::from_text("a a a b");
        let vocab = Vocabulary::with_tokens(["a", "b"]).unwrap();
        let m = train_ngram(&corpus, &vocab, 1, 1e-9).unwrap();
        assert!((prob(&m, &[], "a") - 0.6).abs() < 1e-6);
        assert!((prob(&m, &[], "b") - 0.2).abs() < 1e-6);
        assert!((prob(&m, &[], "<eos>") - 0.2).abs() < 1e-6);
    }

    #[test]
    fn unseen_context_is_uniform() {
        let corpus = Corpus::from_text("a b");
        let vocab = Vocabulary::with_tokens(["a", "b", "c"]).unwrap();
        let m = train_ngram(&corpus, &vocab, 2, 0.5).unwrap();
        let c = vocab.id("c").unwrap();
        let s = m.score_step(&cond(), &[c]).unwrap();
        let finite: Vec<f64> = s.generable().map(|(_, lp)| lp).collect();
        assert_eq!(finite.len(), vocab.len() - 2);
        assert!(finite.iter().all(|&lp| lp == finite[0]));
    }

    #[test]
    fn kl_to_uniform_shrinks_as_alpha_grows() {
        let corpus = Corpus::from_text("a a b\nb c a\na");
        let vocab = Vocabulary::with_tokens(["a", "b", "c"]).unwrap();
        let kl = |alpha| {
            let m = train_ngram(&corpus, &vocab, 1, alpha).unwrap();
            let s = m.score_step(&cond(), &[]).unwrap();
            let n = (vocab.len() - 2) as f64;
            s.generable()
                .map(|(_, lp)| lp.exp() * (lp + n.ln()))
                .sum::<f64>()
        };
        let (k1, k2, k3) = (kl(0.1), kl(1.0), kl(10.0));
        assert!(k1 >= k2 && k2 >= k3, "{k1} {k2} {k3}");
        assert!(k3 >= 0.0);
    }

    #[test]
    fn rejects_bad_parameters_and_eos_prefix() {
        let corpus = Corpus::from_text("a");
        let vocab = Vocabulary::with_tokens(["a"]).unwrap();
        assert!(train_ngram(&corpus, &vocab, 0, 1.0).is_err());
        assert!(train_ngram(&corpus, &vocab, 2, 0.0).is_err());
        assert!(train_ngram(&corpus, &vocab, 2, -1.0).is_err());
        let m = train_ngram(&corpus, &vocab, 2, 1.0).unwrap();
        assert!(matches!(
            m.score_step(&cond(), &[TokenId(4), TokenId::EOS]),
            Err(Error::PrefixContainsEos(1))
        ));
    }

    #[test]
    fn only_last_window_matters() {
        let corpus = Corpus::from_text("a b c\nc b a\nb b a c");
        let vocab = Vocabulary::with_tokens(["a", "b", "c"]).unwrap();
        let m = train_ngram(&corpus, &vocab, 3, 0.3).unwrap();
        let [a, b, c] = ["a", "b", "c"].map(|t| vocab.id(t).unwrap());
        let s1 = m.score_step(&cond(), &[a, a, b, c]).unwrap();
        let s2 = m.score_step(&cond(), &[c, b, c]).unwrap();
        assert_eq!(s1, s2);
        assert_ne!(s1, m.score_step(&cond(), &[c]).unwrap());
    }

    #[test]
    fn file_round_trip_is_exact() {
        let corpus = Corpus::from_text("the cat sat\nthe dog sat\na cat ran");
        let vocab = Vocabulary::with_tokens(["the", "cat", "sat"]).unwrap();
        let m = train_ngram(&corpus, &vocab, 2, 0.37).unwrap();
        let back = NGramModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(NGramModel::from_json("{\"order\": 2}").is_err());
    }
}
