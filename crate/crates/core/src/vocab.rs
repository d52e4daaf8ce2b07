//! Corpus ingestion and vocabulary construction.
//!
//! Ids 0 through 3 are always the reserved tokens `<pad>`, `<bos>`, `<eos>`
//! and `<unk>`. Remaining tokens follow in descending corpus frequency, ties
//! broken lexicographically, so a given corpus always produces the same ids.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a [`Vocabulary`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const PAD: TokenId = TokenId(0);
    pub const BOS: TokenId = TokenId(1);
    pub const EOS: TokenId = TokenId(2);
    pub const UNK: TokenId = TokenId(3);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_special(self) -> bool {
        self.0 < NUM_SPECIALS as u32
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";

pub const SPECIAL_TOKENS: [&str; 4] = [PAD_TOKEN, BOS_TOKEN, EOS_TOKEN, UNK_TOKEN];
pub const NUM_SPECIALS: usize = SPECIAL_TOKENS.len();

/// Tokens must occur at least this often to enter the vocabulary by default.
pub const DEFAULT_MIN_COUNT: u32 = 4;

pub fn is_special_token(token: &str) -> bool {
    SPECIAL_TOKENS.contains(&token)
}

/// Sentences of lowercased whitespace-separated tokens. Never contains an
/// empty sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<Vec<String>>,
}

impl Corpus {
    pub fn new(sentences: Vec<Vec<String>>) -> Result<Self> {
        if let Some(i) = sentences.iter().position(Vec::is_empty) {
            return Err(Error::EmptySentence(i));
        }
        Ok(Self { sentences })
    }

    /// Parses one-sentence-per-line text. Blank lines are skipped and every
    /// token is lowercased.
    pub fn from_text(text: &str) -> Self {
        let sentences = text
            .lines()
            .map(|line| {
                line.split_whitespace()
                    .map(str::to_lowercase)
                    .collect::<Vec<_>>()
            })
            .filter(|s| !s.is_empty())
            .collect();
        Self { sentences }
    }

    pub fn sentences(&self) -> &[Vec<String>] {
        &self.sentences
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }
}

/// Bidirectional token/id map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocabulary {
    /// Builds a vocabulary from an explicit token list, which must start with
    /// the four reserved tokens in order and contain no duplicates.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < NUM_SPECIALS
            || tokens
                .iter()
                .zip(SPECIAL_TOKENS)
                .any(|(t, special)| t != special)
        {
            return Err(Error::InvalidVocabulary(format!(
                "must begin with {SPECIAL_TOKENS:?}"
            )));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            if i >= NUM_SPECIALS && is_special_token(token) {
                return Err(Error::InvalidVocabulary(format!(
                    "reserved token {token:?} repeated"
                )));
            }
            if ids.insert(token.clone(), TokenId(i as u32)).is_some() {
                return Err(Error::InvalidVocabulary(format!(
                    "duplicate token {token:?}"
                )));
            }
        }
        Ok(Self { tokens, ids })
    }

    /// Reserved tokens followed by `extra` in the order given.
    pub fn with_tokens<I, S>(extra: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens = SPECIAL_TOKENS
            .iter()
            .map(|s| s.to_string())
            .chain(extra.into_iter().map(Into::into))
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Result<&str> {
        self.tokens
            .get(id.index())
            .map(String::as_str)
            .ok_or(Error::TokenOutOfRange {
                id: id.0,
                size: self.tokens.len(),
            })
    }

    /// Out-of-vocabulary tokens map to `<unk>`. No delimiters are added.
    pub fn encode<S: AsRef<str>>(&self, sentence: &[S]) -> Vec<TokenId> {
        sentence
            .iter()
            .map(|t| self.id(t.as_ref()).unwrap_or(TokenId::UNK))
            .collect()
    }

    pub fn decode_tokens(&self, ids: &[TokenId]) -> Result<Vec<String>> {
        ids.iter()
            .map(|&id| self.token(id).map(str::to_owned))
            .collect()
    }
}

/// Keeps every token seen at least `min_count` times, plus the reserved ones.
pub fn build_vocabulary(corpus: &Corpus, min_count: u32) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if min_count == 0 {
        return Err(Error::ZeroMinCount);
    }
    let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
    for token in corpus.sentences().iter().flatten() {
        if !is_special_token(token) {
            *freq.entry(token.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = freq
        .into_iter()
        .filter(|&(_, n)| n >= u64::from(min_count))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::with_tokens(kept.into_iter().map(|(t, _)| t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::from_text(&lines.join("\n"))
    }

    fn non_special(v: &Vocabulary) -> Vec<&str> {
        v.tokens()[NUM_SPECIALS..]
            .iter()
            .map(String::as_str)
            .collect()
    }

    #[test]
    fn default_min_count_excludes_three_occurrences() {
        let v = build_vocabulary(&corpus(&["a b a", "a c"]), DEFAULT_MIN_COUNT).unwrap();
        assert_eq!(v.len(), NUM_SPECIALS);
    }

    #[test]
    fn min_count_one_orders_by_frequency_then_lexically() {
        let v = build_vocabulary(&corpus(&["a b a", "a c"]), 1).unwrap();
        assert_eq!(non_special(&v), ["a", "b", "c"]);
        assert_eq!(v.id("a"), Some(TokenId(4)));
    }

    #[test]
    fn singleton_corpus() {
        let v = build_vocabulary(&corpus(&["x"]), 1).unwrap();
        assert_eq!(non_special(&v), ["x"]);
    }

    #[test]
    fn frequency_ties_are_lexicographic() {
        let v = build_vocabulary(&corpus(&["d c b a", "b"]), 1).unwrap();
        assert_eq!(non_special(&v), ["b", "a", "c", "d"]);
    }

    #[test]
    fn empty_corpus_and_zero_min_count_rejected() {
        assert!(matches!(
            build_vocabulary(&corpus(&["", "  "]), 1),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            build_vocabulary(&corpus(&["a"]), 0),
            Err(Error::ZeroMinCount)
        ));
    }

    #[test]
    fn ingestion_lowercases_and_skips_blank_lines() {
        let c = Corpus::from_text("The Cat\n\n  \nthe  dog\n");
        assert_eq!(c.len(), 2);
        assert_eq!(c.sentences()[0], ["the", "cat"]);
        assert!(Corpus::new(vec![vec![]]).is_err());
    }

    #[test]
    fn encode_maps_oov_to_unk() {
        let v = Vocabulary::with_tokens(["a"]).unwrap();
        assert_eq!(v.encode(&["a", "zzz"]), [TokenId(4), TokenId::UNK]);
        assert_eq!(v.encode::<&str>(&[]), []);
        assert_eq!(v.encode(&["a", "a"]), [TokenId(4), TokenId(4)]);
    }

    #[test]
    fn decode_renders_specials_and_checks_bounds() {
        let v = Vocabulary::with_tokens(["a", "b"]).unwrap();
        assert_eq!(v.decode_tokens(&[TokenId::EOS]).unwrap(), ["<eos>"]);
        let s = ["b", "a", "b"];
        assert_eq!(v.decode_tokens(&v.encode(&s)).unwrap(), s);
        assert!(matches!(
            v.decode_tokens(&[TokenId(6)]),
            Err(Error::TokenOutOfRange { id: 6, size: 6 })
        ));
    }

    #[test]
    fn from_tokens_validates_layout() {
        assert!(Vocabulary::from_tokens(vec!["a".into()]).is_err());
        assert!(Vocabulary::with_tokens(["a", "a"]).is_err());
        assert!(Vocabulary::with_tokens(["<eos>"]).is_err());
    }
}
