use serde::{Deserialize, Serialize};

use super::{check_prefix, Condition, StepScorer, StepScores};
use crate::error::{Error, Result};
use crate::vocab::{is_special_token, TokenId, Vocabulary, BOS_TOKEN, PAD_TOKEN};

/// Accepted deviation of a row's sum from 1 when loading.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// On-disk form of a [`TableScorer`].
///
/// `vocab` names the columns of every probability row. Its non-reserved
/// entries, in order, follow the four reserved ids in the scorer's
/// vocabulary. Tokens not listed have probability zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableDocument {
    pub vocab: Vec<String>,
    pub default_row: Vec<f64>,
    #[serde(default)]
    pub rows: Vec<TableRow>,
}

/// A row that applies when `condition` matches (or is absent) and `context`
/// is a suffix of `<bos>` followed by the emitted prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<String>,
    #[serde(default)]
    pub context: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug)]
struct CompiledRow {
    condition: Option<Condition>,
    context: Vec<TokenId>,
    scores: StepScores,
}

/// Deterministic scorer driven by explicit probability tables.
///
/// When several rows match, a row keyed on the query's condition beats a
/// wildcard row, then the longer context wins, then the earlier row.
#[derive(Clone, Debug)]
pub struct TableScorer {
    vocab: Vocabulary,
    document: TableDocument,
    default_scores: StepScores,
    rows: Vec<CompiledRow>,
}

pub fn load_table_scorer(text: &str) -> Result<TableScorer> {
    TableScorer::new(serde_json::from_str(text)?)
}

impl TableScorer {
    pub fn new(document: TableDocument) -> Result<Self> {
        for t in &document.vocab {
            if t == PAD_TOKEN || t == BOS_TOKEN {
                return Err(Error::InvalidTable(format!("{t} cannot carry probability")));
            }
        }
        let vocab = Vocabulary::with_tokens(
            document
                .vocab
                .iter()
                .filter(|t| !is_special_token(t))
                .cloned(),
        )
        .map_err(|e| Error::InvalidTable(e.to_string()))?;
        let mut columns = Vec::with_capacity(document.vocab.len());
        for t in &document.vocab {
            let id = vocab.id(t).expect("column registered above");
            if columns.contains(&id) {
                return Err(Error::InvalidTable(format!("duplicate column {t:?}")));
            }
            columns.push(id);
        }

        let compile = |probs: &[f64], what: &str| -> Result<StepScores> {
            if probs.len() != columns.len() {
                return Err(Error::InvalidTable(format!(
                    "{what} has {} entries for {} columns",
                    probs.len(),
                    columns.len()
                )));
            }
            if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
                return Err(Error::InvalidTable(format!("{what} has invalid entry {p}")));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidTable(format!("{what} sums to {sum}")));
            }
            let mut full = vec![0.0; vocab.len()];
            for (&id, &p) in columns.iter().zip(probs) {
                full[id.index()] = p / sum;
            }
            StepScores::from_probs(&full)
        };

        let default_scores = compile(&document.default_row, "default_row")?;
        let mut rows = Vec::with_capacity(document.rows.len());
        for (i, row) in document.rows.iter().enumerate() {
            let condition = row.condition.clone().map(Condition::new).transpose()?;
            let context = row
                .context
                .iter()
                .map(|t| {
                    vocab
                        .id(t)
                        .ok_or_else(|| Error::InvalidTable(format!("row {i}: unknown token {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(CompiledRow {
                condition,
                context,
                scores: compile(&row.probs, &format!("row {i}"))?,
            });
        }
        Ok(Self {
            vocab,
            document,
            default_scores,
            rows,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn document(&self) -> &TableDocument {
        &self.document
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.document)?)
    }

    fn lookup(&self, condition: &Condition, prefix: &[TokenId]) -> &StepScores {
        let framed: Vec<TokenId> = std::iter::once(TokenId::BOS)
            .chain(prefix.iter().copied())
            .collect();
        let mut best: Option<(bool, usize, &CompiledRow)> = None;
        for row in &self.rows {
            let specific = match &row.condition {
                Some(c) if c == condition => true,
                Some(_) => continue,
                None => false,
            };
            if !framed.ends_with(&row.context) {
                continue;
            }
            let key = (specific, row.context.len());
            if best.is_none_or(|(s, l, _)| key > (s, l)) {
                best = Some((key.0, key.1, row));
            }
        }
        best.map_or(&self.default_scores, |(_, _, row)| &row.scores)
    }
}

impl StepScorer for TableScorer {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn score_step(&self, condition: &Condition, prefix: &[TokenId]) -> Result<StepScores> {
        check_prefix(prefix)?;
        Ok(self.lookup(condition, prefix).clone())
    }
}
