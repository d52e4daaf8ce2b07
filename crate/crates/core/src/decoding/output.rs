use serde::{Deserialize, Serialize};

use super::StoryResult;
use crate::error::Result;
use crate::vocab::Vocabulary;

/// Rounds to 9 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse::<f64>().unwrap_or(x) + 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDocument {
    pub token: String,
    pub logprob: f64,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDocument {
    pub condition: String,
    pub tokens: Vec<String>,
    pub raw_score: f64,
    pub aug_score: f64,
    pub steps: Vec<StepDocument>,
}

/// Serialized form of a decoded story.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoryDocument {
    pub segments: Vec<SegmentDocument>,
    pub story: String,
}

impl StoryDocument {
    pub fn to_json(&self) -> Result<String> {
        let mut out = serde_json::to_string_pretty(self)?;
        out.push('\n');
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl StoryResult {
    pub fn to_document(&self, vocab: &Vocabulary) -> Result<StoryDocument> {
        let segments = self
            .segments
            .iter()
            .map(|seg| {
                let steps = seg
                    .best
                    .steps
                    .iter()
                    .map(|s| {
                        Ok(StepDocument {
                            token: vocab.token(s.token)?.to_owned(),
                            logprob: round_sig(s.logprob),
                            penalty: round_sig(s.penalty),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SegmentDocument {
                    condition: seg.condition.to_string(),
                    tokens: vocab.decode_tokens(&seg.best.tokens)?,
                    raw_score: round_sig(seg.best.raw_score),
                    aug_score: round_sig(seg.best.aug_score),
                    steps,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StoryDocument {
            segments,
            story: vocab.decode_tokens(&self.story_tokens)?.join(" "),
        })
    }
}
