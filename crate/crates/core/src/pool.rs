use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::HardNegativePool;

/// Ordered candidate sentences for one concept set, optionally scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    #[serde(rename = "qid")]
    pub concept_set_id: usize,
    pub ids: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl CandidatePool {
    pub fn new(concept_set_id: usize, ids: Vec<usize>) -> Self {
        Self {
            concept_set_id,
            ids,
            scores: None,
        }
    }

    pub fn scored(concept_set_id: usize, entries: Vec<(usize, f64)>) -> Self {
        let (ids, scores) = entries.into_iter().unzip();
        Self {
            concept_set_id,
            ids,
            scores: Some(scores),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Checks no duplicate ids and, when present, one finite score per id.
    pub fn validate(&self) -> Result<()> {
        let mut seen = self.ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "pool {} has duplicate sentence ids",
                self.concept_set_id
            )));
        }
        if let Some(scores) = &self.scores {
            if scores.len() != self.ids.len() {
                return Err(Error::LengthMismatch {
                    left: self.ids.len(),
                    right: scores.len(),
                });
            }
            if scores.iter().any(|s| !s.is_finite()) {
                return Err(Error::invalid(format!(
                    "pool {} has non-finite scores",
                    self.concept_set_id
                )));
            }
        }
        Ok(())
    }
}

impl From<HardNegativePool> for CandidatePool {
    fn from(p: HardNegativePool) -> Self {
        Self::new(p.concept_set_id, p.sentence_ids)
    }
}

impl From<&CandidatePool> for HardNegativePool {
    fn from(p: &CandidatePool) -> Self {
        Self {
            concept_set_id: p.concept_set_id,
            sentence_ids: p.ids.clone(),
        }
    }
}
