use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DatasetExample};

pub const UNKNOWN_TOKEN: &str = "<unk>";
pub const UNKNOWN_ID: u32 = 0;

/// Token vocabulary with id 0 reserved for unknown tokens. Ids follow first
/// occurrence order, so the same inputs always give the same vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from(vec![UNKNOWN_TOKEN.to_string()])
    }
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Corpus tokens first, then concepts and reference tokens of `examples`.
    pub fn build<'a>(corpus: &Corpus, examples: impl IntoIterator<Item = &'a DatasetExample>) -> Self {
        let mut vocab = Self::default();
        for rec in corpus.records() {
            for t in &rec.tokens {
                vocab.insert(t);
            }
        }
        for ex in examples {
            for c in ex.concept_set.iter() {
                vocab.insert(c);
            }
            for r in &ex.references {
                for t in &r.tokens {
                    vocab.insert(t);
                }
            }
        }
        vocab
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len() as u32);
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNKNOWN_ID)
    }

    pub fn ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }
}
