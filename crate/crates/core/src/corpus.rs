//! Corpus ingestion, tokenization and the concept-set dataset.
//!
//! The external corpus is a flat list of sentences, one per line. It is
//! length-filtered to 4..=20 tokens and scrubbed of every sentence that also
//! appears in the task dataset so a reference can never be retrieved verbatim.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Inclusive token-count bounds applied by [`filter_corpus`].
pub const MIN_SENTENCE_TOKENS: usize = 4;
pub const MAX_SENTENCE_TOKENS: usize = 20;

/// Lowercase, split on whitespace, trim non-alphanumeric characters from both
/// ends of every piece. Internal apostrophes (and any other internal
/// characters) survive, so `"don't"` stays one token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|piece| {
            let trimmed = piece.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceRecord {
    pub id: usize,
    pub raw: String,
    pub tokens: Vec<String>,
}

/// Filtered external corpus. Record `i` always has `id == i`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<SentenceRecord>,
}

impl Corpus {
    pub fn records(&self) -> &[SentenceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&SentenceRecord> {
        self.records.get(id)
    }

    pub fn raw_sentences(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.raw.as_str())
    }

    /// Read one raw sentence per line and apply [`filter_corpus`].
    pub fn from_file(path: impl AsRef<Path>, exclusion: &ExclusionSet) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(filter_corpus(text.lines(), exclusion))
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.raw);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Raw texts that must not appear in the corpus, compared after trimming and
/// lowercasing.
#[derive(Debug, Clone, Default)]
pub struct ExclusionSet {
    texts: HashSet<String>,
}

impl ExclusionSet {
    pub fn new<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            texts: texts.into_iter().map(|t| normalize_raw(t.as_ref())).collect(),
        }
    }

    /// Every reference sentence of every example.
    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a DatasetExample>) -> Self {
        Self::new(
            examples
                .into_iter()
                .flat_map(|ex| ex.references.iter().map(|r| r.raw.as_str())),
        )
    }

    pub fn contains(&self, raw: &str) -> bool {
        self.texts.contains(&normalize_raw(raw))
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

pub(crate) fn normalize_raw(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Keep sentences with 4..=20 tokens that are not excluded, in input order.
pub fn filter_corpus<I, S>(raw_sentences: I, exclusion: &ExclusionSet) -> Corpus
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut records = Vec::new();
    for raw in raw_sentences {
        let raw = raw.as_ref();
        let tokens = tokenize(raw);
        if !(MIN_SENTENCE_TOKENS..=MAX_SENTENCE_TOKENS).contains(&tokens.len()) {
            continue;
        }
        if exclusion.contains(raw) {
            continue;
        }
        records.push(SentenceRecord {
            id: records.len(),
            raw: raw.trim().to_string(),
            tokens,
        });
    }
    Corpus { records }
}

/// An unordered, duplicate-free set of lowercase concepts. Iteration order is
/// lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConceptSet {
    concepts: BTreeSet<String>,
}

impl ConceptSet {
    pub fn new<I, S>(concepts: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for c in concepts {
            let c = c.as_ref().trim().to_lowercase();
            if c.is_empty() {
                return Err(Error::invalid("empty concept"));
            }
            set.insert(c);
        }
        if set.is_empty() {
            return Err(Error::invalid("concept set must contain at least one concept"));
        }
        Ok(Self { concepts: set })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(String::as_str)
    }

    /// Concepts as an owned token sequence, sorted.
    pub fn tokens(&self) -> Vec<String> {
        self.concepts.iter().cloned().collect()
    }

    pub fn contains(&self, concept: &str) -> bool {
        self.concepts.contains(concept)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub raw: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetExample {
    pub concept_set: ConceptSet,
    pub references: Vec<Reference>,
}

impl DatasetExample {
    pub fn new<C, R>(concepts: C, references: R) -> Result<Self>
    where
        C: IntoIterator,
        C::Item: AsRef<str>,
        R: IntoIterator,
        R::Item: AsRef<str>,
    {
        let concept_set = ConceptSet::new(concepts)?;
        let mut refs = Vec::new();
        for raw in references {
            let raw = raw.as_ref().trim();
            let tokens = tokenize(raw);
            if tokens.is_empty() {
                return Err(Error::invalid(format!("reference {raw:?} has no tokens")));
            }
            refs.push(Reference {
                raw: raw.to_string(),
                tokens,
            });
        }
        if refs.is_empty() {
            return Err(Error::invalid("example must have at least one reference"));
        }
        Ok(Self {
            concept_set,
            references: refs,
        })
    }

    pub fn reference_tokens(&self) -> Vec<Vec<String>> {
        self.references.iter().map(|r| r.tokens.clone()).collect()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetLine {
    concepts: Vec<String>,
    references: Vec<String>,
}

/// Parse a JSONL dataset: one `{"concepts": [...], "references": [...]}` per
/// line. Blank lines are skipped; errors carry the 1-based line number.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetExample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text).map_err(|(line, message)| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    })
}

pub(crate) fn parse_dataset(text: &str) -> std::result::Result<Vec<DatasetExample>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DatasetLine =
            serde_json::from_str(line).map_err(|e| (line_no, e.to_string()))?;
        let ex = DatasetExample::new(&parsed.concepts, &parsed.references)
            .map_err(|e| (line_no, e.to_string()))?;
        out.push(ex);
    }
    Ok(out)
}

pub fn write_dataset(path: impl AsRef<Path>, examples: &[DatasetExample]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for ex in examples {
        let line = serde_json::json!({
            "concepts": ex.concept_set.tokens(),
            "references": ex.references.iter().map(|r| r.raw.as_str()).collect::<Vec<_>>(),
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
