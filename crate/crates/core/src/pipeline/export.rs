//! Generator input files. One line per (concept set, reference):
//!
//! ```text
//! <S> c1 … cm </S> <S> s1 </S> … <S> sk </S>\t<S> reference </S>
//! ```
//!
//! Concepts are in lexicographic order; retrieved sentences are raw corpus
//! text in pool order.

use std::fs;
use std::path::Path;

use crate::corpus::{Corpus, DatasetExample};
use crate::error::{Error, Result};
use crate::pool::CandidatePool;

const OPEN: &str = "<S>";
const CLOSE: &str = "</S>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorRecord {
    pub concepts: Vec<String>,
    pub sentences: Vec<String>,
    pub reference: String,
}

fn check_segment(text: &str) -> Result<()> {
    if text.contains(['\t', '\n', '\r']) || text.split_whitespace().any(|t| t == OPEN || t == CLOSE) {
        return Err(Error::invalid(format!("cannot serialise segment {text:?}")));
    }
    if text.trim().is_empty() || text.trim() != text {
        return Err(Error::invalid(format!("segment {text:?} is empty or padded")));
    }
    Ok(())
}

impl GeneratorRecord {
    pub fn source(&self) -> String {
        let mut out = format!("{OPEN} {} {CLOSE}", self.concepts.join(" "));
        for s in &self.sentences {
            out.push_str(&format!(" {OPEN} {s} {CLOSE}"));
        }
        out
    }

    pub fn target(&self) -> String {
        format!("{OPEN} {} {CLOSE}", self.reference)
    }

    pub fn to_line(&self) -> Result<String> {
        for c in &self.concepts {
            if c.split_whitespace().count() != 1 {
                return Err(Error::invalid(format!("concept {c:?} is not a single token")));
            }
        }
        check_segment(&self.concepts.join(" "))?;
        for s in &self.sentences {
            check_segment(s)?;
        }
        check_segment(&self.reference)?;
        Ok(format!("{}\t{}", self.source(), self.target()))
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let bad = |why: &str| Error::invalid(format!("generator line {line:?}: {why}"));
        let (source, target) = line.split_once('\t').ok_or_else(|| bad("no tab"))?;
        let mut segments = split_segments(source).ok_or_else(|| bad("malformed source"))?;
        let target = split_segments(target).ok_or_else(|| bad("malformed target"))?;
        if target.len() != 1 || segments.is_empty() {
            return Err(bad("wrong segment count"));
        }
        let concepts = segments.remove(0).split(' ').map(str::to_string).collect();
        Ok(Self {
            concepts,
            sentences: segments.into_iter().map(str::to_string).collect(),
            reference: target[0].to_string(),
        })
    }
}

/// `<S> a </S> <S> b </S>` → `["a", "b"]`.
fn split_segments(text: &str) -> Option<Vec<&str>> {
    let inner = text.strip_prefix("<S> ")?.strip_suffix(" </S>")?;
    Some(inner.split(" </S> <S> ").collect())
}

/// Records for every (example, reference) pair, reading the first `k`
/// entries of each example's pool.
pub fn generator_records(
    pools: &[CandidatePool],
    examples: &[DatasetExample],
    corpus: &Corpus,
    k: usize,
) -> Result<Vec<GeneratorRecord>> {
    if pools.len() != examples.len() {
        return Err(Error::LengthMismatch {
            left: pools.len(),
            right: examples.len(),
        });
    }
    let mut out = Vec::new();
    for (pool, ex) in pools.iter().zip(examples) {
        if pool.len() < k {
            return Err(Error::invalid(format!(
                "pool {} has {} entries, fewer than k = {k}",
                pool.concept_set_id,
                pool.len()
            )));
        }
        let sentences = pool.ids[..k]
            .iter()
            .map(|&id| {
                corpus
                    .get(id)
                    .map(|r| r.raw.clone())
                    .ok_or_else(|| Error::invalid(format!("sentence id {id} not in corpus")))
            })
            .collect::<Result<Vec<_>>>()?;
        for r in &ex.references {
            out.push(GeneratorRecord {
                concepts: ex.concept_set.tokens(),
                sentences: sentences.clone(),
                reference: r.raw.clone(),
            });
        }
    }
    Ok(out)
}

pub fn export_generator_file(
    path: impl AsRef<Path>,
    pools: &[CandidatePool],
    examples: &[DatasetExample],
    corpus: &Corpus,
    k: usize,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for rec in generator_records(pools, examples, corpus, k)? {
        out.push_str(&rec.to_line()?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_generator_file(text: &str) -> Result<Vec<GeneratorRecord>> {
    text.lines().map(GeneratorRecord::parse_line).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_corpus, ExclusionSet};
    use proptest::prelude::*;

    fn setup() -> (Corpus, Vec<DatasetExample>) {
        let corpus = filter_corpus(
            ["a dog runs in the park", "the cat sat on the mat", "two dogs run fast today"],
            &ExclusionSet::default(),
        );
        let ex = vec![
            DatasetExample::new(["run", "dog"], ["A dog is running.", "Dogs run around."]).unwrap(),
            DatasetExample::new(["mat", "cat"], ["The cat lies on a mat."]).unwrap(),
        ];
        (corpus, ex)
    }

    #[test]
    fn single_sentence_layout() {
        let (corpus, ex) = setup();
        let pools = vec![CandidatePool::new(0, vec![0, 2]), CandidatePool::new(1, vec![1])];
        let recs = generator_records(&pools, &ex, &corpus, 1).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].source(), "<S> dog run </S> <S> a dog runs in the park </S>");
        assert_eq!(
            recs[0].to_line().unwrap(),
            "<S> dog run </S> <S> a dog runs in the park </S>\t<S> A dog is running. </S>"
        );
        assert_eq!(recs[2].target(), "<S> The cat lies on a mat. </S>");
    }

    #[test]
    fn k_zero_and_short_pools() {
        let (corpus, ex) = setup();
        let pools = vec![CandidatePool::new(0, vec![0, 2]), CandidatePool::new(1, vec![1])];
        let recs = generator_records(&pools, &ex, &corpus, 0).unwrap();
        assert_eq!(recs[0].source(), "<S> dog run </S>");
        assert!(generator_records(&pools, &ex, &corpus, 2).is_err());
    }

    #[test]
    fn file_round_trip() {
        let (corpus, ex) = setup();
        let pools = vec![CandidatePool::new(0, vec![2, 0]), CandidatePool::new(1, vec![1, 0])];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.tsv");
        export_generator_file(&path, &pools, &ex, &corpus, 2).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        let parsed = parse_generator_file(&text).unwrap();
        assert_eq!(parsed, generator_records(&pools, &ex, &corpus, 2).unwrap());
    }

    #[test]
    fn unserialisable_text_is_rejected() {
        let rec = GeneratorRecord {
            concepts: vec!["a".into()],
            sentences: vec!["x </S> y".into()],
            reference: "r".into(),
        };
        assert!(rec.to_line().is_err());
        let rec = GeneratorRecord {
            sentences: vec!["x\ty".into()],
            ..rec
        };
        assert!(rec.to_line().is_err());
        assert!(GeneratorRecord::parse_line("<S> a </S>").is_err());
        assert!(GeneratorRecord::parse_line("<S> a </S>\t<S> b </S> <S> c </S>").is_err());
    }

    fn word() -> impl Strategy<Value = String> {
        "[a-z]{1,6}"
    }

    proptest! {
        #[test]
        fn parse_inverts_serialise(
            concepts in prop::collection::vec(word(), 1..5),
            sentences in prop::collection::vec(prop::collection::vec(word(), 1..8), 0..4),
            reference in prop::collection::vec(word(), 1..8),
        ) {
            let rec = GeneratorRecord {
                concepts,
                sentences: sentences.iter().map(|s| s.join(" ")).collect(),
                reference: reference.join(" "),
            };
            let line = rec.to_line().unwrap();
            prop_assert_eq!(GeneratorRecord::parse_line(&line).unwrap(), rec);
        }
    }
}
