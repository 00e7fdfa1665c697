//! Sparse retrievers that build hard-negative pools: TF-IDF cosine and
//! concept matching.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_raw, tokenize, ConceptSet, Corpus};
use crate::error::{Error, Result};

/// Default pool size.
pub const DEFAULT_POOL_K: usize = 100;

/// Suffixes accepted when matching an inflected corpus token to a concept.
const INFLECTION_SUFFIXES: [&str; 5] = ["s", "es", "ed", "d", "ing"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardNegativePool {
    #[serde(rename = "qid")]
    pub concept_set_id: usize,
    #[serde(rename = "ids")]
    pub sentence_ids: Vec<usize>,
}

impl HardNegativePool {
    pub fn len(&self) -> usize {
        self.sentence_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence_ids.is_empty()
    }
}

/// Which sparse retriever builds the pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardNegativeSource {
    Tfidf,
    #[default]
    ConceptMatch,
}

impl HardNegativeSource {
    pub fn name(self) -> &'static str {
        match self {
            HardNegativeSource::Tfidf => "tfidf",
            HardNegativeSource::ConceptMatch => "concept_match",
        }
    }
}

impl std::str::FromStr for HardNegativeSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(Self::Tfidf),
            "concept_match" => Ok(Self::ConceptMatch),
            other => Err(Error::invalid(format!("unknown hard-negative source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TfIdfModel {
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
    /// Per document, `(column, weight)` sorted by column; unit norm or empty.
    doc_vectors: Vec<Vec<(usize, f64)>>,
    /// Column -> `(doc, weight)` for every nonzero weight.
    postings: Vec<Vec<(usize, f64)>>,
}

impl TfIdfModel {
    pub fn build(corpus: &Corpus) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::invalid("cannot build tf-idf over an empty corpus"));
        }
        let mut vocabulary: HashMap<String, usize> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        let mut term_counts: Vec<Vec<(usize, usize)>> = Vec::with_capacity(corpus.len());

        for rec in corpus.records() {
            let mut counts: HashMap<usize, usize> = HashMap::new();
            for tok in &rec.tokens {
                let next = vocabulary.len();
                let col = *vocabulary.entry(tok.clone()).or_insert(next);
                if col == df.len() {
                    df.push(0);
                }
                *counts.entry(col).or_insert(0) += 1;
            }
            for &col in counts.keys() {
                df[col] += 1;
            }
            let mut counts: Vec<_> = counts.into_iter().collect();
            counts.sort_unstable();
            term_counts.push(counts);
        }

        let n = corpus.len() as f64;
        let idf: Vec<f64> = df.iter().map(|&d| (n / d as f64).ln()).collect();
        let mut postings = vec![Vec::new(); idf.len()];
        let mut doc_vectors = Vec::with_capacity(term_counts.len());
        for (doc, counts) in term_counts.into_iter().enumerate() {
            let mut weights: Vec<(usize, f64)> = counts
                .into_iter()
                .map(|(col, tf)| (col, tf as f64 * idf[col]))
                .filter(|&(_, w)| w > 0.0)
                .collect();
            let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, w) in &mut weights {
                    *w /= norm;
                }
            }
            for &(col, w) in &weights {
                postings[col].push((doc, w));
            }
            doc_vectors.push(weights);
        }

        Ok(Self {
            vocabulary,
            idf,
            doc_vectors,
            postings,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.doc_vectors.len()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.vocabulary.get(token).map(|&c| self.idf[c])
    }

    pub fn doc_vector(&self, doc: usize) -> &[(usize, f64)] {
        &self.doc_vectors[doc]
    }

    /// L2-normalised tf-idf query vector for a concept set.
    pub fn query_vector(&self, concept_set: &ConceptSet) -> Vec<(usize, f64)> {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for concept in concept_set.iter() {
            for tok in tokenize(concept) {
                if let Some(&col) = self.vocabulary.get(&tok) {
                    *counts.entry(col).or_insert(0) += 1;
                }
            }
        }
        let mut q: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(col, tf)| (col, tf as f64 * self.idf[col]))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        q.sort_unstable_by_key(|&(c, _)| c);
        let norm = q.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut q {
                *w /= norm;
            }
        }
        q
    }

    /// Cosine scores of every document against the concept set.
    pub fn scores(&self, concept_set: &ConceptSet) -> Vec<f64> {
        let mut scores = vec![0.0; self.num_docs()];
        for (col, qw) in self.query_vector(concept_set) {
            for &(doc, dw) in &self.postings[col] {
                scores[doc] += qw * dw;
            }
        }
        scores
    }

    /// Top-`k` documents by cosine, ties by ascending id.
    pub fn retrieve(&self, concept_set_id: usize, concept_set: &ConceptSet, k: usize) -> Result<HardNegativePool> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let scores = self.scores(concept_set);
        let mut ids: Vec<usize> = (0..scores.len()).collect();
        ids.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        ids.truncate(k);
        Ok(HardNegativePool {
            concept_set_id,
            sentence_ids: ids,
        })
    }
}

/// True when `token` is `concept` or `concept` plus one inflection suffix.
pub fn matches_concept(token: &str, concept: &str) -> bool {
    if token == concept {
        return true;
    }
    token
        .strip_prefix(concept)
        .is_some_and(|rest| INFLECTION_SUFFIXES.contains(&rest))
}

/// Number of concepts matched by at least one token.
pub fn concept_match_count<S: AsRef<str>>(tokens: &[S], concept_set: &ConceptSet) -> usize {
    concept_set
        .iter()
        .filter(|c| tokens.iter().any(|t| matches_concept(t.as_ref(), c)))
        .count()
}

/// Rank sentences by matched-concept count (descending), then by length
/// (ascending), then by id.
pub fn concept_match_retrieve(
    corpus: &Corpus,
    concept_set_id: usize,
    concept_set: &ConceptSet,
    k: usize,
) -> Result<HardNegativePool> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut keyed: Vec<(usize, usize, usize)> = corpus
        .records()
        .iter()
        .map(|r| (concept_match_count(&r.tokens, concept_set), r.tokens.len(), r.id))
        .collect();
    keyed.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(HardNegativePool {
        concept_set_id,
        sentence_ids: keyed.into_iter().take(k).map(|(_, _, id)| id).collect(),
    })
}

/// Uniformly pick a pool entry whose raw text differs from the positive.
pub fn sample_hard_negative<R: Rng + ?Sized>(
    pool: &HardNegativePool,
    corpus: &Corpus,
    positive_raw: &str,
    rng: &mut R,
) -> Result<usize> {
    if pool.is_empty() {
        return Err(Error::invalid("empty hard-negative pool"));
    }
    let positive = normalize_raw(positive_raw);
    let eligible: Vec<usize> = pool
        .sentence_ids
        .iter()
        .copied()
        .filter(|&id| {
            corpus
                .get(id)
                .is_some_and(|r| normalize_raw(&r.raw) != positive)
        })
        .collect();
    if eligible.is_empty() {
        return Err(Error::invalid(format!(
            "pool for concept set {} contains only the positive",
            pool.concept_set_id
        )));
    }
    Ok(eligible[rng.gen_range(0..eligible.len())])
}

/// Pools for every concept set, in input order.
pub fn build_pools(
    source: HardNegativeSource,
    corpus: &Corpus,
    concept_sets: &[&ConceptSet],
    k: usize,
) -> Result<Vec<HardNegativePool>> {
    match source {
        HardNegativeSource::Tfidf => {
            let model = TfIdfModel::build(corpus)?;
            concept_sets
                .iter()
                .enumerate()
                .map(|(i, c)| model.retrieve(i, c, k))
                .collect()
        }
        HardNegativeSource::ConceptMatch => concept_sets
            .iter()
            .enumerate()
            .map(|(i, c)| concept_match_retrieve(corpus, i, c, k))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_corpus, ExclusionSet};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus(lines: &[&str]) -> Corpus {
        // Pad with a filler so sentences pass the 4-token filter.
        let padded: Vec<String> = lines.iter().map(|l| format!("{l} zz zz zz")).collect();
        let c = filter_corpus(&padded, &ExclusionSet::default());
        assert_eq!(c.len(), lines.len());
        c
    }

    fn cs(words: &[&str]) -> ConceptSet {
        ConceptSet::new(words).unwrap()
    }

    #[test]
    fn idf_direct_formula() {
        let c = corpus(&["a b", "a c"]);
        let m = TfIdfModel::build(&c).unwrap();
        assert_eq!(m.idf("a").unwrap(), 0.0);
        assert_eq!(m.idf("zz").unwrap(), 0.0);
        assert_abs_diff_eq!(m.idf("b").unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.idf("c").unwrap(), 2f64.ln(), epsilon = 1e-15);
        for d in 0..2 {
            let norm: f64 = m.doc_vector(d).iter().map(|(_, w)| w * w).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
        let pool = m.retrieve(0, &cs(&["b"]), 2).unwrap();
        assert_eq!(pool.sentence_ids, vec![0, 1]);
        let pool = m.retrieve(0, &cs(&["c"]), 1).unwrap();
        assert_eq!(pool.sentence_ids, vec![1]);
    }

    #[test]
    fn single_document_is_all_zero() {
        let c = corpus(&["a b"]);
        let m = TfIdfModel::build(&c).unwrap();
        assert!(m.doc_vector(0).is_empty());
        assert!(TfIdfModel::build(&Corpus::default()).is_err());
    }

    #[test]
    fn out_of_vocabulary_query_uses_tie_rule() {
        let c = corpus(&["a b", "c d", "e f", "g h"]);
        let m = TfIdfModel::build(&c).unwrap();
        let pool = m.retrieve(3, &cs(&["nothing"]), 3).unwrap();
        assert_eq!(pool.sentence_ids, vec![0, 1, 2]);
        assert_eq!(pool.concept_set_id, 3);
    }

    #[test]
    fn inflection_rule() {
        assert!(matches_concept("run", "run"));
        assert!(matches_concept("runs", "run"));
        assert!(matches_concept("boxes", "box"));
        assert!(matches_concept("walked", "walk"));
        assert!(matches_concept("danced", "dance"));
        assert!(matches_concept("jumping", "jump"));
        assert!(!matches_concept("runner", "run"));
        assert!(!matches_concept("ru", "run"));
    }

    #[test]
    fn concept_match_ordering() {
        let c = filter_corpus(
            ["a dog sleeps here", "a dog runs in the park", "nothing in here at all"],
            &ExclusionSet::default(),
        );
        let pool = concept_match_retrieve(&c, 0, &cs(&["dog", "run"]), 3).unwrap();
        assert_eq!(pool.sentence_ids, vec![1, 0, 2]);
    }

    #[test]
    fn concept_match_ties_by_length_then_id() {
        let c = filter_corpus(
            ["x y z dog long one", "p q r dog", "s t u dog"],
            &ExclusionSet::default(),
        );
        let pool = concept_match_retrieve(&c, 0, &cs(&["dog"]), 10).unwrap();
        assert_eq!(pool.sentence_ids, vec![1, 2, 0]);
    }

    #[test]
    fn sampling_rules() {
        let c = corpus(&["the positive", "other one"]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let single = HardNegativePool { concept_set_id: 0, sentence_ids: vec![1] };
        assert_eq!(sample_hard_negative(&single, &c, "unrelated", &mut rng).unwrap(), 1);

        let both = HardNegativePool { concept_set_id: 0, sentence_ids: vec![0, 1] };
        let positive = c.get(0).unwrap().raw.clone();
        for _ in 0..50 {
            assert_eq!(sample_hard_negative(&both, &c, &positive, &mut rng).unwrap(), 1);
        }
        let only_pos = HardNegativePool { concept_set_id: 0, sentence_ids: vec![0] };
        assert!(sample_hard_negative(&only_pos, &c, &positive, &mut rng).is_err());

        let big = HardNegativePool { concept_set_id: 0, sentence_ids: vec![0, 1] };
        let a = sample_hard_negative(&big, &c, "x", &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_hard_negative(&big, &c, "x", &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_is_uniform() {
        let lines: Vec<String> = (0..5).map(|i| format!("sentence {i}")).collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let c = corpus(&refs);
        let pool = HardNegativePool { concept_set_id: 0, sentence_ids: (0..5).collect() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 10_000usize;
        let mut counts = [0usize; 5];
        for _ in 0..draws {
            counts[sample_hard_negative(&pool, &c, "none", &mut rng).unwrap()] += 1;
        }
        let p = 0.2;
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for &n in &counts {
            assert!((n as f64 - mean).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn pool_sizes_are_bounded() {
        let c = corpus(&["a b", "c d", "e f"]);
        let sets = [cs(&["a"]), cs(&["q"])];
        let refs: Vec<&ConceptSet> = sets.iter().collect();
        for source in [HardNegativeSource::Tfidf, HardNegativeSource::ConceptMatch] {
            for k in [1, 2, 3, 10] {
                for pool in build_pools(source, &c, &refs, k).unwrap() {
                    assert_eq!(pool.len(), k.min(c.len()));
                    let mut ids = pool.sentence_ids.clone();
                    ids.sort_unstable();
                    ids.dedup();
                    assert_eq!(ids.len(), pool.len());
                }
            }
        }
    }

    #[test]
    fn pool_jsonl_shape() {
        let pool = HardNegativePool { concept_set_id: 4, sentence_ids: vec![3, 1] };
        assert_eq!(serde_json::to_string(&pool).unwrap(), r#"{"qid":4,"ids":[3,1]}"#);
    }
}
