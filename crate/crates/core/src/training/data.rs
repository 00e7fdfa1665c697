//! Training inputs: dataset examples paired with their candidate pools, token
//! id caches and candidate-list construction.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;

use crate::corpus::{normalize_raw, Corpus, DatasetExample};
use crate::dense::Vocab;
use crate::error::{Error, Result};
use crate::metrics::{Metric, QualityOrdering};
use crate::pool::CandidatePool;

/// Examples and the pool for each, aligned by position.
#[derive(Debug, Clone, Copy)]
pub struct Split<'a> {
    pub examples: &'a [DatasetExample],
    pub pools: &'a [CandidatePool],
}

impl<'a> Split<'a> {
    pub fn new(examples: &'a [DatasetExample], pools: &'a [CandidatePool]) -> Result<Self> {
        if examples.len() != pools.len() {
            return Err(Error::LengthMismatch {
                left: examples.len(),
                right: pools.len(),
            });
        }
        Ok(Self { examples, pools })
    }

    pub fn empty() -> Self {
        Self {
            examples: &[],
            pools: &[],
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// One candidate in a training list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Candidate {
    /// Reference `r` of the example.
    Reference(usize),
    /// Corpus sentence id.
    Sentence(usize),
}

/// Token ids of a split under one vocabulary.
pub(crate) struct EncodedSplit {
    pub concepts: Vec<Vec<u32>>,
    pub references: Vec<Vec<Vec<u32>>>,
}

impl EncodedSplit {
    pub fn new(vocab: &Vocab, split: &Split<'_>) -> Self {
        Self {
            concepts: split
                .examples
                .iter()
                .map(|e| vocab.ids(&e.concept_set.tokens()))
                .collect(),
            references: split
                .examples
                .iter()
                .map(|e| e.references.iter().map(|r| vocab.ids(&r.tokens)).collect())
                .collect(),
        }
    }
}

pub(crate) fn encode_corpus(vocab: &Vocab, corpus: &Corpus) -> Vec<Vec<u32>> {
    corpus.records().iter().map(|r| vocab.ids(&r.tokens)).collect()
}

pub(crate) fn candidate_ids<'a>(
    cand: Candidate,
    example: usize,
    encoded: &'a EncodedSplit,
    corpus_ids: &'a [Vec<u32>],
) -> &'a [u32] {
    match cand {
        Candidate::Reference(r) => &encoded.references[example][r],
        Candidate::Sentence(id) => &corpus_ids[id],
    }
}

/// Pool entries usable as negatives: present in the corpus and not textually
/// equal to any reference of the example.
pub(crate) fn eligible_negatives(pool: &CandidatePool, example: &DatasetExample, corpus: &Corpus) -> Vec<usize> {
    let refs: Vec<String> = example.references.iter().map(|r| normalize_raw(&r.raw)).collect();
    pool.ids
        .iter()
        .copied()
        .filter(|&id| {
            corpus
                .get(id)
                .is_some_and(|rec| !refs.contains(&normalize_raw(&rec.raw)))
        })
        .collect()
}

/// Draw `count` distinct negatives from the pool, returned in pool order.
pub(crate) fn sample_negatives<R: Rng + ?Sized>(
    pool: &CandidatePool,
    example: &DatasetExample,
    corpus: &Corpus,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let eligible = eligible_negatives(pool, example, corpus);
    if eligible.len() < count {
        return Err(Error::invalid(format!(
            "pool {} has {} usable negatives, {} required",
            pool.concept_set_id,
            eligible.len(),
            count
        )));
    }
    let mut picked = sample(rng, eligible.len(), count).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| eligible[i]).collect())
}

/// Memoised metric scores of candidates against an example's references.
pub(crate) struct MetricCache<'a> {
    metric: Metric,
    examples: &'a [DatasetExample],
    corpus: &'a Corpus,
    scores: HashMap<(usize, Candidate), f64>,
}

impl<'a> MetricCache<'a> {
    pub fn new(metric: Metric, examples: &'a [DatasetExample], corpus: &'a Corpus) -> Self {
        Self {
            metric,
            examples,
            corpus,
            scores: HashMap::new(),
        }
    }

    pub fn score(&mut self, example: usize, cand: Candidate) -> Result<f64> {
        if let Some(&s) = self.scores.get(&(example, cand)) {
            return Ok(s);
        }
        let ex = &self.examples[example];
        let refs = ex.reference_tokens();
        let tokens = match cand {
            Candidate::Reference(r) => &ex.references[r].tokens,
            Candidate::Sentence(id) => {
                &self
                    .corpus
                    .get(id)
                    .ok_or_else(|| Error::invalid(format!("sentence id {id} not in corpus")))?
                    .tokens
            }
        };
        let s = self.metric.score(tokens, &refs)?.value();
        self.scores.insert((example, cand), s);
        Ok(s)
    }

    pub fn ordering(&mut self, example: usize, cands: &[Candidate]) -> Result<QualityOrdering> {
        let scores = cands
            .iter()
            .map(|&c| self.score(example, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(QualityOrdering::from_scores(scores))
    }
}

/// Positive-plus-negatives training list: the positive first.
pub(crate) fn training_list<R: Rng + ?Sized>(
    split: &Split<'_>,
    example: usize,
    corpus: &Corpus,
    pool_size: usize,
    rng: &mut R,
) -> Result<Vec<Candidate>> {
    let ex = &split.examples[example];
    let positive = rng.gen_range(0..ex.references.len());
    let negs = sample_negatives(&split.pools[example], ex, corpus, pool_size - 1, rng)?;
    let mut cands = Vec::with_capacity(pool_size);
    cands.push(Candidate::Reference(positive));
    cands.extend(negs.into_iter().map(Candidate::Sentence));
    Ok(cands)
}

/// Negative-only validation lists: the first `pool_size - 1` usable pool
/// entries, with the metric-best one as the correct answer. Lists whose best
/// score is tied are skipped.
pub(crate) fn negative_only_lists(
    split: &Split<'_>,
    corpus: &Corpus,
    pool_size: usize,
    metric: Metric,
) -> Result<Vec<(usize, Vec<Candidate>, usize)>> {
    let mut cache = MetricCache::new(metric, split.examples, corpus);
    let n = pool_size.saturating_sub(1).max(1);
    let mut out = Vec::with_capacity(split.len());
    for (i, ex) in split.examples.iter().enumerate() {
        let negs: Vec<Candidate> = eligible_negatives(&split.pools[i], ex, corpus)
            .into_iter()
            .take(n)
            .map(Candidate::Sentence)
            .collect();
        if negs.is_empty() {
            return Err(Error::invalid(format!("validation pool {i} has no usable negatives")));
        }
        let ordering = cache.ordering(i, &negs)?;
        let (order, scores) = (ordering.order(), ordering.scores());
        // a tie for best leaves no single correct answer
        if order.len() > 1 && scores[order[0]] <= scores[order[1]] {
            continue;
        }
        out.push((i, negs, order[0]));
    }
    Ok(out)
}

/// Warm-up validation lists: the first reference plus the first
/// `pool_size - 1` usable pool entries; the positive sits at position
/// `i mod len` so a constant scorer cannot win through the tie rule.
pub(crate) fn positive_included_lists(
    split: &Split<'_>,
    corpus: &Corpus,
    pool_size: usize,
) -> Result<Vec<(usize, Vec<Candidate>, usize)>> {
    let mut out = Vec::with_capacity(split.len());
    for (i, ex) in split.examples.iter().enumerate() {
        let mut cands: Vec<Candidate> = eligible_negatives(&split.pools[i], ex, corpus)
            .into_iter()
            .take(pool_size.saturating_sub(1))
            .map(Candidate::Sentence)
            .collect();
        let pos = i % (cands.len() + 1);
        cands.insert(pos, Candidate::Reference(0));
        out.push((i, cands, pos));
    }
    Ok(out)
}
