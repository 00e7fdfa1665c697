use crate::corpus::{Corpus, DatasetExample};
use crate::dense::{index_corpus, CrossEncoder, DualEncoder, FlatIpIndex};
use crate::error::Result;
use crate::pool::CandidatePool;
use crate::sparse::{build_pools, HardNegativeSource};

/// Sparse hard-negative pools for every example, as candidate pools.
pub fn hard_negative_pools(
    source: HardNegativeSource,
    corpus: &Corpus,
    examples: &[DatasetExample],
    k: usize,
) -> Result<Vec<CandidatePool>> {
    let sets: Vec<_> = examples.iter().map(|e| &e.concept_set).collect();
    Ok(build_pools(source, corpus, &sets, k)?
        .into_iter()
        .map(CandidatePool::from)
        .collect())
}

/// Index the corpus with the retriever's sentence tower.
pub fn build_index(retriever: &DualEncoder, corpus: &Corpus) -> Result<FlatIpIndex> {
    index_corpus(retriever, corpus)
}

/// Top-`k` pools from a prebuilt index.
pub fn retrieve_with_index(
    retriever: &DualEncoder,
    index: &FlatIpIndex,
    examples: &[DatasetExample],
    k: usize,
) -> Result<Vec<CandidatePool>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let q: Vec<f32> = retriever
                .encode_concepts(&ex.concept_set)?
                .into_iter()
                .map(|v| v as f32)
                .collect();
            Ok(CandidatePool::scored(i, index.search(&q, k)?))
        })
        .collect()
}

/// Index the corpus and retrieve top-`k` pools for every example.
pub fn retrieve_pools(
    retriever: &DualEncoder,
    corpus: &Corpus,
    examples: &[DatasetExample],
    k: usize,
) -> Result<Vec<CandidatePool>> {
    let index = build_index(retriever, corpus)?;
    retrieve_with_index(retriever, &index, examples, k)
}

/// Rerank every pool with the ranker.
pub fn rerank_pools(
    ranker: &CrossEncoder,
    examples: &[DatasetExample],
    pools: &[CandidatePool],
    corpus: &Corpus,
) -> Result<Vec<CandidatePool>> {
    examples
        .iter()
        .zip(pools)
        .map(|(ex, pool)| ranker.rerank(&ex.concept_set, pool, corpus))
        .collect()
}
