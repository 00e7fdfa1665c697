//! Cross-encoder ranker. Concept set and sentence are pooled with a shared
//! embedding table and scored jointly through interaction features
//! `[a; b; a∘b; |a−b|]` and a one-hidden-layer tanh network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::ModelDims;
use super::params::{tanh_in_place, Matrix, ParamSet};
use super::vocab::Vocab;
use crate::corpus::{ConceptSet, Corpus};
use crate::error::{Error, Result};
use crate::pool::CandidatePool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossEncoder {
    pub vocab: Vocab,
    pub embedding: Matrix,
    /// `4·d_emb × hidden`.
    pub hidden_weight: Matrix,
    pub hidden_bias: Vec<f64>,
    pub output_weight: Vec<f64>,
    pub output_bias: f64,
}

#[derive(Debug, Clone)]
pub struct CrossCache {
    concept_ids: Vec<u32>,
    sentence_ids: Vec<u32>,
    a: Vec<f64>,
    b: Vec<f64>,
    features: Vec<f64>,
    hidden: Vec<f64>,
    pub score: f64,
}

impl CrossEncoder {
    pub fn new<R: Rng + ?Sized>(vocab: Vocab, dims: ModelDims, rng: &mut R) -> Self {
        let in_dim = 4 * dims.d_emb;
        let h = dims.hidden;
        let embedding = Matrix::uniform(vocab.len(), dims.d_emb, 0.5, rng);
        let hidden_weight = Matrix::uniform(in_dim, h, (6.0 / (in_dim + h) as f64).sqrt(), rng);
        let out_scale = (6.0 / (h + 1) as f64).sqrt();
        let output_weight = (0..h).map(|_| rng.gen_range(-out_scale..=out_scale)).collect();
        Self {
            vocab,
            embedding,
            hidden_weight,
            hidden_bias: vec![0.0; h],
            output_weight,
            output_bias: 0.0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            vocab: self.vocab.clone(),
            embedding: Matrix::zeros(self.embedding.rows, self.embedding.cols),
            hidden_weight: Matrix::zeros(self.hidden_weight.rows, self.hidden_weight.cols),
            hidden_bias: vec![0.0; self.hidden_bias.len()],
            output_weight: vec![0.0; self.output_weight.len()],
            output_bias: 0.0,
        }
    }

    fn check_ids(&self, ids: &[u32], what: &str) -> Result<Vec<u32>> {
        if ids.is_empty() {
            return Err(Error::invalid(format!("empty {what} token sequence")));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.embedding.rows) {
            return Err(Error::invalid(format!("token id {bad} outside vocabulary")));
        }
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        Ok(ids)
    }

    pub fn forward(&self, concept_ids: &[u32], sentence_ids: &[u32]) -> Result<CrossCache> {
        let concept_ids = self.check_ids(concept_ids, "concept")?;
        let sentence_ids = self.check_ids(sentence_ids, "sentence")?;
        let a = self.embedding.mean_rows(&concept_ids);
        let b = self.embedding.mean_rows(&sentence_ids);
        let mut features = Vec::with_capacity(4 * a.len());
        features.extend_from_slice(&a);
        features.extend_from_slice(&b);
        features.extend(a.iter().zip(&b).map(|(x, y)| x * y));
        features.extend(a.iter().zip(&b).map(|(x, y)| (x - y).abs()));

        let mut hidden = vec![0.0; self.hidden_bias.len()];
        self.hidden_weight.transpose_mul(&features, &mut hidden);
        for (h, bias) in hidden.iter_mut().zip(&self.hidden_bias) {
            *h += bias;
        }
        tanh_in_place(&mut hidden);
        let score = self
            .output_weight
            .iter()
            .zip(&hidden)
            .map(|(w, h)| w * h)
            .sum::<f64>()
            + self.output_bias;
        Ok(CrossCache {
            concept_ids,
            sentence_ids,
            a,
            b,
            features,
            hidden,
            score,
        })
    }

    pub fn score_ids(&self, concept_ids: &[u32], sentence_ids: &[u32]) -> Result<f64> {
        self.forward(concept_ids, sentence_ids).map(|c| c.score)
    }

    /// Ranker similarity of a concept set and a tokenized sentence.
    pub fn score<S: AsRef<str>>(&self, concept_set: &ConceptSet, sentence: &[S]) -> Result<f64> {
        self.score_ids(&self.vocab.ids(&concept_set.tokens()), &self.vocab.ids(sentence))
    }

    /// Accumulate into `grad` the parameter gradient scaled by `d_score`.
    pub fn backward(&self, cache: &CrossCache, d_score: f64, grad: &mut CrossEncoder) {
        let de = cache.a.len();
        grad.output_bias += d_score;
        let mut d_pre = Vec::with_capacity(cache.hidden.len());
        for ((gw, &w), &h) in grad
            .output_weight
            .iter_mut()
            .zip(&self.output_weight)
            .zip(&cache.hidden)
        {
            *gw += d_score * h;
            d_pre.push(d_score * w * (1.0 - h * h));
        }
        for (gb, d) in grad.hidden_bias.iter_mut().zip(&d_pre) {
            *gb += d;
        }
        grad.hidden_weight.add_outer(&cache.features, &d_pre);

        let mut d_feat = vec![0.0; cache.features.len()];
        self.hidden_weight.mul(&d_pre, &mut d_feat);
        let mut da = d_feat[..de].to_vec();
        let mut db = d_feat[de..2 * de].to_vec();
        for k in 0..de {
            let prod = d_feat[2 * de + k];
            da[k] += prod * cache.b[k];
            db[k] += prod * cache.a[k];
            let diff = cache.a[k] - cache.b[k];
            let sign = if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                -1.0
            } else {
                0.0
            };
            da[k] += d_feat[3 * de + k] * sign;
            db[k] -= d_feat[3 * de + k] * sign;
        }
        grad.embedding.scatter_mean_grad(&cache.concept_ids, &da);
        grad.embedding.scatter_mean_grad(&cache.sentence_ids, &db);
    }

    /// Reorder `pool` by descending ranker score, ties keep pool order.
    pub fn rerank(&self, concept_set: &ConceptSet, pool: &CandidatePool, corpus: &Corpus) -> Result<CandidatePool> {
        let concept_ids = self.vocab.ids(&concept_set.tokens());
        let mut entries = Vec::with_capacity(pool.len());
        for &id in &pool.ids {
            let rec = corpus
                .get(id)
                .ok_or_else(|| Error::invalid(format!("sentence id {id} not in corpus")))?;
            entries.push((id, self.score_ids(&concept_ids, &self.vocab.ids(&rec.tokens))?));
        }
        Ok(CandidatePool::scored(pool.concept_set_id, sort_desc_stable(entries)))
    }
}

/// Sort `(id, score)` by descending score, preserving input order on ties.
pub(crate) fn sort_desc_stable(mut entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1));
    entries
}

impl ParamSet for CrossEncoder {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            &self.embedding.data,
            &self.hidden_weight.data,
            &self.hidden_bias,
            &self.output_weight,
            std::slice::from_ref(&self.output_bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.embedding.data,
            &mut self.hidden_weight.data,
            &mut self.hidden_bias,
            &mut self.output_weight,
            std::slice::from_mut(&mut self.output_bias),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_corpus, ExclusionSet};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(vocab: Vocab) -> CrossEncoder {
        let dims = ModelDims { d_emb: 6, d: 4, hidden: 5 };
        CrossEncoder::new(vocab, dims, &mut ChaCha8Rng::seed_from_u64(9))
    }

    fn vocab() -> Vocab {
        Vocab::from(["<unk>", "a", "b", "c", "d", "e"].map(String::from).to_vec())
    }

    #[test]
    fn zero_output_layer_scores_zero() {
        let mut m = model(vocab());
        m.output_weight.iter_mut().for_each(|w| *w = 0.0);
        assert_eq!(m.score_ids(&[1, 2], &[3, 4, 5]).unwrap(), 0.0);
        assert_eq!(m.score_ids(&[5], &[1]).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_and_validated() {
        let m = model(vocab());
        let s1 = m.score_ids(&[1, 2], &[3, 4]).unwrap();
        let s2 = m.score_ids(&[1, 2], &[3, 4]).unwrap();
        assert_eq!(s1.to_bits(), s2.to_bits());
        assert!(m.score_ids(&[], &[1]).is_err());
        assert!(m.score_ids(&[1], &[]).is_err());
    }

    #[test]
    fn rerank_orders_and_ties() {
        let corpus = filter_corpus(["a a a a", "b b b b", "c c c c"], &ExclusionSet::default());
        let cs = ConceptSet::new(["a"]).unwrap();
        let m = model(vocab());
        let pool = CandidatePool::new(0, vec![0, 1, 2]);
        let out = m.rerank(&cs, &pool, &corpus).unwrap();
        let scores = out.scores.clone().unwrap();
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
        let mut ids = out.ids.clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2]);

        let mut flat = m.clone();
        flat.output_weight.iter_mut().for_each(|w| *w = 0.0);
        let out = flat.rerank(&cs, &CandidatePool::new(0, vec![2, 0, 1]), &corpus).unwrap();
        assert_eq!(out.ids, vec![2, 0, 1]);

        let single = m.rerank(&cs, &CandidatePool::new(0, vec![1]), &corpus).unwrap();
        assert_eq!(single.ids, vec![1]);
    }

    #[test]
    fn stable_sort_helper() {
        assert_eq!(
            sort_desc_stable(vec![(0, 0.2), (1, 0.9)]).iter().map(|e| e.0).collect::<Vec<_>>(),
            vec![1, 0]
        );
    }
}
