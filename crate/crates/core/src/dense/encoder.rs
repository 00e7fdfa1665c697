//! Dual-encoder retriever: two independent mean-pool + affine + tanh towers
//! whose outputs are compared by dot product.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{tanh_in_place, Matrix, ParamSet};
use super::vocab::Vocab;
use crate::corpus::ConceptSet;
use crate::error::{Error, Result};

pub type EmbeddingVector = Vec<f64>;

/// Sizes of the reference encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Token embedding width.
    pub d_emb: usize,
    /// Output width of each dual-encoder tower.
    pub d: usize,
    /// Hidden width of the cross-encoder scorer.
    pub hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            d_emb: 64,
            d: 64,
            hidden: 128,
        }
    }
}

/// One tower: token embeddings, projection and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub embedding: Matrix,
    pub projection: Matrix,
    pub bias: Vec<f64>,
}

/// Intermediate values of one [`EncoderParams::forward`] call.
#[derive(Debug, Clone)]
pub struct EncodeCache {
    ids: Vec<u32>,
    pooled: Vec<f64>,
    pub output: EmbeddingVector,
}

impl EncoderParams {
    pub fn zeros(vocab_size: usize, d_emb: usize, d: usize) -> Self {
        Self {
            embedding: Matrix::zeros(vocab_size, d_emb),
            projection: Matrix::zeros(d_emb, d),
            bias: vec![0.0; d],
        }
    }

    pub fn init<R: Rng + ?Sized>(vocab_size: usize, d_emb: usize, d: usize, rng: &mut R) -> Self {
        let xavier = (6.0 / (d_emb + d) as f64).sqrt();
        Self {
            embedding: Matrix::uniform(vocab_size, d_emb, 0.5, rng),
            projection: Matrix::uniform(d_emb, d, xavier, rng),
            bias: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    pub fn forward(&self, ids: &[u32]) -> Result<EncodeCache> {
        if ids.is_empty() {
            return Err(Error::invalid("cannot encode an empty token sequence"));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.embedding.rows) {
            return Err(Error::invalid(format!("token id {bad} outside vocabulary")));
        }
        // Sorted so pooling is exactly order-invariant in floating point.
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        let pooled = self.embedding.mean_rows(&ids);
        let mut output = vec![0.0; self.dim()];
        self.projection.transpose_mul(&pooled, &mut output);
        for (o, b) in output.iter_mut().zip(&self.bias) {
            *o += b;
        }
        tanh_in_place(&mut output);
        Ok(EncodeCache {
            ids,
            pooled,
            output,
        })
    }

    pub fn encode(&self, ids: &[u32]) -> Result<EmbeddingVector> {
        self.forward(ids).map(|c| c.output)
    }

    /// Accumulate into `grad` the gradient given `d_output = ∂L/∂output`.
    pub fn backward(&self, cache: &EncodeCache, d_output: &[f64], grad: &mut EncoderParams) {
        let d_pre: Vec<f64> = cache
            .output
            .iter()
            .zip(d_output)
            .map(|(y, g)| g * (1.0 - y * y))
            .collect();
        grad.projection.add_outer(&cache.pooled, &d_pre);
        for (b, g) in grad.bias.iter_mut().zip(&d_pre) {
            *b += g;
        }
        let mut d_pooled = vec![0.0; self.projection.rows];
        self.projection.mul(&d_pre, &mut d_pooled);
        grad.embedding.scatter_mean_grad(&cache.ids, &d_pooled);
    }
}

impl ParamSet for EncoderParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.embedding.data, &self.projection.data, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.embedding.data, &mut self.projection.data, &mut self.bias]
    }
}

/// Concept tower and sentence tower with independent parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualEncoder {
    pub vocab: Vocab,
    pub concept: EncoderParams,
    pub sentence: EncoderParams,
}

impl DualEncoder {
    pub fn new<R: Rng + ?Sized>(vocab: Vocab, dims: ModelDims, rng: &mut R) -> Self {
        let v = vocab.len();
        let concept = EncoderParams::init(v, dims.d_emb, dims.d, rng);
        let sentence = EncoderParams::init(v, dims.d_emb, dims.d, rng);
        Self {
            vocab,
            concept,
            sentence,
        }
    }

    pub fn dim(&self) -> usize {
        self.sentence.dim()
    }

    /// Gradient buffer with the same shapes, all zero.
    pub fn zeros_like(&self) -> Self {
        let v = self.vocab.len();
        let d_emb = self.concept.embedding.cols;
        Self {
            vocab: self.vocab.clone(),
            concept: EncoderParams::zeros(v, d_emb, self.concept.dim()),
            sentence: EncoderParams::zeros(v, d_emb, self.sentence.dim()),
        }
    }

    pub fn encode_concepts(&self, concept_set: &ConceptSet) -> Result<EmbeddingVector> {
        self.concept.encode(&self.vocab.ids(&concept_set.tokens()))
    }

    pub fn encode_sentence<S: AsRef<str>>(&self, tokens: &[S]) -> Result<EmbeddingVector> {
        self.sentence.encode(&self.vocab.ids(tokens))
    }

    /// Retriever similarity of a concept set and a sentence.
    pub fn similarity<S: AsRef<str>>(&self, concept_set: &ConceptSet, tokens: &[S]) -> Result<f64> {
        dot_sim(&self.encode_concepts(concept_set)?, &self.encode_sentence(tokens)?)
    }
}

impl ParamSet for DualEncoder {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.concept.tensors();
        t.extend(self.sentence.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.concept.tensors_mut();
        t.extend(self.sentence.tensors_mut());
        t
    }
}

pub fn dot_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(u.iter().zip(v).map(|(a, b)| a * b).sum())
}
