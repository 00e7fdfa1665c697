use serde::{Deserialize, Serialize};

use crate::dense::ModelDims;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::sparse::DEFAULT_POOL_K;

/// Hyper-parameters shared by the three training procedures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    /// Minibatch size; for retriever warm-up this is also the number of
    /// candidates per query (one positive plus in-batch negatives).
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Candidate pool depth.
    pub k: usize,
    /// Candidates per training list: one positive plus `pool_size - 1` negatives.
    pub pool_size: usize,
    pub top_k_export: usize,
    pub distill_metric: Metric,
    pub dims: ModelDims,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            batch_size: 32,
            epochs: 20,
            patience: 2,
            seed: 0,
            k: DEFAULT_POOL_K,
            pool_size: 11,
            top_k_export: 2,
            distill_metric: Metric::Bleu4,
            dims: ModelDims::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if self.k == 0 || self.pool_size == 0 {
            return Err(Error::invalid("k and pool_size must be at least 1"));
        }
        if self.dims.d_emb == 0 || self.dims.d == 0 || self.dims.hidden == 0 {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        Ok(())
    }
}

/// Mix a base seed with tags into an independent stream seed (splitmix64).
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(seed), |acc, &t| mix(acc ^ mix(t)))
}

pub(crate) fn rng_for(seed: u64, tags: &[u64]) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}
