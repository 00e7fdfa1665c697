//! Ranker training. The default objective distills the metric's quality
//! ordering with ListMLE; the contrastive objective (positive vs. everything
//! else, all negatives treated alike) is kept as the undistilled baseline.

use serde::{Deserialize, Serialize};

use super::config::{rng_for, TrainingConfig};
use super::data::{
    candidate_ids, encode_corpus, negative_only_lists, training_list, EncodedSplit, MetricCache, Split,
};
use super::eval::{recall_at_1, RankingExample};
use super::loss::{contrastive_loss, list_mle_loss};
use super::trainer::{epoch_order, fit, TrainReport};
use crate::corpus::Corpus;
use crate::dense::{CrossCache, CrossEncoder, ParamSet, Vocab};
use crate::error::{Error, Result};
use crate::metrics::Metric;

pub(crate) const STAGE_RANKER: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankerObjective {
    /// ListMLE against the metric ordering of the candidate list.
    ListMle,
    /// Softmax cross-entropy of the positive against all negatives.
    Contrastive,
}

pub fn initial_ranker(vocab: &Vocab, config: &TrainingConfig) -> CrossEncoder {
    CrossEncoder::new(vocab.clone(), config.dims, &mut rng_for(config.seed, &[STAGE_RANKER, 0x1417]))
}

/// Train a cross-encoder on lists of one positive plus `pool_size - 1`
/// negatives drawn from each example's candidate pool (resampled per epoch).
/// Validation is R@1 on negative-only lists where the metric-best negative
/// is the correct answer.
pub fn train_ranker(
    train: Split<'_>,
    valid: Split<'_>,
    corpus: &Corpus,
    vocab: &Vocab,
    metric: Metric,
    objective: RankerObjective,
    config: &TrainingConfig,
) -> Result<TrainReport<CrossEncoder>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("ranker training needs at least one example"));
    }
    for (i, pool) in train.pools.iter().enumerate() {
        if pool.len() + 1 < config.pool_size {
            return Err(Error::invalid(format!(
                "pool {i} has {} entries, fewer than pool_size - 1 = {}",
                pool.len(),
                config.pool_size - 1
            )));
        }
    }
    let corpus_ids = encode_corpus(vocab, corpus);
    let enc_train = EncodedSplit::new(vocab, &train);
    let enc_valid = EncodedSplit::new(vocab, &valid);
    let mut metric_cache = MetricCache::new(metric, train.examples, corpus);
    let valid_lists: Vec<RankingExample<usize, _>> = if valid.is_empty() {
        Vec::new()
    } else {
        negative_only_lists(&valid, corpus, config.pool_size, metric)?
            .into_iter()
            .map(|(query, candidates, correct)| RankingExample { query, candidates, correct })
            .collect()
    };

    let init = initial_ranker(vocab, config);
    let mut grad = init.zeros_like();

    let run_epoch = |model: &mut CrossEncoder, adam: &mut super::optim::Adam, epoch: usize| -> Result<f64> {
        let order = epoch_order(train.len(), config.seed, STAGE_RANKER, epoch);
        let mut rng = rng_for(config.seed, &[STAGE_RANKER, epoch as u64]);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.zero();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let cands = training_list(&train, i, corpus, config.pool_size, &mut rng)?;
                let caches: Vec<CrossCache> = cands
                    .iter()
                    .map(|&c| model.forward(&enc_train.concepts[i], candidate_ids(c, i, &enc_train, &corpus_ids)))
                    .collect::<Result<_>>()?;
                let z: Vec<f64> = caches.iter().map(|c| c.score).collect();
                let lg = match objective {
                    RankerObjective::ListMle => {
                        let ordering = metric_cache.ordering(i, &cands)?;
                        list_mle_loss(&z, ordering.order())?
                    }
                    RankerObjective::Contrastive => contrastive_loss(z[0], &z[1..]),
                };
                total += lg.loss;
                for (cache, g) in caches.iter().zip(&lg.grad) {
                    model.backward(cache, g * scale, &mut grad);
                }
            }
            adam.step(model, &grad);
        }
        Ok(total / train.len() as f64)
    };

    let validate = |model: &CrossEncoder, train_loss: f64| -> Result<f64> {
        if valid_lists.is_empty() {
            return Ok(-train_loss);
        }
        recall_at_1(&valid_lists, |&i, &c| {
            model.score_ids(&enc_valid.concepts[i], candidate_ids(c, i, &enc_valid, &corpus_ids))
        })
    };

    fit(init, config, run_epoch, validate)
}
