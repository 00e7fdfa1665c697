//! Second-stage retriever training: distill either the trained ranker's
//! score distribution (KL) or the metric ordering directly (ListMLE).

use super::config::{rng_for, TrainingConfig};
use super::data::{
    candidate_ids, encode_corpus, negative_only_lists, training_list, Candidate, EncodedSplit, MetricCache, Split,
};
use super::eval::{recall_at_1, RankingExample};
use super::loss::{kl_distill_loss, list_mle_loss};
use super::trainer::{epoch_order, fit, TrainReport};
use super::warmup::axpy;
use crate::corpus::Corpus;
use crate::dense::{dot_sim, CrossEncoder, DualEncoder, EncodeCache, ParamSet};
use crate::error::{Error, Result};
use crate::metrics::Metric;

pub(crate) const STAGE_DISTILL: u64 = 3;

/// Where the retriever's target comes from.
#[derive(Debug, Clone, Copy)]
pub enum DistillTeacher<'a> {
    /// KL(softmax(ranker scores) ‖ softmax(retriever scores)).
    Ranker(&'a CrossEncoder),
    /// ListMLE against the metric's quality ordering.
    Metric(Metric),
}

/// Progressive path: fine-tune `warm` towards a frozen ranker.
pub fn distill_retriever(
    warm: &DualEncoder,
    ranker: &CrossEncoder,
    train: Split<'_>,
    valid: Split<'_>,
    corpus: &Corpus,
    config: &TrainingConfig,
) -> Result<TrainReport<DualEncoder>> {
    distill_with(warm, DistillTeacher::Ranker(ranker), train, valid, corpus, config)
}

/// Direct path: fine-tune `warm` on the metric ordering.
pub fn distill_retriever_direct(
    warm: &DualEncoder,
    metric: Metric,
    train: Split<'_>,
    valid: Split<'_>,
    corpus: &Corpus,
    config: &TrainingConfig,
) -> Result<TrainReport<DualEncoder>> {
    distill_with(warm, DistillTeacher::Metric(metric), train, valid, corpus, config)
}

/// Lists are one positive plus `pool_size - 1` negatives from the candidate
/// pool, with no in-batch negatives. Validation is R@1 on negative-only lists
/// against the metric-best candidate under `config.distill_metric`.
pub fn distill_with(
    warm: &DualEncoder,
    teacher: DistillTeacher<'_>,
    train: Split<'_>,
    valid: Split<'_>,
    corpus: &Corpus,
    config: &TrainingConfig,
) -> Result<TrainReport<DualEncoder>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("distillation needs at least one example"));
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
    let vocab = &warm.vocab;
    let corpus_ids = encode_corpus(vocab, corpus);
    let enc_train = EncodedSplit::new(vocab, &train);
    let enc_valid = EncodedSplit::new(vocab, &valid);

    // Teacher scores are fixed, so they are cached per (example, candidate).
    let mut teacher_scores: std::collections::HashMap<(usize, Candidate), f64> = Default::default();
    let ranker_ids = match teacher {
        DistillTeacher::Ranker(r) => Some((
            encode_corpus(&r.vocab, corpus),
            EncodedSplit::new(&r.vocab, &train),
        )),
        DistillTeacher::Metric(_) => None,
    };
    let mut metric_cache = match teacher {
        DistillTeacher::Metric(m) => Some(MetricCache::new(m, train.examples, corpus)),
        DistillTeacher::Ranker(_) => None,
    };
    let valid_lists: Vec<RankingExample<usize, Candidate>> = if valid.is_empty() {
        Vec::new()
    } else {
        negative_only_lists(&valid, corpus, config.pool_size, config.distill_metric)?
            .into_iter()
            .map(|(query, candidates, correct)| RankingExample { query, candidates, correct })
            .collect()
    };

    let init = warm.clone();
    let mut grad = init.zeros_like();

    let run_epoch = |model: &mut DualEncoder, adam: &mut super::optim::Adam, epoch: usize| -> Result<f64> {
        let order = epoch_order(train.len(), config.seed, STAGE_DISTILL, epoch);
        let mut rng = rng_for(config.seed, &[STAGE_DISTILL, epoch as u64]);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.zero();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let cands = training_list(&train, i, corpus, config.pool_size, &mut rng)?;
                let query: EncodeCache = model.concept.forward(&enc_train.concepts[i])?;
                let sents: Vec<EncodeCache> = cands
                    .iter()
                    .map(|&c| model.sentence.forward(candidate_ids(c, i, &enc_train, &corpus_ids)))
                    .collect::<Result<_>>()?;
                let z: Vec<f64> = sents
                    .iter()
                    .map(|s| dot_sim(&query.output, &s.output))
                    .collect::<Result<_>>()?;

                let lg = match teacher {
                    DistillTeacher::Ranker(ranker) => {
                        let (r_corpus, r_split) = ranker_ids.as_ref().expect("ranker ids");
                        let mut t = Vec::with_capacity(cands.len());
                        for &c in &cands {
                            let s = match teacher_scores.get(&(i, c)) {
                                Some(&s) => s,
                                None => {
                                    let s = ranker.score_ids(&r_split.concepts[i], candidate_ids(c, i, r_split, r_corpus))?;
                                    teacher_scores.insert((i, c), s);
                                    s
                                }
                            };
                            t.push(s);
                        }
                        kl_distill_loss(&t, &z)?
                    }
                    DistillTeacher::Metric(_) => {
                        let ordering = metric_cache.as_mut().expect("metric cache").ordering(i, &cands)?;
                        list_mle_loss(&z, ordering.order())?
                    }
                };
                total += lg.loss;

                let mut d_q = vec![0.0; model.dim()];
                for (s, g) in sents.iter().zip(&lg.grad) {
                    let g = g * scale;
                    axpy(&mut d_q, g, &s.output);
                    let d_s: Vec<f64> = query.output.iter().map(|q| g * q).collect();
                    model.sentence.backward(s, &d_s, &mut grad.sentence);
                }
                model.concept.backward(&query, &d_q, &mut grad.concept);
            }
            adam.step(model, &grad);
        }
        Ok(total / train.len() as f64)
    };

    let validate = |model: &DualEncoder, train_loss: f64| -> Result<f64> {
        if valid_lists.is_empty() {
            return Ok(-train_loss);
        }
        recall_at_1(&valid_lists, |&i, &c| {
            let q = model.concept.encode(&enc_valid.concepts[i])?;
            dot_sim(&q, &model.sentence.encode(candidate_ids(c, i, &enc_valid, &corpus_ids))?)
        })
    };

    fit(init, config, run_epoch, validate)
}
