//! Retriever warm-up with in-batch and sampled hard negatives.

use rand::Rng;

use super::config::{rng_for, TrainingConfig};
use super::data::{encode_corpus, positive_included_lists, Candidate, EncodedSplit, Split};
use super::eval::{recall_at_1, RankingExample};
use super::loss::contrastive_loss;
use super::trainer::{epoch_order, fit, TrainReport};
use crate::corpus::Corpus;
use crate::dense::{dot_sim, DualEncoder, EncodeCache, ParamSet, Vocab};
use crate::error::{Error, Result};
use crate::pool::CandidatePool;
use crate::sparse::{sample_hard_negative, HardNegativePool};

pub(crate) const STAGE_WARMUP: u64 = 1;

/// The untrained retriever for a seed.
pub fn initial_retriever(vocab: &Vocab, config: &TrainingConfig) -> DualEncoder {
    DualEncoder::new(vocab.clone(), config.dims, &mut rng_for(config.seed, &[STAGE_WARMUP, 0x1417]))
}

/// Contrastive warm-up. Each query in a batch scores its own positive (a
/// randomly chosen reference), the other queries' positives, and one hard
/// negative sampled from its pool.
pub fn warmup_retriever(
    train: Split<'_>,
    valid: Split<'_>,
    corpus: &Corpus,
    vocab: &Vocab,
    config: &TrainingConfig,
) -> Result<TrainReport<DualEncoder>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("warm-up needs at least one training example"));
    }
    if train.pools.iter().any(CandidatePool::is_empty) {
        return Err(Error::invalid("warm-up needs non-empty hard-negative pools"));
    }
    let corpus_ids = encode_corpus(vocab, corpus);
    let enc_train = EncodedSplit::new(vocab, &train);
    let enc_valid = EncodedSplit::new(vocab, &valid);
    let hard_pools: Vec<HardNegativePool> = train.pools.iter().map(HardNegativePool::from).collect();
    let valid_lists: Vec<RankingExample<usize, Candidate>> = positive_included_lists(&valid, corpus, config.pool_size)?
        .into_iter()
        .map(|(query, candidates, correct)| RankingExample { query, candidates, correct })
        .collect();

    let init = initial_retriever(vocab, config);
    let mut grad = init.zeros_like();

    let run_epoch = |model: &mut DualEncoder, adam: &mut super::optim::Adam, epoch: usize| -> Result<f64> {
        let order = epoch_order(train.len(), config.seed, STAGE_WARMUP, epoch);
        let mut rng = rng_for(config.seed, &[STAGE_WARMUP, epoch as u64]);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.zero();
            let mut queries: Vec<EncodeCache> = Vec::with_capacity(batch.len());
            let mut positives: Vec<EncodeCache> = Vec::with_capacity(batch.len());
            let mut hards: Vec<EncodeCache> = Vec::with_capacity(batch.len());
            for &i in batch {
                let ex = &train.examples[i];
                let r = rng.gen_range(0..ex.references.len());
                let hard = sample_hard_negative(&hard_pools[i], corpus, &ex.references[r].raw, &mut rng)?;
                queries.push(model.concept.forward(&enc_train.concepts[i])?);
                positives.push(model.sentence.forward(&enc_train.references[i][r])?);
                hards.push(model.sentence.forward(&corpus_ids[hard])?);
            }

            let b = batch.len();
            let d = model.dim();
            let scale = 1.0 / b as f64;
            let mut d_q = vec![vec![0.0; d]; b];
            let mut d_p = vec![vec![0.0; d]; b];
            let mut d_h = vec![vec![0.0; d]; b];
            for i in 0..b {
                let q = &queries[i].output;
                let pos = dot_sim(q, &positives[i].output)?;
                let mut negs = Vec::with_capacity(b);
                for (j, p) in positives.iter().enumerate() {
                    if j != i {
                        negs.push(dot_sim(q, &p.output)?);
                    }
                }
                negs.push(dot_sim(q, &hards[i].output)?);
                let lg = contrastive_loss(pos, &negs);
                total += lg.loss;

                // grad layout: [own positive, other positives in order, hard]
                let mut g = lg.grad.iter().map(|v| v * scale);
                let g_pos = g.next().unwrap_or(0.0);
                axpy(&mut d_q[i], g_pos, &positives[i].output);
                axpy(&mut d_p[i], g_pos, q);
                for j in (0..b).filter(|&j| j != i) {
                    let gj = g.next().unwrap_or(0.0);
                    axpy(&mut d_q[i], gj, &positives[j].output);
                    axpy(&mut d_p[j], gj, q);
                }
                let g_hard = g.next().unwrap_or(0.0);
                axpy(&mut d_q[i], g_hard, &hards[i].output);
                axpy(&mut d_h[i], g_hard, q);
            }
            for i in 0..b {
                model.concept.backward(&queries[i], &d_q[i], &mut grad.concept);
                model.sentence.backward(&positives[i], &d_p[i], &mut grad.sentence);
                model.sentence.backward(&hards[i], &d_h[i], &mut grad.sentence);
            }
            adam.step(model, &grad);
        }
        Ok(total / train.len() as f64)
    };

    let validate = |model: &DualEncoder, train_loss: f64| -> Result<f64> {
        if valid_lists.is_empty() {
            return Ok(-train_loss);
        }
        recall_at_1(&valid_lists, |&i, &cand| {
            let q = model.concept.encode(&enc_valid.concepts[i])?;
            let ids = match cand {
                Candidate::Reference(r) => &enc_valid.references[i][r],
                Candidate::Sentence(id) => &corpus_ids[id],
            };
            dot_sim(&q, &model.sentence.encode(ids)?)
        })
    };

    fit(init, config, run_epoch, validate)
}

pub(crate) fn axpy(dst: &mut [f64], alpha: f64, x: &[f64]) {
    for (d, v) in dst.iter_mut().zip(x) {
        *d += alpha * v;
    }
}
