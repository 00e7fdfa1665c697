use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DatasetExample};
use crate::error::{Error, Result};
use crate::metrics::{kendall_tau, quality_order, Metric};
use crate::pool::CandidatePool;

/// Pool quality measured with a metric against each example's references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub k: usize,
    pub num_pools: usize,
    /// Mean metric score of each pool's first entry.
    pub mean_top1: f64,
    /// Mean over pools of the mean score of the first `k` entries.
    pub mean_topk: f64,
    /// Mean Kendall τ between pool order and metric order (pools of size ≥ 2).
    pub mean_tau: f64,
    /// Fraction of pools whose first entry is the metric-best entry.
    pub recall_at_1: f64,
}

/// Scores every pool against its example; `pools[i]` belongs to `examples[i]`.
pub fn evaluate_pools(
    pools: &[CandidatePool],
    examples: &[DatasetExample],
    corpus: &Corpus,
    metric: Metric,
    k: usize,
) -> Result<EvalReport> {
    if pools.len() != examples.len() {
        return Err(Error::LengthMismatch {
            left: pools.len(),
            right: examples.len(),
        });
    }
    if pools.is_empty() {
        return Err(Error::invalid("no pools to evaluate"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let (mut top1, mut topk, mut tau, mut hits) = (0.0, 0.0, 0.0, 0usize);
    let mut tau_pools = 0usize;
    for (pool, ex) in pools.iter().zip(examples) {
        if pool.is_empty() {
            return Err(Error::invalid(format!("pool {} is empty", pool.concept_set_id)));
        }
        let sentences = pool
            .ids
            .iter()
            .map(|&id| {
                corpus
                    .get(id)
                    .map(|r| r.tokens.as_slice())
                    .ok_or_else(|| Error::invalid(format!("sentence id {id} not in corpus")))
            })
            .collect::<Result<Vec<_>>>()?;
        let ordering = quality_order(&sentences, &ex.reference_tokens(), metric)?;
        let scores = ordering.scores();
        top1 += scores[0];
        let kk = k.min(scores.len());
        topk += scores[..kk].iter().sum::<f64>() / kk as f64;
        if scores[0] >= scores[ordering.order()[0]] {
            hits += 1;
        }
        if scores.len() >= 2 {
            let pool_order: Vec<usize> = (0..scores.len()).collect();
            tau += kendall_tau(&pool_order, ordering.order())?;
            tau_pools += 1;
        }
    }
    let n = pools.len() as f64;
    Ok(EvalReport {
        metric,
        k,
        num_pools: pools.len(),
        mean_top1: top1 / n,
        mean_topk: topk / n,
        mean_tau: if tau_pools > 0 { tau / tau_pools as f64 } else { 0.0 },
        recall_at_1: hits as f64 / n,
    })
}
