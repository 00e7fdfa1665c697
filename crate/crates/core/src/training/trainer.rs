//! Epoch loop with best-checkpoint selection and early stopping.

use rand::seq::SliceRandom;

use super::config::{rng_for, TrainingConfig};
use super::optim::Adam;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_score: f64,
}

/// Result of a training run: the selected model and the per-epoch history.
#[derive(Debug, Clone)]
pub struct TrainReport<M> {
    pub model: M,
    /// 0 means the initial model was kept.
    pub best_epoch: usize,
    pub best_score: f64,
    pub history: Vec<EpochRecord>,
}

/// Runs up to `config.epochs` epochs. After every epoch `validate` scores the
/// model (higher is better); the best model so far is kept and training stops
/// once `config.patience` epochs pass without a strict improvement.
pub(crate) fn fit<M: Clone>(
    init: M,
    config: &TrainingConfig,
    mut run_epoch: impl FnMut(&mut M, &mut Adam, usize) -> Result<f64>,
    mut validate: impl FnMut(&M, f64) -> Result<f64>,
) -> Result<TrainReport<M>> {
    if config.epochs == 0 {
        return Ok(TrainReport {
            model: init,
            best_epoch: 0,
            best_score: f64::NEG_INFINITY,
            history: Vec::new(),
        });
    }
    let mut best_score = validate(&init, f64::INFINITY)?;
    let mut best = init.clone();
    let mut best_epoch = 0;
    let mut model = init;
    let mut adam = Adam::new(config.learning_rate);
    let mut history = Vec::new();
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        let train_loss = run_epoch(&mut model, &mut adam, epoch)?;
        let valid_score = validate(&model, train_loss)?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            valid_score,
        });
        if valid_score > best_score {
            best_score = valid_score;
            best = model.clone();
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    Ok(TrainReport {
        model: best,
        best_epoch,
        best_score,
        history,
    })
}

/// Example order for one epoch, a pure function of seed, stage and epoch.
pub(crate) fn epoch_order(n: usize, seed: u64, stage: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, &[stage, epoch as u64, 0x5EED]));
    order
}
