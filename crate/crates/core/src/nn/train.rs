use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{Gradients, MlpModel};
use crate::data::LabeledDataset;
use crate::{Error, Result};

/// Local SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 5,
            batch_size: 64,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is allowed: it is the documented "no movement" case
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::validation("learning_rate must be a non-negative finite number"));
        }
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Minibatch SGD driver: shuffles `0..n` each epoch and calls `grad` on each
/// batch of indices. The final batch of an epoch may be short.
pub fn sgd_loop(
    model: &mut MlpModel,
    n: usize,
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
    mut grad: impl FnMut(&MlpModel, &[usize]) -> Result<Gradients>,
) -> Result<()> {
    let mut rng = crate::rng::stream(seed, "shuffle", &[]);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size.max(1)) {
            let g = grad(model, batch)?;
            model.apply_gradients(&g, learning_rate);
        }
    }
    Ok(())
}

/// Plain SGD (no momentum) on cross-entropy.
pub fn sgd_train(
    model: &MlpModel,
    dataset: &LabeledDataset,
    config: &TrainConfig,
) -> Result<MlpModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::validation("cannot train on an empty dataset"));
    }
    let mut out = model.clone();
    sgd_loop(
        &mut out,
        dataset.len(),
        config.epochs,
        config.batch_size,
        config.learning_rate,
        config.rng_seed,
        |m, idx| {
            let x = dataset.inputs().select_rows(idx);
            let y: Vec<usize> = idx.iter().map(|&i| dataset.labels()[i]).collect();
            Ok(super::cross_entropy_loss(m, &x, &y)?.1)
        },
    )?;
    Ok(out)
}
