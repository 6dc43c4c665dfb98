//! Ensemble pseudolabels and knowledge distillation.
//!
//! Pseudolabels combine the client ensemble's logits cell by cell, either by
//! the mean (FedDF) or by the value median, and then apply a row softmax. The
//! median needs a value rather than an owner here, so an even-sized ensemble
//! takes the midpoint of the two middle logits.

use alloc::vec::Vec;

use crate::data::ServerDistillSet;
use crate::nn::{kd_loss, softmax_with_temperature, LogitMatrix, MlpModel, RealMatrix};
use crate::scoring::LogitEnsemble;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudolabelMode {
    MeanLogits,
    MedianLogits,
}

/// Soft targets, one probability row per distillation input.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudolabelSet {
    pub probs: RealMatrix,
    pub mode: PseudolabelMode,
}

impl PseudolabelSet {
    pub fn len(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.rows() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistillConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub temperature: f64,
    pub rng_seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            epochs: 2,
            learning_rate: 0.01,
            batch_size: 128,
            temperature: 1.0,
            rng_seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("distill learning_rate must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("distill batch_size must be positive"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::validation("distill temperature must be positive"));
        }
        Ok(())
    }
}

/// Per-cell arithmetic mean of the ensemble logits.
pub fn mean_logits(ensemble: &LogitEnsemble) -> LogitMatrix {
    let m = ensemble.model_count() as f64;
    let mut out = RealMatrix::zeros(ensemble.points(), ensemble.classes());
    for member in ensemble.members() {
        for (o, v) in out.as_mut_slice().iter_mut().zip(member.as_slice()) {
            *o += v;
        }
    }
    for o in out.as_mut_slice() {
        *o /= m;
    }
    out
}

/// Value median of a slice (midpoint of the middle pair for even length).
pub fn value_median(values: &mut [f64]) -> f64 {
    let m = values.len();
    assert!(m > 0, "median of nothing");
    let (_, hi, _) = values.select_nth_unstable_by(m / 2, |a, b| a.total_cmp(b));
    let hi = *hi;
    if m % 2 == 1 {
        return hi;
    }
    let lo = values[..m / 2]
        .iter()
        .copied()
        .max_by(|a, b| a.total_cmp(b))
        .expect("nonempty lower half");
    0.5 * (lo + hi)
}

/// Per-cell value median of the ensemble logits.
pub fn median_logits(ensemble: &LogitEnsemble) -> LogitMatrix {
    let mut out = RealMatrix::zeros(ensemble.points(), ensemble.classes());
    ensemble.for_each_cell(|n, c, cell| out.set(n, c, value_median(cell)));
    out
}

fn from_logits(logits: &LogitMatrix, mode: PseudolabelMode, temperature: f64) -> Result<PseudolabelSet> {
    Ok(PseudolabelSet {
        probs: softmax_with_temperature(logits, temperature)?,
        mode,
    })
}

pub fn pseudolabels_mean(ensemble: &LogitEnsemble) -> Result<PseudolabelSet> {
    pseudolabels(ensemble, PseudolabelMode::MeanLogits, 1.0)
}

pub fn pseudolabels_median(ensemble: &LogitEnsemble) -> Result<PseudolabelSet> {
    pseudolabels(ensemble, PseudolabelMode::MedianLogits, 1.0)
}

/// Combine logits per `mode`, then softmax at `temperature`.
pub fn pseudolabels(
    ensemble: &LogitEnsemble,
    mode: PseudolabelMode,
    temperature: f64,
) -> Result<PseudolabelSet> {
    let combined = match mode {
        PseudolabelMode::MeanLogits => mean_logits(ensemble),
        PseudolabelMode::MedianLogits => median_logits(ensemble),
    };
    from_logits(&combined, mode, temperature)
}

/// Rows per forward chunk when scoring a whole distillation set.
const EVAL_CHUNK: usize = 1024;

/// Logits of `model` on all rows of `inputs`, evaluated in chunks.
pub fn logits_on(model: &MlpModel, inputs: &RealMatrix) -> Result<LogitMatrix> {
    if inputs.rows() <= EVAL_CHUNK {
        return model.forward(inputs);
    }
    let mut parts = Vec::with_capacity(inputs.rows().div_ceil(EVAL_CHUNK));
    let mut start = 0;
    while start < inputs.rows() {
        let end = (start + EVAL_CHUNK).min(inputs.rows());
        parts.push(model.forward(&inputs.slice_rows(start, end))?);
        start = end;
    }
    RealMatrix::vstack(&parts)
}

/// Logits of every model on the same inputs.
pub fn ensemble_logits(models: &[MlpModel], inputs: &RealMatrix) -> Result<LogitEnsemble> {
    LogitEnsemble::new(
        models
            .iter()
            .map(|m| logits_on(m, inputs))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Train `student` towards fixed pseudolabels with the KD loss.
pub fn distill(
    student: &MlpModel,
    pseudolabels: &PseudolabelSet,
    distill_set: &ServerDistillSet,
    config: &DistillConfig,
) -> Result<MlpModel> {
    config.validate()?;
    if pseudolabels.len() != distill_set.len() {
        return Err(Error::validation(alloc::format!(
            "{} pseudolabels for {} distillation inputs",
            pseudolabels.len(),
            distill_set.len()
        )));
    }
    let mut out = student.clone();
    if config.epochs == 0 || distill_set.is_empty() {
        return Ok(out);
    }
    crate::nn::sgd_loop(
        &mut out,
        distill_set.len(),
        config.epochs,
        config.batch_size,
        config.learning_rate,
        config.rng_seed,
        |m, idx| {
            let x = distill_set.inputs().select_rows(idx);
            let t = pseudolabels.probs.select_rows(idx);
            Ok(kd_loss(m, &x, &t, config.temperature)?.1)
        },
    )?;
    Ok(out)
}
