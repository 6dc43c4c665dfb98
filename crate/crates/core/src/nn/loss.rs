use alloc::vec::Vec;

use super::{Gradients, LogitMatrix, MlpModel, RealMatrix};
use crate::{Error, Result};

/// Row-wise softmax, stabilized by subtracting the row maximum.
pub fn softmax(logits: &LogitMatrix) -> Result<RealMatrix> {
    softmax_with_temperature(logits, 1.0)
}

pub fn softmax_with_temperature(logits: &LogitMatrix, temperature: f64) -> Result<RealMatrix> {
    if !(temperature > 0.0) {
        return Err(Error::validation("temperature must be positive"));
    }
    if logits.as_slice().iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN logit".into()));
    }
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_row(out.row_mut(r), temperature);
    }
    Ok(out)
}

pub(crate) fn softmax_row(row: &mut [f64], temperature: f64) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp((*v - max) / temperature);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `log softmax(row / T)` computed with log-sum-exp.
fn log_softmax_row(row: &[f64], temperature: f64, out: &mut Vec<f64>) {
    out.clear();
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) / temperature;
    let lse = libm::log(row.iter().map(|&v| libm::exp(v / temperature - max)).sum::<f64>()) + max;
    out.extend(row.iter().map(|&v| v / temperature - lse));
}

/// Mean cross-entropy and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &LogitMatrix, labels: &[usize]) -> Result<(f64, RealMatrix)> {
    let (n, c) = (logits.rows(), logits.cols());
    if labels.len() != n {
        return Err(Error::shape("label count != logit rows"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::validation(alloc::format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    if n == 0 {
        return Err(Error::validation("empty batch"));
    }
    let mut grad = RealMatrix::zeros(n, c);
    let mut loss = 0.0;
    let mut logp = Vec::with_capacity(c);
    let inv_n = 1.0 / n as f64;
    for (r, &label) in labels.iter().enumerate() {
        log_softmax_row(logits.row(r), 1.0, &mut logp);
        loss -= logp[label];
        let g = grad.row_mut(r);
        for (k, (gk, lp)) in g.iter_mut().zip(&logp).enumerate() {
            let p = libm::exp(*lp);
            *gk = (p - if k == label { 1.0 } else { 0.0 }) * inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}

/// `T^2 * mean_i KL(teacher_i || softmax(student_i / T))` and its gradient
/// w.r.t. the student logits.
pub fn kd(
    student_logits: &LogitMatrix,
    teacher_probs: &RealMatrix,
    temperature: f64,
) -> Result<(f64, RealMatrix)> {
    let (n, c) = (student_logits.rows(), student_logits.cols());
    if teacher_probs.rows() != n || teacher_probs.cols() != c {
        return Err(Error::shape("teacher shape != student logits shape"));
    }
    if !(temperature > 0.0) {
        return Err(Error::validation("temperature must be positive"));
    }
    if n == 0 {
        return Err(Error::validation("empty batch"));
    }
    for row in teacher_probs.iter_rows() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 || row.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::validation("teacher rows must be probability vectors"));
        }
    }
    let mut grad = RealMatrix::zeros(n, c);
    let mut loss = 0.0;
    let mut logq = Vec::with_capacity(c);
    let scale = temperature / n as f64;
    for r in 0..n {
        log_softmax_row(student_logits.row(r), temperature, &mut logq);
        let p = teacher_probs.row(r);
        for k in 0..c {
            if p[k] > 0.0 {
                loss += p[k] * (libm::log(p[k]) - logq[k]);
            }
        }
        let g = grad.row_mut(r);
        for k in 0..c {
            g[k] = scale * (libm::exp(logq[k]) - p[k]);
        }
    }
    Ok((temperature * temperature * loss / n as f64, grad))
}

/// Cross-entropy of `model` on a labeled batch, with parameter gradients.
pub fn cross_entropy_loss(
    model: &MlpModel,
    batch: &RealMatrix,
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    let cache = model.forward_cached(batch)?;
    let (loss, dlogits) = cross_entropy(cache.logits(), labels)?;
    Ok((loss, model.backward(batch, &cache, &dlogits)?))
}

/// Distillation loss of `model` against fixed teacher probabilities.
pub fn kd_loss(
    model: &MlpModel,
    batch: &RealMatrix,
    teacher_probs: &RealMatrix,
    temperature: f64,
) -> Result<(f64, Gradients)> {
    let cache = model.forward_cached(batch)?;
    let (loss, dlogits) = kd(cache.logits(), teacher_probs, temperature)?;
    Ok((loss, model.backward(batch, &cache, &dlogits)?))
}
