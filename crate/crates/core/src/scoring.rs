//! Median-owner scoring of client models.
//!
//! For every (datapoint, class) cell of an ensemble's logits, the model whose
//! logit is the median of the ensemble gets one count. Clients that rarely
//! produce the median (noisy or poisoned models sit in the tails) end up with
//! small normalized scores.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::attacks::ClientRole;
use crate::nn::LogitMatrix;
use crate::{Error, Result};

/// Logits of `M` models over the same `N x C` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitEnsemble {
    members: Vec<LogitMatrix>,
}

impl LogitEnsemble {
    pub fn new(members: Vec<LogitMatrix>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::validation("ensemble needs at least one model"))?;
        let (n, c) = (first.rows(), first.cols());
        if let Some(i) = members.iter().position(|m| m.rows() != n || m.cols() != c) {
            return Err(Error::shape(alloc::format!(
                "ensemble member {i} is {}x{}, expected {n}x{c}",
                members[i].rows(),
                members[i].cols()
            )));
        }
        Ok(LogitEnsemble { members })
    }

    pub fn model_count(&self) -> usize {
        self.members.len()
    }

    pub fn points(&self) -> usize {
        self.members[0].rows()
    }

    pub fn classes(&self) -> usize {
        self.members[0].cols()
    }

    pub fn members(&self) -> &[LogitMatrix] {
        &self.members
    }

    /// Apply `f` to the `M` values of every cell, row-major over `(point, class)`.
    pub(crate) fn for_each_cell(&self, mut f: impl FnMut(usize, usize, &mut [f64])) {
        let mut cell = vec![0.0; self.model_count()];
        for n in 0..self.points() {
            for c in 0..self.classes() {
                for (v, m) in cell.iter_mut().zip(&self.members) {
                    *v = m.get(n, c);
                }
                f(n, c, &mut cell);
            }
        }
    }
}

/// Which middle element owns the median when `M` is even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MedianRule {
    /// Sorted position `ceil(M/2)` (1-based).
    #[default]
    Lower,
    /// Sorted position `floor(M/2) + 1` (1-based).
    Upper,
}

/// Normalized per-model weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
}

impl ScoreVector {
    pub fn uniform(m: usize) -> Self {
        ScoreVector {
            scores: vec![1.0 / m as f64; m],
        }
    }
}

/// How often each model owned the median.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MedianCountHistogram {
    pub counts: Vec<u64>,
    pub total: u64,
}

/// Index of the model owning the median of `values`.
///
/// The median value is the order statistic chosen by `rule`; when several
/// models share it, the smallest model index wins.
pub fn median_owner(values: &[f64], rule: MedianRule, scratch: &mut Vec<f64>) -> usize {
    let m = values.len();
    let pos = match rule {
        MedianRule::Lower => (m - 1) / 2,
        MedianRule::Upper => m / 2,
    };
    scratch.clear();
    scratch.extend_from_slice(values);
    let (_, median, _) = scratch.select_nth_unstable_by(pos, |a, b| a.total_cmp(b));
    let median = *median;
    values
        .iter()
        .position(|v| v.total_cmp(&median).is_eq())
        .expect("median value comes from the input")
}

pub fn median_scores(ensemble: &LogitEnsemble) -> (ScoreVector, MedianCountHistogram) {
    median_scores_with(ensemble, MedianRule::Lower)
}

/// Count median ownership over every (point, class) cell and normalize.
pub fn median_scores_with(
    ensemble: &LogitEnsemble,
    rule: MedianRule,
) -> (ScoreVector, MedianCountHistogram) {
    let mut counts = vec![0u64; ensemble.model_count()];
    let mut scratch = Vec::with_capacity(ensemble.model_count());
    ensemble.for_each_cell(|_, _, cell| {
        counts[median_owner(cell, rule, &mut scratch)] += 1;
    });
    let total = (ensemble.points() * ensemble.classes()) as u64;
    let scores = if total == 0 {
        ScoreVector::uniform(counts.len())
    } else {
        ScoreVector {
            scores: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        }
    };
    (scores, MedianCountHistogram { counts, total })
}

/// `p_k <- n_k p_k / sum_j n_j p_j`.
pub fn adjust_scores_by_size(scores: &ScoreVector, sizes: &[usize]) -> Result<ScoreVector> {
    if scores.scores.len() != sizes.len() {
        return Err(Error::shape("score and size vectors differ in length"));
    }
    let weighted: Vec<f64> = scores
        .scores
        .iter()
        .zip(sizes)
        .map(|(p, &n)| p * n as f64)
        .collect();
    let sum: f64 = weighted.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::DegenerateScores(
            "size-adjusted scores sum to zero".into(),
        ));
    }
    Ok(ScoreVector {
        scores: weighted.into_iter().map(|w| w / sum).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramRow {
    pub client_id: usize,
    pub role: ClientRole,
    pub median_count: u64,
}

/// One row per model, in model order. `client_ids` maps ensemble positions to
/// client ids (pass `0..M` when every client participates).
pub fn export_histogram(
    histogram: &MedianCountHistogram,
    client_ids: &[usize],
    roles: &[ClientRole],
) -> Result<Vec<HistogramRow>> {
    if histogram.counts.len() != client_ids.len() {
        return Err(Error::shape("histogram and client id lengths differ"));
    }
    client_ids
        .iter()
        .zip(&histogram.counts)
        .map(|(&id, &count)| {
            let role = *roles
                .get(id)
                .ok_or_else(|| Error::shape(alloc::format!("no role for client {id}")))?;
            Ok(HistogramRow {
                client_id: id,
                role,
                median_count: count,
            })
        })
        .collect()
}

/// CSV with header `client_id,role,median_count`.
pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::from("client_id,role,median_count\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.client_id, r.role, r.median_count);
    }
    out
}
