use alloc::vec::Vec;

use crate::nn::RealMatrix;
use crate::{Error, Result};

/// Labeled inputs, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: RealMatrix,
    labels: Vec<usize>,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(inputs: RealMatrix, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::validation("dataset must be nonempty"));
        }
        if labels.len() != inputs.rows() {
            return Err(Error::shape(alloc::format!(
                "{} labels for {} inputs",
                labels.len(),
                inputs.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::validation(alloc::format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if !inputs.is_finite() {
            return Err(Error::validation("inputs must be finite"));
        }
        Ok(LabeledDataset {
            inputs,
            labels,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &RealMatrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// The listed samples, in the given order. Panics on an empty selection.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        assert!(!indices.is_empty(), "empty subset");
        LabeledDataset {
            inputs: self.inputs.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    /// The first `n` samples (or all of them if `n` exceeds the size).
    pub fn head(&self, n: usize) -> LabeledDataset {
        let n = n.min(self.len()).max(1);
        LabeledDataset {
            inputs: self.inputs.slice_rows(0, n),
            labels: self.labels[..n].to_vec(),
            class_count: self.class_count,
        }
    }

    /// Sample indices grouped by label, each group in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut groups = alloc::vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Same inputs, labels replaced.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<LabeledDataset> {
        LabeledDataset::new(self.inputs.clone(), labels, self.class_count)
    }

    pub fn into_parts(self) -> (RealMatrix, Vec<usize>, usize) {
        (self.inputs, self.labels, self.class_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistillSource {
    HeldOutReal,
    UniformNoise,
}

/// Unlabeled server-side inputs used for scoring and distillation.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerDistillSet {
    inputs: RealMatrix,
    source: DistillSource,
}

impl ServerDistillSet {
    pub fn new(inputs: RealMatrix, source: DistillSource) -> Self {
        ServerDistillSet { inputs, source }
    }

    pub fn inputs(&self) -> &RealMatrix {
        &self.inputs
    }

    pub fn source(&self) -> DistillSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }
}
