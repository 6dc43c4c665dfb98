use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{DistillSource, LabeledDataset, ServerDistillSet};
use crate::nn::RealMatrix;
use crate::rng::stream;
use crate::{Error, Result};

/// `count x dim` i.i.d. uniform values on `[0, 1)`.
pub fn uniform_noise_set(count: usize, dim: usize, seed: u64) -> Result<ServerDistillSet> {
    if count == 0 || dim == 0 {
        return Err(Error::validation("noise set needs positive count and dim"));
    }
    let mut rng = stream(seed, "uniform-noise", &[]);
    let data: Vec<f64> = (0..count * dim).map(|_| rng.random::<f64>()).collect();
    Ok(ServerDistillSet::new(
        RealMatrix::new(count, dim, data)?,
        DistillSource::UniformNoise,
    ))
}

/// Gaussian clusters in `[0, 1]^dim`, one per class, `per_class` samples each.
///
/// Centers are drawn uniformly from `[0.15, 0.85]^dim`; samples add
/// `N(0, 0.05^2)` noise per coordinate and are clamped to `[0, 1]`. Labels
/// cycle `0, 1, .., classes-1` so every prefix is close to balanced.
pub fn synthetic_gaussian_blobs(
    classes: usize,
    per_class: usize,
    dim: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if classes < 2 {
        return Err(Error::validation("need at least two classes"));
    }
    if per_class == 0 || dim == 0 {
        return Err(Error::validation("per_class and dim must be positive"));
    }
    let mut rng = stream(seed, "blobs", &[]);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| 0.15 + 0.7 * rng.random::<f64>()).collect())
        .collect();
    let noise = Normal::new(0.0, 0.05).expect("valid normal");
    let n = classes * per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for &mu in &centers[c] {
            data.push((mu + noise.sample(&mut rng)).clamp(0.0, 1.0));
        }
        labels.push(c);
    }
    LabeledDataset::new(RealMatrix::new(n, dim, data)?, labels, classes)
}
