use alloc::vec::Vec;

use super::mlp::{validate_dims, DenseLayer};
use super::{MlpModel, RealMatrix};
use crate::{Error, Result};

/// Flat parameter vector in canonical layer-major order: layer 1 weights
/// (row-major, `fan_out x fan_in`), layer 1 biases, layer 2 weights, ...
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    values: Vec<f64>,
}

impl ModelParams {
    pub fn new(values: Vec<f64>) -> Self {
        ModelParams { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl From<Vec<f64>> for ModelParams {
    fn from(values: Vec<f64>) -> Self {
        ModelParams { values }
    }
}

pub fn param_count(layer_dims: &[usize]) -> usize {
    layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

pub fn flatten(model: &MlpModel) -> ModelParams {
    let mut values = Vec::with_capacity(model.param_count());
    for l in model.layers() {
        values.extend_from_slice(l.weights.as_slice());
        values.extend_from_slice(&l.bias);
    }
    ModelParams { values }
}

pub fn unflatten(params: &ModelParams, layer_dims: &[usize]) -> Result<MlpModel> {
    validate_dims(layer_dims)?;
    let expected = param_count(layer_dims);
    if params.len() != expected {
        return Err(Error::shape(alloc::format!(
            "parameter vector has {} values, architecture needs {expected}",
            params.len()
        )));
    }
    let mut offset = 0;
    let mut layers = Vec::with_capacity(layer_dims.len() - 1);
    for w in layer_dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let wlen = fan_in * fan_out;
        let weights =
            RealMatrix::new(fan_out, fan_in, params.values[offset..offset + wlen].to_vec())?;
        offset += wlen;
        let bias = params.values[offset..offset + fan_out].to_vec();
        offset += fan_out;
        layers.push(DenseLayer { weights, bias });
    }
    MlpModel::from_layers(layers)
}
