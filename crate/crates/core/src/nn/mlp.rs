use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::matrix::{gemm, LogitMatrix, RealMatrix};
use crate::{Error, Result};

/// 784 -> 256 -> 128 -> 10, three fully connected layers for MNIST.
pub const DEFAULT_LAYER_DIMS: [usize; 4] = [784, 256, 128, 10];

/// One fully connected layer. `weights` is `fan_out x fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: RealMatrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        DenseLayer {
            weights: RealMatrix::zeros(fan_out, fan_in),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }
}

/// ReLU multilayer perceptron producing raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    layers: Vec<DenseLayer>,
}

/// Hidden activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    hidden: Vec<RealMatrix>,
    logits: LogitMatrix,
}

impl ForwardCache {
    pub fn logits(&self) -> &LogitMatrix {
        &self.logits
    }
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    /// Layer-major flattening matching [`super::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }
}

pub(crate) fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::shape("need at least an input and an output dimension"));
    }
    if layer_dims.contains(&0) {
        return Err(Error::shape("layer dimensions must be positive"));
    }
    Ok(())
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        let mut rng = crate::rng::stream(seed, "glorot", &[]);
        let mut model = Self::zeros(layer_dims)?;
        for layer in &mut model.layers {
            let limit = libm::sqrt(6.0 / (layer.fan_in() + layer.fan_out()) as f64);
            for w in layer.weights.as_mut_slice() {
                *w = (2.0 * rng.random::<f64>() - 1.0) * limit;
            }
        }
        Ok(model)
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        validate_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| DenseLayer::zeros(w[0], w[1]))
            .collect();
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("model needs at least one layer"));
        }
        let mut dims = vec![layers[0].fan_in()];
        for l in &layers {
            if l.fan_in() != *dims.last().unwrap() {
                return Err(Error::shape("consecutive layer shapes do not compose"));
            }
            if l.bias.len() != l.fan_out() {
                return Err(Error::shape("bias length != fan_out"));
            }
            dims.push(l.fan_out());
        }
        validate_dims(&dims)?;
        Ok(MlpModel {
            layer_dims: dims,
            layers,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        super::param_count(&self.layer_dims)
    }

    fn check_input(&self, batch: &RealMatrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(alloc::format!(
                "batch has {} columns, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn affine(layer: &DenseLayer, input: &RealMatrix) -> RealMatrix {
        let rows = input.rows();
        let mut out = RealMatrix::zeros(rows, layer.fan_out());
        for r in 0..rows {
            out.row_mut(r).copy_from_slice(&layer.bias);
        }
        // out += input * W^T
        gemm(
            rows,
            layer.fan_in(),
            layer.fan_out(),
            1.0,
            input.as_slice(),
            layer.fan_in(),
            1,
            layer.weights.as_slice(),
            1,
            layer.fan_in(),
            1.0,
            out.as_mut_slice(),
        );
        out
    }

    /// Raw logits for every row of `batch`.
    pub fn forward(&self, batch: &RealMatrix) -> Result<LogitMatrix> {
        self.check_input(batch)?;
        let mut act = Self::affine(&self.layers[0], batch);
        for layer in &self.layers[1..] {
            relu(&mut act);
            act = Self::affine(layer, &act);
        }
        Ok(act)
    }

    /// Forward pass retaining the post-ReLU hidden activations.
    pub fn forward_cached(&self, batch: &RealMatrix) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        let mut act = Self::affine(&self.layers[0], batch);
        for layer in &self.layers[1..] {
            relu(&mut act);
            let next = Self::affine(layer, &act);
            hidden.push(act);
            act = next;
        }
        Ok(ForwardCache {
            hidden,
            logits: act,
        })
    }

    /// Backpropagate `dlogits` (gradient of the loss w.r.t. the logits).
    pub fn backward(
        &self,
        input: &RealMatrix,
        cache: &ForwardCache,
        dlogits: &RealMatrix,
    ) -> Result<Gradients> {
        self.check_input(input)?;
        let rows = input.rows();
        if dlogits.rows() != rows || dlogits.cols() != self.class_count() {
            return Err(Error::shape("dlogits shape does not match the batch"));
        }
        let mut grads: Vec<DenseLayer> = Vec::with_capacity(self.layers.len());
        let mut delta = dlogits.clone();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let prev = if li == 0 { input } else { &cache.hidden[li - 1] };
            let (fan_in, fan_out) = (layer.fan_in(), layer.fan_out());

            let mut dw = RealMatrix::zeros(fan_out, fan_in);
            // dW = delta^T * prev
            gemm(
                fan_out,
                rows,
                fan_in,
                1.0,
                delta.as_slice(),
                1,
                fan_out,
                prev.as_slice(),
                fan_in,
                1,
                0.0,
                dw.as_mut_slice(),
            );
            let mut db = vec![0.0; fan_out];
            for row in delta.iter_rows() {
                for (b, d) in db.iter_mut().zip(row) {
                    *b += d;
                }
            }
            grads.push(DenseLayer {
                weights: dw,
                bias: db,
            });

            if li > 0 {
                let mut dprev = RealMatrix::zeros(rows, fan_in);
                // dA = delta * W
                gemm(
                    rows,
                    fan_out,
                    fan_in,
                    1.0,
                    delta.as_slice(),
                    fan_out,
                    1,
                    layer.weights.as_slice(),
                    fan_in,
                    1,
                    0.0,
                    dprev.as_mut_slice(),
                );
                for (d, &a) in dprev.as_mut_slice().iter_mut().zip(prev.as_slice()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = dprev;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// `params -= lr * grads`.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
                *w -= learning_rate * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= learning_rate * gb;
            }
        }
    }

    /// Predicted class per row (argmax, lowest index on ties).
    pub fn predict(&self, batch: &RealMatrix) -> Result<Vec<usize>> {
        Ok(self.forward(batch)?.argmax_rows())
    }
}

fn relu(m: &mut RealMatrix) {
    for v in m.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_with_zero_bias_and_bounded_weights() {
        let a = MlpModel::init(&[784, 10], 7).unwrap();
        let b = MlpModel::init(&[784, 10], 7).unwrap();
        assert_eq!(a, b);
        let limit = libm::sqrt(6.0 / 794.0);
        assert!((limit - 0.0869).abs() < 1e-4);
        assert!(a.layers()[0]
            .weights
            .as_slice()
            .iter()
            .all(|w| w.abs() < limit));
        let deep = MlpModel::init(&DEFAULT_LAYER_DIMS, 3).unwrap();
        assert!(deep.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        assert_ne!(MlpModel::init(&[784, 10], 8).unwrap(), a);
    }

    #[test]
    fn invalid_dims_rejected() {
        assert!(matches!(MlpModel::init(&[784], 0), Err(Error::Shape(_))));
        assert!(matches!(MlpModel::init(&[784, 0, 10], 0), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let m = MlpModel::zeros(&[4, 3, 2]).unwrap();
        let x = RealMatrix::from_fn(5, 4, |r, c| (r + c) as f64);
        let y = m.forward(&x).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let m = MlpModel::from_layers(vec![DenseLayer {
            weights: RealMatrix::identity(5),
            bias: vec![0.0; 5],
        }])
        .unwrap();
        let x = RealMatrix::from_fn(3, 5, |r, c| r as f64 - c as f64 * 0.5);
        assert_eq!(m.forward(&x).unwrap(), x);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let m = MlpModel::zeros(&[4, 2]).unwrap();
        assert!(m.forward(&RealMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn from_layers_checks_composition() {
        let bad = vec![
            DenseLayer {
                weights: RealMatrix::zeros(3, 4),
                bias: vec![0.0; 3],
            },
            DenseLayer {
                weights: RealMatrix::zeros(2, 5),
                bias: vec![0.0; 2],
            },
        ];
        assert!(MlpModel::from_layers(bad).is_err());
    }
}
