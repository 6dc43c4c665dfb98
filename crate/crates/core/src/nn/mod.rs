//! Dense math and the MLP classifier.

mod loss;
mod matrix;
mod mlp;
mod params;
mod train;

pub use loss::{cross_entropy, cross_entropy_loss, kd, kd_loss, softmax, softmax_with_temperature};
pub use matrix::{LogitMatrix, RealMatrix};
pub use mlp::{DenseLayer, ForwardCache, Gradients, MlpModel, DEFAULT_LAYER_DIMS};
pub use params::{flatten, param_count, unflatten, ModelParams};
pub use train::{sgd_loop, sgd_train, TrainConfig};
