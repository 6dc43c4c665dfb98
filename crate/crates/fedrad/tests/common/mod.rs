#![allow(dead_code)]

use std::path::Path;

use fedrad::idx::write_idx;
use fedrad::manifest::DataPaths;
use fedrad_core::data::synthetic_gaussian_blobs;

/// Ten-class 4x4 blob images written as an MNIST-named IDX quadruple.
pub fn write_blob_mnist(dir: &Path) -> DataPaths {
    let all = synthetic_gaussian_blobs(10, 70, 16, 5).unwrap();
    let train = all.subset(&(0..500).collect::<Vec<_>>());
    let test = all.subset(&(500..700).collect::<Vec<_>>());
    std::fs::create_dir_all(dir).unwrap();
    let paths = DataPaths::mnist_in(dir);
    write_idx(&train, 4, 4, &paths.train_images, &paths.train_labels).unwrap();
    write_idx(&test, 4, 4, &paths.test_images, &paths.test_labels).unwrap();
    paths
}

/// Manifest body for a fast grid on [`write_blob_mnist`] data.
pub fn tiny_manifest(data_dir: &Path, grid: &str) -> String {
    format!(
        r#"output_dir = "out"
workers = 2

[data]
train_images = "{d}/train-images-idx3-ubyte"
train_labels = "{d}/train-labels-idx1-ubyte"
test_images = "{d}/t10k-images-idx3-ubyte"
test_labels = "{d}/t10k-labels-idx1-ubyte"

[simulation]
num_clients = 5
rounds = 3
seeds = [0, 1]
layer_dims = [16, 12, 10]
distill_set_size = 50

[simulation.local]
learning_rate = 0.3
epochs = 2
batch_size = 16

[simulation.distill]
epochs = 1
batch_size = 25

{grid}
"#,
        d = data_dir.display()
    )
}
