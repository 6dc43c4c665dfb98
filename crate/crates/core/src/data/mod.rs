//! Datasets, server distillation sets and client partitioning.

mod dataset;
mod partition;
mod synthetic;

pub use dataset::{DistillSource, LabeledDataset, ServerDistillSet};
pub use partition::{
    carve_server_set, dirichlet_partition, iid_partition, largest_remainder, partition,
    ClientShard, Heterogeneity, PartitionSpec, DEFAULT_QUANTITY_SKEW, MAX_PARTITION_RETRIES,
};
pub use synthetic::{synthetic_gaussian_blobs, uniform_noise_set};
