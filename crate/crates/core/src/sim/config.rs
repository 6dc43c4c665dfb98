use alloc::vec::Vec;

use crate::aggregate::AggregatorKind;
use crate::attacks::AttackSpec;
use crate::data::{Heterogeneity, PartitionSpec};
use crate::distill::DistillConfig;
use crate::nn::{TrainConfig, DEFAULT_LAYER_DIMS};
use crate::scoring::MedianRule;
use crate::{Error, Result};

/// One experiment cell: data split, attack, aggregator and training protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub num_clients: usize,
    pub rounds: usize,
    /// Fraction of clients sampled per round, in `(0, 1]`.
    pub client_fraction: f64,
    /// Local training; `rng_seed` is replaced per client and round.
    pub local: TrainConfig,
    pub heterogeneity: Heterogeneity,
    pub attack: AttackSpec,
    pub aggregator: AggregatorKind,
    /// Server distillation; `rng_seed` is replaced per round.
    pub distill: DistillConfig,
    pub distill_set_size: usize,
    pub seeds: Vec<u64>,
    pub layer_dims: Vec<usize>,
    pub median_rule: MedianRule,
    /// Randomly keep only this many training samples (per seed) before
    /// carving and partitioning. `None` uses the whole pool.
    pub train_subsample: Option<usize>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            num_clients: 30,
            rounds: 30,
            client_fraction: 1.0,
            local: TrainConfig::default(),
            heterogeneity: Heterogeneity::iid(),
            attack: AttackSpec::none(),
            aggregator: AggregatorKind::FedAvg,
            distill: DistillConfig::default(),
            distill_set_size: 10_000,
            seeds: (0..5).collect(),
            layer_dims: DEFAULT_LAYER_DIMS.to_vec(),
            median_rule: MedianRule::Lower,
            train_subsample: None,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::Config("num_clients must be positive".into()));
        }
        if !(self.client_fraction > 0.0 && self.client_fraction <= 1.0) {
            return Err(Error::Config("client_fraction must be in (0, 1]".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.local.validate()?;
        self.distill.validate()?;
        self.attack.validate(self.num_clients)?;
        self.partition_spec(0).validate()?;
        crate::nn::MlpModel::zeros(&self.layer_dims)?;
        if self.aggregator.needs_distill_set() && self.distill_set_size == 0 {
            return Err(Error::Config(alloc::format!(
                "{} needs distill_set_size > 0",
                self.aggregator
            )));
        }
        if self.attack.flip_target_label >= *self.layer_dims.last().unwrap() {
            return Err(Error::Config("flip_target_label is not a valid class".into()));
        }
        Ok(())
    }

    pub fn partition_spec(&self, rng_seed: u64) -> PartitionSpec {
        PartitionSpec {
            num_clients: self.num_clients,
            heterogeneity: self.heterogeneity,
            rng_seed,
        }
    }

    /// Number of clients sampled per round, `ceil(C * K)`.
    pub fn clients_per_round(&self) -> usize {
        let k = libm::ceil(self.client_fraction * self.num_clients as f64) as usize;
        k.clamp(1, self.num_clients)
    }
}
