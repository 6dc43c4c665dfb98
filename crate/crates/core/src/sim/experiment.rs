use alloc::vec::Vec;

use rand::seq::index::sample;

use super::round::{evaluate, run_round, RoundContext, RoundRecord};
use super::SimulationConfig;
use crate::attacks::{apply_malicious, assign_roles, ClientRole};
use crate::data::{carve_server_set, partition, ClientShard, LabeledDataset, ServerDistillSet};
use crate::nn::{flatten, MlpModel};
use crate::rng::SeedStreams;
use crate::stats::mean_and_std;
use crate::Result;

/// Error rate of a model that always predicts one class on balanced 10-class data.
pub const COLLAPSE_ERROR: f64 = 0.90;
pub const COLLAPSE_TOLERANCE: f64 = 0.005;

/// A final error this close to 0.90 means the model predicts a constant class.
pub fn is_collapsed(error_rate: f64) -> bool {
    (error_rate - COLLAPSE_ERROR).abs() <= COLLAPSE_TOLERANCE
}

/// Wall-clock source for round timings; `no_std` builds use [`NoClock`].
pub trait Clock: Sync {
    fn now_ns(&self) -> u64;
}

pub struct NoClock;

impl Clock for NoClock {
    fn now_ns(&self) -> u64 {
        0
    }
}

/// Training pool and test set.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Honest client shards and the server set for one (split, seed); shared by
/// every attack and aggregator so cells compare on identical data.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPool {
    pub shards: Vec<ClientShard>,
    pub distill_set: ServerDistillSet,
}

/// Client shards with attacks applied, plus their roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Federation {
    pub shards: Vec<ClientShard>,
    pub roles: Vec<ClientRole>,
    pub distill_set: ServerDistillSet,
}

/// Subsample, carve the server set and partition for `seed`.
pub fn prepare_pool(config: &SimulationConfig, seed: u64, train: &LabeledDataset) -> Result<PreparedPool> {
    let streams = SeedStreams::new(seed);
    let pool = match config.train_subsample {
        Some(n) if n < train.len() => {
            let mut rng = streams.rng("subsample", &[]);
            let mut idx = sample(&mut rng, train.len(), n).into_vec();
            idx.sort_unstable();
            train.subset(&idx)
        }
        _ => train.clone(),
    };
    let (remaining, distill_set) =
        carve_server_set(&pool, config.distill_set_size, streams.seed("carve", &[]))?;
    let shards = partition(&remaining, &config.partition_spec(streams.seed("partition", &[])))?;
    Ok(PreparedPool {
        shards,
        distill_set,
    })
}

/// Assign roles and flip malicious clients' labels.
pub fn prepare_federation(config: &SimulationConfig, seed: u64, pool: &PreparedPool) -> Result<Federation> {
    let streams = SeedStreams::new(seed);
    let roles = assign_roles(config.num_clients, &config.attack, streams.seed("roles", &[]))?;
    let shards = pool
        .shards
        .iter()
        .zip(&roles)
        .map(|(shard, role)| {
            Ok(match role {
                ClientRole::Malicious => ClientShard {
                    client_id: shard.client_id,
                    dataset: apply_malicious(&shard.dataset, config.attack.flip_target_label)?,
                },
                _ => shard.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Federation {
        shards,
        roles,
        distill_set: pool.distill_set.clone(),
    })
}

/// Per-seed trace: the initial model's baseline and one record per round.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTrace {
    pub seed: u64,
    pub baseline: RoundRecord,
    pub rounds: Vec<RoundRecord>,
    pub roles: Vec<ClientRole>,
}

impl ExperimentTrace {
    pub fn final_error(&self) -> f64 {
        self.rounds.last().unwrap_or(&self.baseline).test_error_rate
    }

    pub fn error_curve(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.test_error_rate).collect()
    }

    pub fn collapsed(&self) -> bool {
        is_collapsed(self.final_error())
    }
}

/// Run one seed of `config` on the given data.
pub fn run_experiment(config: &SimulationConfig, seed: u64, data: &ExperimentData) -> Result<ExperimentTrace> {
    let pool = prepare_pool(config, seed, &data.train)?;
    run_experiment_with_clock(config, seed, &pool, &data.test, &NoClock)
}

/// Run one seed from an already prepared pool.
///
/// Every random choice derives from `seed` through named streams, see
/// [`crate::rng`].
pub fn run_experiment_with_clock(
    config: &SimulationConfig,
    seed: u64,
    pool: &PreparedPool,
    test: &LabeledDataset,
    clock: &dyn Clock,
) -> Result<ExperimentTrace> {
    config.validate()?;
    let federation = prepare_federation(config, seed, pool)?;
    let streams = SeedStreams::new(seed);
    let init = MlpModel::init(&config.layer_dims, streams.seed("init", &[]))?;
    let mut global = flatten(&init);
    let baseline = RoundRecord {
        round_index: 0,
        test_error_rate: evaluate(&global, &config.layer_dims, test)?,
        participants: Vec::new(),
        scores: None,
        histogram: None,
        score_fallback: false,
        wall_time_ns: 0,
    };
    let ctx = RoundContext {
        config,
        federation: &federation,
        test_set: test,
        streams,
    };
    let mut rounds = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let (next, record) = run_round(&ctx, &global, round, clock).map_err(|e| e.in_round(round))?;
        global = next;
        rounds.push(record);
    }
    Ok(ExperimentTrace {
        seed,
        baseline,
        rounds,
        roles: federation.roles,
    })
}

/// Final-round statistics across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub traces: Vec<ExperimentTrace>,
    pub final_errors: Vec<f64>,
    pub mean_error: f64,
    /// Sample standard deviation; 0 with a single seed.
    pub std_error: f64,
    pub single_seed: bool,
    pub collapsed_seeds: Vec<u64>,
}

/// Aggregate finished traces into mean / std of final errors.
pub fn summarize_seeds(traces: Vec<ExperimentTrace>) -> ExperimentResult {
    let final_errors: Vec<f64> = traces.iter().map(|t| t.final_error()).collect();
    let (mean_error, std_error) = mean_and_std(&final_errors);
    let collapsed_seeds = traces.iter().filter(|t| t.collapsed()).map(|t| t.seed).collect();
    ExperimentResult {
        single_seed: traces.len() == 1,
        traces,
        final_errors,
        mean_error,
        std_error,
        collapsed_seeds,
    }
}

/// Run every configured seed sequentially.
pub fn run_seeds(config: &SimulationConfig, data: &ExperimentData) -> Result<ExperimentResult> {
    config.validate()?;
    let traces = config
        .seeds
        .iter()
        .map(|&seed| run_experiment(config, seed, data).map_err(|e| e.for_seed(seed)))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_seeds(traces))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapse_window() {
        assert!(is_collapsed(0.902));
        assert!(is_collapsed(0.8951));
        assert!(!is_collapsed(0.89));
        assert!(!is_collapsed(0.05));
    }

    #[test]
    fn single_seed_summary() {
        let rec = |e| RoundRecord {
            round_index: 1,
            test_error_rate: e,
            participants: Vec::new(),
            scores: None,
            histogram: None,
            score_fallback: false,
            wall_time_ns: 0,
        };
        let t = ExperimentTrace {
            seed: 3,
            baseline: rec(0.9),
            rounds: alloc::vec![rec(0.2)],
            roles: Vec::new(),
        };
        let r = summarize_seeds(alloc::vec![t]);
        assert!(r.single_seed);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.mean_error, 0.2);
    }
}
