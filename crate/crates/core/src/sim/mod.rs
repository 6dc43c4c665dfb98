//! The federated round loop, multi-seed orchestration and evaluation.

mod config;
mod experiment;
mod round;

pub use config::SimulationConfig;
pub use experiment::{
    is_collapsed, prepare_federation, prepare_pool, run_experiment, run_experiment_with_clock,
    run_seeds, summarize_seeds, Clock, ExperimentData, ExperimentResult, ExperimentTrace,
    Federation, NoClock, PreparedPool, COLLAPSE_ERROR, COLLAPSE_TOLERANCE,
};
pub use round::{evaluate, run_round, sample_clients, RoundContext, RoundRecord};
pub use crate::stats::{mean_and_std, welch_t_test, WelchResult};
