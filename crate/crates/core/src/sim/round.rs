use alloc::vec::Vec;

use rand::seq::index::sample;

use super::experiment::{Clock, Federation};
use super::SimulationConfig;
use crate::aggregate::{aggregate, AggregationInput};
use crate::attacks::{apply_faulty, ClientRole, FaultyMode};
use crate::data::LabeledDataset;
use crate::distill::logits_on;
use crate::nn::{flatten, sgd_train, unflatten, ModelParams, TrainConfig};
use crate::rng::SeedStreams;
use crate::scoring::MedianCountHistogram;
use crate::Result;

/// Metrics of one communication round (round 0 is the untrained baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round_index: usize,
    pub test_error_rate: f64,
    /// Client ids that took part, ascending.
    pub participants: Vec<usize>,
    /// Aggregation weights per participant (scoring aggregators only).
    pub scores: Option<Vec<f64>>,
    /// Median ownership counts per participant (scoring aggregators only).
    pub histogram: Option<MedianCountHistogram>,
    /// Degenerate median scores were replaced by size weights.
    pub score_fallback: bool,
    pub wall_time_ns: u64,
}

/// Fraction of misclassified samples (argmax, lowest class on ties).
pub fn evaluate(params: &ModelParams, architecture: &[usize], test_set: &LabeledDataset) -> Result<f64> {
    let model = unflatten(params, architecture)?;
    let predicted = logits_on(&model, test_set.inputs())?.argmax_rows();
    let wrong = predicted
        .iter()
        .zip(test_set.labels())
        .filter(|(p, l)| p != l)
        .count();
    Ok(wrong as f64 / test_set.len() as f64)
}

/// `ceil(C * K)` distinct clients for `round`, ascending.
pub fn sample_clients(config: &SimulationConfig, streams: &SeedStreams, round: usize) -> Vec<usize> {
    let k = config.clients_per_round();
    if k == config.num_clients {
        return (0..k).collect();
    }
    let mut rng = streams.rng("sample", &[round as u64]);
    let mut chosen = sample(&mut rng, config.num_clients, k).into_vec();
    chosen.sort_unstable();
    chosen
}

/// Read-only state shared by all rounds of one experiment.
pub struct RoundContext<'a> {
    pub config: &'a SimulationConfig,
    pub federation: &'a Federation,
    pub test_set: &'a LabeledDataset,
    pub streams: SeedStreams,
}

fn local_update(
    ctx: &RoundContext<'_>,
    global: &ModelParams,
    round: usize,
    client: usize,
) -> Result<ModelParams> {
    let config = ctx.config;
    let role = ctx.federation.roles[client];
    let skip_training = role == ClientRole::Faulty && config.attack.faulty_mode == FaultyMode::NoiseOnly;
    let trained = if skip_training {
        global.clone()
    } else {
        let model = unflatten(global, &config.layer_dims)?;
        let train = TrainConfig {
            rng_seed: ctx.streams.seed("train", &[round as u64, client as u64]),
            ..config.local
        };
        flatten(&sgd_train(&model, &ctx.federation.shards[client].dataset, &train)?)
    };
    if role == ClientRole::Faulty {
        let mut rng = ctx.streams.rng("attack", &[round as u64, client as u64]);
        return Ok(apply_faulty(&trained, config.attack.effective_variance(), &mut rng));
    }
    Ok(trained)
}

#[cfg(feature = "rayon")]
fn local_updates(
    ctx: &RoundContext<'_>,
    global: &ModelParams,
    round: usize,
    participants: &[usize],
) -> Result<Vec<ModelParams>> {
    use rayon::prelude::*;
    participants
        .par_iter()
        .map(|&k| local_update(ctx, global, round, k))
        .collect()
}

#[cfg(not(feature = "rayon"))]
fn local_updates(
    ctx: &RoundContext<'_>,
    global: &ModelParams,
    round: usize,
    participants: &[usize],
) -> Result<Vec<ModelParams>> {
    participants
        .iter()
        .map(|&k| local_update(ctx, global, round, k))
        .collect()
}

/// One round: sample, train locally, attack, aggregate, evaluate.
///
/// `round` is 1-based.
pub fn run_round(
    ctx: &RoundContext<'_>,
    global: &ModelParams,
    round: usize,
    clock: &dyn Clock,
) -> Result<(ModelParams, RoundRecord)> {
    let started = clock.now_ns();
    let config = ctx.config;
    let participants = sample_clients(config, &ctx.streams, round);
    let updates = local_updates(ctx, global, round, &participants)?;
    let sizes: Vec<usize> = participants
        .iter()
        .map(|&k| ctx.federation.shards[k].size())
        .collect();
    let input = AggregationInput {
        client_params: &updates,
        client_sizes: &sizes,
        distill_set: Some(&ctx.federation.distill_set),
        architecture: &config.layer_dims,
        round_index: round,
        rng_seed: ctx.streams.seed("aggregate", &[round as u64]),
        distill: config.distill,
        noise_set_size: config.distill_set_size.max(1),
        attacker_count: config.attack.attacker_count(),
        median_rule: config.median_rule,
    };
    let out = aggregate(&config.aggregator, &input)?;
    let error = evaluate(&out.params, &config.layer_dims, ctx.test_set)?;
    let record = RoundRecord {
        round_index: round,
        test_error_rate: error,
        participants,
        scores: out.scores.map(|s| s.scores),
        histogram: out.histogram,
        score_fallback: out.fallback,
        wall_time_ns: clock.now_ns().saturating_sub(started),
    };
    Ok((out.params, record))
}
