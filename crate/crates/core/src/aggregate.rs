//! Server-side aggregation rules.
//!
//! Every rule maps the round's client parameter vectors (plus their dataset
//! sizes and, for the distillation-based rules, an unlabeled server set) to
//! the next global parameter vector.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{uniform_noise_set, ServerDistillSet};
use crate::distill::{distill, ensemble_logits, pseudolabels, DistillConfig, PseudolabelMode};
use crate::nn::{flatten, param_count, unflatten, MlpModel, ModelParams};
use crate::scoring::{adjust_scores_by_size, median_scores_with, MedianCountHistogram, MedianRule, ScoreVector};
use crate::{Error, Result};

/// Multi-Krum options. `f = None` uses the configured attacker count and
/// `m = None` selects `M - f` clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MultiKrumOptions {
    pub f: Option<usize>,
    pub m: Option<usize>,
    /// Average the selected clients without size weights.
    pub unweighted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregatorKind {
    FedAvg,
    Comed,
    MKrum(MultiKrumOptions),
    FedDf,
    FedDfMed,
    FedRad,
    FedRadNoise,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 7] = [
        AggregatorKind::FedAvg,
        AggregatorKind::Comed,
        AggregatorKind::MKrum(MultiKrumOptions {
            f: None,
            m: None,
            unweighted: false,
        }),
        AggregatorKind::FedDf,
        AggregatorKind::FedDfMed,
        AggregatorKind::FedRad,
        AggregatorKind::FedRadNoise,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AggregatorKind::FedAvg => "fedavg",
            AggregatorKind::Comed => "comed",
            AggregatorKind::MKrum(_) => "mkrum",
            AggregatorKind::FedDf => "feddf",
            AggregatorKind::FedDfMed => "feddfmed",
            AggregatorKind::FedRad => "fedrad",
            AggregatorKind::FedRadNoise => "fedradnoise",
        }
    }

    /// Whether the rule reads the carved server distillation set.
    pub fn needs_distill_set(&self) -> bool {
        matches!(
            self,
            AggregatorKind::FedDf | AggregatorKind::FedDfMed | AggregatorKind::FedRad
        )
    }

    /// Whether the rule produces median scores.
    pub fn scores_clients(&self) -> bool {
        matches!(self, AggregatorKind::FedRad | AggregatorKind::FedRadNoise)
    }
}

impl fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AggregatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(alloc::format!(
                    "unknown aggregator {s:?} (expected one of fedavg, comed, mkrum, feddf, feddfmed, fedrad, fedradnoise)"
                ))
            })
    }
}

/// Everything an aggregator may look at in one round.
#[derive(Debug, Clone)]
pub struct AggregationInput<'a> {
    pub client_params: &'a [ModelParams],
    pub client_sizes: &'a [usize],
    pub distill_set: Option<&'a ServerDistillSet>,
    pub architecture: &'a [usize],
    pub round_index: usize,
    pub rng_seed: u64,
    pub distill: DistillConfig,
    /// Rows of uniform noise generated by `fedradnoise`.
    pub noise_set_size: usize,
    /// Default Multi-Krum `f`.
    pub attacker_count: usize,
    pub median_rule: MedianRule,
}

impl<'a> AggregationInput<'a> {
    pub fn new(
        client_params: &'a [ModelParams],
        client_sizes: &'a [usize],
        architecture: &'a [usize],
    ) -> Self {
        AggregationInput {
            client_params,
            client_sizes,
            distill_set: None,
            architecture,
            round_index: 0,
            rng_seed: 0,
            distill: DistillConfig::default(),
            noise_set_size: 10_000,
            attacker_count: 0,
            median_rule: MedianRule::Lower,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.client_params.len();
        if m == 0 {
            return Err(Error::validation("no client models to aggregate"));
        }
        if self.client_sizes.len() != m {
            return Err(Error::shape("client size count != client model count"));
        }
        if self.client_sizes.contains(&0) {
            return Err(Error::validation("client sizes must be positive"));
        }
        let expected = param_count(self.architecture);
        if let Some(i) = self.client_params.iter().position(|p| p.len() != expected) {
            return Err(Error::shape(alloc::format!(
                "client {i} has {} parameters, architecture needs {expected}",
                self.client_params[i].len()
            )));
        }
        Ok(())
    }

    fn size_weights(&self) -> Vec<f64> {
        let total: f64 = self.client_sizes.iter().map(|&n| n as f64).sum();
        self.client_sizes.iter().map(|&n| n as f64 / total).collect()
    }

    fn models(&self) -> Result<Vec<MlpModel>> {
        self.client_params
            .iter()
            .map(|p| unflatten(p, self.architecture))
            .collect()
    }

    fn distill_config(&self) -> DistillConfig {
        DistillConfig {
            rng_seed: crate::rng::derive(self.rng_seed, "kd", &[]),
            ..self.distill
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationOutput {
    pub params: ModelParams,
    /// Size-adjusted weights actually used (scoring rules only).
    pub scores: Option<ScoreVector>,
    pub histogram: Option<MedianCountHistogram>,
    /// True when degenerate median scores were replaced by size weights.
    pub fallback: bool,
}

impl AggregationOutput {
    fn plain(params: ModelParams) -> Self {
        AggregationOutput {
            params,
            scores: None,
            histogram: None,
            fallback: false,
        }
    }
}

/// Dispatch on `kind`.
pub fn aggregate(kind: &AggregatorKind, input: &AggregationInput<'_>) -> Result<AggregationOutput> {
    input.validate()?;
    match kind {
        AggregatorKind::FedAvg => fedavg(input).map(AggregationOutput::plain),
        AggregatorKind::Comed => comed(input).map(AggregationOutput::plain),
        AggregatorKind::MKrum(opts) => {
            let f = opts.f.unwrap_or(input.attacker_count);
            let m = opts.m.unwrap_or(input.client_params.len().saturating_sub(f));
            mkrum_with(input, f, m, !opts.unweighted).map(AggregationOutput::plain)
        }
        AggregatorKind::FedDf => feddf(input).map(AggregationOutput::plain),
        AggregatorKind::FedDfMed => feddfmed(input).map(AggregationOutput::plain),
        AggregatorKind::FedRad => fedrad(input),
        AggregatorKind::FedRadNoise => fedradnoise(input),
    }
}

/// `sum_k w_k * params_k`, element-wise.
pub fn weighted_average(params: &[ModelParams], weights: &[f64]) -> ModelParams {
    let mut out = vec![0.0; params[0].len()];
    for (p, &w) in params.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(p.as_slice()) {
            *o += w * v;
        }
    }
    ModelParams::new(out)
}

/// Size-weighted average of client parameters.
pub fn fedavg(input: &AggregationInput<'_>) -> Result<ModelParams> {
    input.validate()?;
    Ok(weighted_average(input.client_params, &input.size_weights()))
}

/// Coordinate-wise value median (midpoint for an even number of clients).
pub fn comed(input: &AggregationInput<'_>) -> Result<ModelParams> {
    input.validate()?;
    let len = input.client_params[0].len();
    let mut column = vec![0.0; input.client_params.len()];
    let out = (0..len)
        .map(|j| {
            for (c, p) in column.iter_mut().zip(input.client_params) {
                *c = p.as_slice()[j];
            }
            crate::distill::value_median(&mut column)
        })
        .collect();
    Ok(ModelParams::new(out))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Krum score per client: the sum of squared distances to its `M - f - 2`
/// nearest other clients.
pub fn krum_scores(params: &[ModelParams], f: usize) -> Result<Vec<f64>> {
    let m = params.len();
    if m < f + 3 {
        return Err(Error::validation(alloc::format!(
            "Multi-Krum needs at least f + 3 = {} clients, got {m}",
            f + 3
        )));
    }
    let mut dist = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let d = squared_distance(params[i].as_slice(), params[j].as_slice());
            dist[i * m + j] = d;
            dist[j * m + i] = d;
        }
    }
    let neighbours = m - f - 2;
    Ok((0..m)
        .map(|i| {
            let mut row: Vec<f64> = (0..m).filter(|&j| j != i).map(|j| dist[i * m + j]).collect();
            row.sort_by(|a, b| a.total_cmp(b));
            row[..neighbours].iter().sum()
        })
        .collect())
}

/// Indices of the `m` lowest Krum scores (ties to the lower index), ascending.
pub fn mkrum_select(params: &[ModelParams], f: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > params.len() {
        return Err(Error::validation(alloc::format!(
            "Multi-Krum m = {m} must be in 1..={}",
            params.len()
        )));
    }
    let scores = krum_scores(params, f)?;
    let mut order: Vec<usize> = (0..params.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut chosen = order[..m].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

pub fn mkrum(input: &AggregationInput<'_>, f: usize, m: usize) -> Result<ModelParams> {
    mkrum_with(input, f, m, true)
}

fn mkrum_with(
    input: &AggregationInput<'_>,
    f: usize,
    m: usize,
    size_weighted: bool,
) -> Result<ModelParams> {
    input.validate()?;
    let chosen = mkrum_select(input.client_params, f, m)?;
    let selected: Vec<ModelParams> = chosen.iter().map(|&i| input.client_params[i].clone()).collect();
    let weights: Vec<f64> = if size_weighted {
        let total: f64 = chosen.iter().map(|&i| input.client_sizes[i] as f64).sum();
        chosen.iter().map(|&i| input.client_sizes[i] as f64 / total).collect()
    } else {
        vec![1.0 / m as f64; m]
    };
    Ok(weighted_average(&selected, &weights))
}

fn require_distill_set<'a>(input: &AggregationInput<'a>, name: &str) -> Result<&'a ServerDistillSet> {
    match input.distill_set {
        Some(set) if !set.is_empty() => Ok(set),
        _ => Err(Error::Config(String::from(name) + " needs a nonempty server distillation set")),
    }
}

fn distilled_average(input: &AggregationInput<'_>, mode: PseudolabelMode, name: &str) -> Result<ModelParams> {
    input.validate()?;
    let set = require_distill_set(input, name)?;
    let student = unflatten(&fedavg(input)?, input.architecture)?;
    let cfg = input.distill_config();
    if cfg.epochs == 0 {
        return Ok(flatten(&student));
    }
    let ensemble = ensemble_logits(&input.models()?, set.inputs())?;
    let labels = pseudolabels(&ensemble, mode, cfg.temperature)?;
    Ok(flatten(&distill(&student, &labels, set, &cfg)?))
}

/// FedAvg student distilled towards mean-logit pseudolabels.
pub fn feddf(input: &AggregationInput<'_>) -> Result<ModelParams> {
    distilled_average(input, PseudolabelMode::MeanLogits, "feddf")
}

/// FedAvg student distilled towards median-logit pseudolabels.
pub fn feddfmed(input: &AggregationInput<'_>) -> Result<ModelParams> {
    distilled_average(input, PseudolabelMode::MedianLogits, "feddfmed")
}

/// Median-score weighted average, then median-logit distillation.
pub fn fedrad(input: &AggregationInput<'_>) -> Result<AggregationOutput> {
    input.validate()?;
    let set = require_distill_set(input, "fedrad")?;
    fedrad_on(input, set)
}

/// [`fedrad`] with a uniform-noise server set in place of real data.
pub fn fedradnoise(input: &AggregationInput<'_>) -> Result<AggregationOutput> {
    input.validate()?;
    let size = match input.distill_set {
        Some(s) if !s.is_empty() => s.len(),
        _ => input.noise_set_size,
    };
    let noise = uniform_noise_set(
        size,
        input.architecture[0],
        crate::rng::derive(input.rng_seed, "noise", &[]),
    )?;
    fedrad_on(input, &noise)
}

fn fedrad_on(input: &AggregationInput<'_>, set: &ServerDistillSet) -> Result<AggregationOutput> {
    let models = input.models()?;
    let ensemble = ensemble_logits(&models, set.inputs())?;
    let (raw, histogram) = median_scores_with(&ensemble, input.median_rule);
    let (weights, fallback) = match adjust_scores_by_size(&raw, input.client_sizes) {
        Ok(adjusted) => (adjusted, false),
        Err(Error::DegenerateScores(_)) => (
            ScoreVector {
                scores: input.size_weights(),
            },
            true,
        ),
        Err(e) => return Err(e),
    };
    let averaged = weighted_average(input.client_params, &weights.scores);
    let cfg = input.distill_config();
    let params = if cfg.epochs == 0 {
        averaged
    } else {
        let student = unflatten(&averaged, input.architecture)?;
        let labels = pseudolabels(&ensemble, PseudolabelMode::MedianLogits, cfg.temperature)?;
        flatten(&distill(&student, &labels, set, &cfg)?)
    };
    Ok(AggregationOutput {
        params,
        scores: Some(weights),
        histogram: Some(histogram),
        fallback,
    })
}
