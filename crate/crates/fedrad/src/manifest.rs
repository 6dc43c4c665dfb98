//! Experiment manifests.
//!
//! A manifest is a TOML file naming the MNIST files, the output directory,
//! overrides for the simulation defaults and the grid of (attack,
//! heterogeneity, aggregator) cells to run. Unknown keys are rejected.
//!
//! ```toml
//! output_dir = "results"
//!
//! [data]
//! train_images = "data/mnist/train-images-idx3-ubyte"
//! train_labels = "data/mnist/train-labels-idx1-ubyte"
//! test_images = "data/mnist/t10k-images-idx3-ubyte"
//! test_labels = "data/mnist/t10k-labels-idx1-ubyte"
//!
//! [simulation]            # every key optional
//! rounds = 30
//! seeds = [0, 1, 2, 3, 4]
//!
//! [[grid.attacks]]        # default: none, 10 faulty, 10 malicious, 5 + 5
//! label = "10 faulty"
//! faulty = 10
//!
//! [grid]
//! heterogeneity = ["iid", "alpha=0.5", "alpha=0.1"]
//! aggregators = ["fedavg", "comed", "fedrad"]
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fedrad_core::aggregate::{AggregatorKind, MultiKrumOptions};
use fedrad_core::attacks::{AttackSpec, FaultyMode, NoiseScale, RoleAssignment};
use fedrad_core::data::Heterogeneity;
use fedrad_core::scoring::MedianRule;
use fedrad_core::sim::SimulationConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Documented defaults, printed by `--help`.
pub const DEFAULTS_HELP: &str = "\
Simulation defaults (override under [simulation]):
  num_clients = 30, rounds = 30, client_fraction = 1.0
  seeds = [0, 1, 2, 3, 4], layer_dims = [784, 256, 128, 10]
  distill_set_size = 10000 (carved from the training pool), train_subsample = all
  median_rule = \"lower\", quantity_skew = 0.1 (IID size jitter)
  [simulation.local]   learning_rate = 0.05, epochs = 5, batch_size = 64
  [simulation.distill] epochs = 2, learning_rate = 0.01, batch_size = 128, temperature = 1.0
  [simulation.attack]  noise_variance = 20, noise_scale = \"variance\",
                       faulty_mode = \"train_then_noise\", flip_target_label = 0,
                       assignment = \"paper_pattern\"
  [simulation.mkrum]   f = attacker count, m = clients - f, unweighted = false
Grid defaults: attacks = none / 10 faulty / 10 malicious / 5 faulty + 5 malicious,
  heterogeneity = [\"iid\", \"alpha=0.5\", \"alpha=0.1\"], all seven aggregators.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl DataPaths {
    /// Standard MNIST file names under `dir`.
    pub fn mnist_in(dir: &Path) -> Self {
        DataPaths {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }

    fn resolve_against(&self, base: &Path) -> Self {
        let fix = |p: &PathBuf| if p.is_relative() { base.join(p) } else { p.clone() };
        DataPaths {
            train_images: fix(&self.train_images),
            train_labels: fix(&self.train_labels),
            test_images: fix(&self.test_images),
            test_labels: fix(&self.test_labels),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocalFile {
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistillFile {
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    temperature: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackFile {
    noise_variance: Option<f64>,
    noise_scale: Option<String>,
    faulty_mode: Option<String>,
    flip_target_label: Option<usize>,
    assignment: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MkrumFile {
    f: Option<usize>,
    m: Option<usize>,
    unweighted: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationFile {
    num_clients: Option<usize>,
    rounds: Option<usize>,
    client_fraction: Option<f64>,
    seeds: Option<Vec<u64>>,
    layer_dims: Option<Vec<usize>>,
    distill_set_size: Option<usize>,
    train_subsample: Option<usize>,
    median_rule: Option<String>,
    quantity_skew: Option<f64>,
    local: Option<LocalFile>,
    distill: Option<DistillFile>,
    attack: Option<AttackFile>,
    mkrum: Option<MkrumFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackRowFile {
    label: String,
    #[serde(default)]
    faulty: usize,
    #[serde(default)]
    malicious: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    attacks: Option<Vec<AttackRowFile>>,
    heterogeneity: Option<Vec<String>>,
    aggregators: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
    data: DataPaths,
    simulation: Option<SimulationFile>,
    grid: Option<GridFile>,
}

/// One attack row of the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackScenario {
    pub label: String,
    pub faulty: usize,
    pub malicious: usize,
}

impl AttackScenario {
    pub fn new(label: &str, faulty: usize, malicious: usize) -> Self {
        AttackScenario {
            label: label.to_string(),
            faulty,
            malicious,
        }
    }

    /// The four attack rows of the reference results table.
    pub fn table_rows() -> Vec<AttackScenario> {
        vec![
            AttackScenario::new("none", 0, 0),
            AttackScenario::new("10 faulty", 10, 0),
            AttackScenario::new("10 malicious", 0, 10),
            AttackScenario::new("5 faulty + 5 malicious", 5, 5),
        ]
    }
}

/// A named heterogeneity level: `iid` or `alpha=<value>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeterogeneityLevel {
    Iid,
    Alpha(f64),
}

impl HeterogeneityLevel {
    pub fn label(&self) -> String {
        match self {
            HeterogeneityLevel::Iid => "iid".to_string(),
            HeterogeneityLevel::Alpha(a) => format!("alpha={a}"),
        }
    }

    pub fn to_spec(self, quantity_skew: f64) -> Heterogeneity {
        match self {
            HeterogeneityLevel::Iid => Heterogeneity::Iid { quantity_skew },
            HeterogeneityLevel::Alpha(alpha) => Heterogeneity::Dirichlet { alpha },
        }
    }

    pub fn defaults() -> Vec<HeterogeneityLevel> {
        vec![
            HeterogeneityLevel::Iid,
            HeterogeneityLevel::Alpha(0.5),
            HeterogeneityLevel::Alpha(0.1),
        ]
    }
}

impl FromStr for HeterogeneityLevel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "iid" {
            return Ok(HeterogeneityLevel::Iid);
        }
        let alpha = s
            .strip_prefix("alpha=")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| format!("heterogeneity {s:?} must be \"iid\" or \"alpha=<positive number>\""))?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(format!("heterogeneity {s:?}: alpha must be positive"));
        }
        Ok(HeterogeneityLevel::Alpha(alpha))
    }
}

/// A parsed, fully defaulted manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentManifest {
    pub data: DataPaths,
    pub output_dir: PathBuf,
    pub workers: usize,
    /// Settings shared by every cell; the grid fills in attack counts,
    /// heterogeneity and aggregator.
    pub base: SimulationConfig,
    pub quantity_skew: f64,
    pub mkrum: MultiKrumOptions,
    pub attacks: Vec<AttackScenario>,
    pub heterogeneity: Vec<HeterogeneityLevel>,
    pub aggregators: Vec<AggregatorKind>,
}

/// One grid cell and its resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub attack: AttackScenario,
    pub heterogeneity: HeterogeneityLevel,
    pub aggregator: AggregatorKind,
    pub config: SimulationConfig,
}

impl Cell {
    /// Directory-safe identifier of the (attack, heterogeneity) group.
    pub fn group_slug(&self) -> String {
        let clean = |s: &str| {
            s.chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
                .collect::<String>()
        };
        format!("{}__{}", clean(&self.attack.label), clean(&self.heterogeneity.label()))
    }

    /// Directory-safe identifier of the cell.
    pub fn slug(&self) -> String {
        format!("{}__{}", self.group_slug(), self.aggregator.name())
    }
}

fn noise_scale_name(s: NoiseScale) -> &'static str {
    match s {
        NoiseScale::Variance => "variance",
        NoiseScale::StdDev => "std_dev",
    }
}

fn faulty_mode_name(m: FaultyMode) -> &'static str {
    match m {
        FaultyMode::TrainThenNoise => "train_then_noise",
        FaultyMode::NoiseOnly => "noise_only",
    }
}

fn median_rule_name(r: MedianRule) -> &'static str {
    match r {
        MedianRule::Lower => "lower",
        MedianRule::Upper => "upper",
    }
}

fn pick<T: Copy>(name: &str, value: &str, options: &[(&str, T)]) -> std::result::Result<T, String> {
    options
        .iter()
        .find(|(k, _)| *k == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(k, _)| *k).collect();
            format!("{name} = {value:?} is not one of {names:?}")
        })
}

impl ExperimentManifest {
    /// Defaults for everything except the data paths.
    pub fn with_data(data: DataPaths) -> Self {
        ExperimentManifest {
            data,
            output_dir: PathBuf::from("results"),
            workers: 1,
            base: SimulationConfig::default(),
            quantity_skew: fedrad_core::data::DEFAULT_QUANTITY_SKEW,
            mkrum: MultiKrumOptions::default(),
            attacks: AttackScenario::table_rows(),
            heterogeneity: HeterogeneityLevel::defaults(),
            aggregators: AggregatorKind::ALL.to_vec(),
        }
    }

    /// Parse manifest text. Relative paths are resolved against `base_dir`.
    pub fn parse_str(text: &str, origin: &Path, base_dir: &Path) -> Result<Self> {
        let err = |message: String| Error::Manifest {
            path: origin.to_path_buf(),
            message,
        };
        let file: ManifestFile = toml::from_str(text).map_err(|e| err(e.to_string()))?;
        let mut m = ExperimentManifest::with_data(file.data.resolve_against(base_dir));
        if let Some(out) = file.output_dir {
            m.output_dir = if out.is_relative() { base_dir.join(out) } else { out };
        } else {
            m.output_dir = base_dir.join("results");
        }
        if let Some(w) = file.workers {
            if w == 0 {
                return Err(err("workers must be at least 1".into()));
            }
            m.workers = w;
        }
        if let Some(sim) = file.simulation {
            m.apply_simulation(sim).map_err(err)?;
        }
        if let Some(grid) = file.grid {
            if let Some(attacks) = grid.attacks {
                m.attacks = attacks
                    .into_iter()
                    .map(|a| AttackScenario {
                        label: a.label,
                        faulty: a.faulty,
                        malicious: a.malicious,
                    })
                    .collect();
            }
            if let Some(levels) = grid.heterogeneity {
                m.heterogeneity = levels
                    .iter()
                    .map(|s| s.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(err)?;
            }
            if let Some(aggs) = grid.aggregators {
                m.aggregators = aggs
                    .iter()
                    .map(|s| s.parse::<AggregatorKind>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| err(e.to_string()))?;
            }
        }
        let mkrum = m.mkrum;
        for a in &mut m.aggregators {
            if let AggregatorKind::MKrum(o) = a {
                *o = mkrum;
            }
        }
        if m.attacks.is_empty() || m.heterogeneity.is_empty() || m.aggregators.is_empty() {
            return Err(err("grid must have at least one attack, heterogeneity level and aggregator".into()));
        }
        for cell in m.cells() {
            cell.config
                .validate()
                .map_err(|e| err(format!("cell {}: {e}", cell.slug())))?;
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse_str(&text, path, base)
    }

    fn apply_simulation(&mut self, sim: SimulationFile) -> std::result::Result<(), String> {
        let b = &mut self.base;
        if let Some(v) = sim.num_clients {
            b.num_clients = v;
        }
        if let Some(v) = sim.rounds {
            b.rounds = v;
        }
        if let Some(v) = sim.client_fraction {
            b.client_fraction = v;
        }
        if let Some(v) = sim.seeds {
            b.seeds = v;
        }
        if let Some(v) = sim.layer_dims {
            b.layer_dims = v;
        }
        if let Some(v) = sim.distill_set_size {
            b.distill_set_size = v;
        }
        if sim.train_subsample.is_some() {
            b.train_subsample = sim.train_subsample;
        }
        if let Some(v) = sim.median_rule {
            b.median_rule = pick("median_rule", &v, &[("lower", MedianRule::Lower), ("upper", MedianRule::Upper)])?;
        }
        if let Some(v) = sim.quantity_skew {
            self.quantity_skew = v;
        }
        if let Some(l) = sim.local {
            let t = &mut b.local;
            t.learning_rate = l.learning_rate.unwrap_or(t.learning_rate);
            t.epochs = l.epochs.unwrap_or(t.epochs);
            t.batch_size = l.batch_size.unwrap_or(t.batch_size);
        }
        if let Some(d) = sim.distill {
            let c = &mut b.distill;
            c.epochs = d.epochs.unwrap_or(c.epochs);
            c.learning_rate = d.learning_rate.unwrap_or(c.learning_rate);
            c.batch_size = d.batch_size.unwrap_or(c.batch_size);
            c.temperature = d.temperature.unwrap_or(c.temperature);
        }
        if let Some(a) = sim.attack {
            let s = &mut b.attack;
            s.noise_variance = a.noise_variance.unwrap_or(s.noise_variance);
            if let Some(v) = a.noise_scale {
                s.noise_scale = pick("noise_scale", &v, &[("variance", NoiseScale::Variance), ("std_dev", NoiseScale::StdDev)])?;
            }
            if let Some(v) = a.faulty_mode {
                s.faulty_mode = pick(
                    "faulty_mode",
                    &v,
                    &[("train_then_noise", FaultyMode::TrainThenNoise), ("noise_only", FaultyMode::NoiseOnly)],
                )?;
            }
            s.flip_target_label = a.flip_target_label.unwrap_or(s.flip_target_label);
            if let Some(v) = a.assignment {
                s.assignment = match v.as_str() {
                    "paper_pattern" => RoleAssignment::PaperPattern,
                    "seeded_random" => RoleAssignment::SeededRandom,
                    other => return Err(format!("assignment = {other:?} is not one of [\"paper_pattern\", \"seeded_random\"]")),
                };
            }
        }
        if let Some(k) = sim.mkrum {
            self.mkrum = MultiKrumOptions {
                f: k.f,
                m: k.m,
                unweighted: k.unweighted.unwrap_or(false),
            };
        }
        Ok(())
    }

    /// Every grid cell in attack-major, then heterogeneity, then aggregator order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for attack in &self.attacks {
            for het in &self.heterogeneity {
                for agg in &self.aggregators {
                    out.push(Cell {
                        attack: attack.clone(),
                        heterogeneity: *het,
                        aggregator: *agg,
                        config: self.cell_config(attack, *het, *agg),
                    });
                }
            }
        }
        out
    }

    pub fn cell_config(
        &self,
        attack: &AttackScenario,
        het: HeterogeneityLevel,
        aggregator: AggregatorKind,
    ) -> SimulationConfig {
        SimulationConfig {
            heterogeneity: het.to_spec(self.quantity_skew),
            attack: AttackSpec {
                faulty_count: attack.faulty,
                malicious_count: attack.malicious,
                ..self.base.attack.clone()
            },
            aggregator,
            ..self.base.clone()
        }
    }

    /// Canonical TOML with every default written out.
    pub fn to_toml(&self) -> String {
        let b = &self.base;
        let mk = self.mkrum;
        let assignment = match b.attack.assignment {
            RoleAssignment::SeededRandom => "seeded_random",
            _ => "paper_pattern",
        };
        let file = ManifestFile {
            output_dir: Some(self.output_dir.clone()),
            workers: Some(self.workers),
            data: self.data.clone(),
            simulation: Some(SimulationFile {
                num_clients: Some(b.num_clients),
                rounds: Some(b.rounds),
                client_fraction: Some(b.client_fraction),
                seeds: Some(b.seeds.clone()),
                layer_dims: Some(b.layer_dims.clone()),
                distill_set_size: Some(b.distill_set_size),
                train_subsample: b.train_subsample,
                median_rule: Some(median_rule_name(b.median_rule).into()),
                quantity_skew: Some(self.quantity_skew),
                local: Some(LocalFile {
                    learning_rate: Some(b.local.learning_rate),
                    epochs: Some(b.local.epochs),
                    batch_size: Some(b.local.batch_size),
                }),
                distill: Some(DistillFile {
                    epochs: Some(b.distill.epochs),
                    learning_rate: Some(b.distill.learning_rate),
                    batch_size: Some(b.distill.batch_size),
                    temperature: Some(b.distill.temperature),
                }),
                attack: Some(AttackFile {
                    noise_variance: Some(b.attack.noise_variance),
                    noise_scale: Some(noise_scale_name(b.attack.noise_scale).into()),
                    faulty_mode: Some(faulty_mode_name(b.attack.faulty_mode).into()),
                    flip_target_label: Some(b.attack.flip_target_label),
                    assignment: Some(assignment.into()),
                }),
                mkrum: Some(MkrumFile {
                    f: mk.f,
                    m: mk.m,
                    unweighted: Some(mk.unweighted),
                }),
            }),
            grid: Some(GridFile {
                attacks: Some(
                    self.attacks
                        .iter()
                        .map(|a| AttackRowFile {
                            label: a.label.clone(),
                            faulty: a.faulty,
                            malicious: a.malicious,
                        })
                        .collect(),
                ),
                heterogeneity: Some(self.heterogeneity.iter().map(|h| h.label()).collect()),
                aggregators: Some(self.aggregators.iter().map(|a| a.name().to_string()).collect()),
            }),
        };
        let mut out = String::new();
        let _ = writeln!(out, "# normalized fedrad manifest");
        out.push_str(&toml::to_string(&file).expect("manifest serializes"));
        out
    }
}
