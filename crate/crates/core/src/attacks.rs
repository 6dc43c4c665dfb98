//! Adversarial client behavior.
//!
//! Faulty (Byzantine) clients return parameters with large Gaussian noise
//! added; malicious clients train on data whose labels were all flipped to one
//! target class. Roles are fixed for a whole experiment.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::LabeledDataset;
use crate::nn::ModelParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClientRole {
    Honest,
    Faulty,
    Malicious,
}

impl ClientRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClientRole::Honest => "honest",
            ClientRole::Faulty => "faulty",
            ClientRole::Malicious => "malicious",
        }
    }
}

impl core::fmt::Display for ClientRole {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How attacker slots are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoleAssignment {
    /// Clients 2, 5, 8, ... (every third, zero-based), faulty first. Once
    /// those slots run out the pattern continues at 1, 4, 7, ... and then
    /// 0, 3, 6, ...
    PaperPattern,
    /// Explicit client indices per role.
    Explicit {
        faulty: Vec<usize>,
        malicious: Vec<usize>,
    },
    /// A seeded uniform draw of attacker slots, faulty first.
    SeededRandom,
}

/// Whether `noise_variance` is the per-element variance or standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScale {
    Variance,
    StdDev,
}

/// Faulty clients either train and then corrupt, or skip training entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultyMode {
    TrainThenNoise,
    NoiseOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub faulty_count: usize,
    pub malicious_count: usize,
    pub noise_variance: f64,
    pub noise_scale: NoiseScale,
    pub faulty_mode: FaultyMode,
    pub flip_target_label: usize,
    pub assignment: RoleAssignment,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            faulty_count: 0,
            malicious_count: 0,
            noise_variance: 20.0,
            noise_scale: NoiseScale::Variance,
            faulty_mode: FaultyMode::TrainThenNoise,
            flip_target_label: 0,
            assignment: RoleAssignment::PaperPattern,
        }
    }
}

impl AttackSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn faulty(count: usize) -> Self {
        AttackSpec {
            faulty_count: count,
            ..Self::default()
        }
    }

    pub fn malicious(count: usize) -> Self {
        AttackSpec {
            malicious_count: count,
            ..Self::default()
        }
    }

    pub fn mixed(faulty: usize, malicious: usize) -> Self {
        AttackSpec {
            faulty_count: faulty,
            malicious_count: malicious,
            ..Self::default()
        }
    }

    pub fn attacker_count(&self) -> usize {
        self.faulty_count + self.malicious_count
    }

    /// Per-element noise variance after resolving [`NoiseScale`].
    pub fn effective_variance(&self) -> f64 {
        match self.noise_scale {
            NoiseScale::Variance => self.noise_variance,
            NoiseScale::StdDev => self.noise_variance * self.noise_variance,
        }
    }

    pub fn validate(&self, num_clients: usize) -> Result<()> {
        if self.attacker_count() > num_clients {
            return Err(Error::validation(alloc::format!(
                "{} attackers do not fit in {num_clients} clients",
                self.attacker_count()
            )));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::validation("noise_variance must be positive"));
        }
        Ok(())
    }
}

fn paper_slots(num_clients: usize) -> impl Iterator<Item = usize> {
    [2usize, 1, 0]
        .into_iter()
        .flat_map(move |offset| (offset..num_clients).step_by(3))
}

/// Assign a fixed role to every client.
pub fn assign_roles(num_clients: usize, spec: &AttackSpec, seed: u64) -> Result<Vec<ClientRole>> {
    spec.validate(num_clients)?;
    let mut roles = vec![ClientRole::Honest; num_clients];
    let slots: Vec<usize> = match &spec.assignment {
        RoleAssignment::PaperPattern => {
            let mut s: Vec<usize> = paper_slots(num_clients).take(spec.attacker_count()).collect();
            // faulty before malicious in index order within the primary pattern
            let primary = s.iter().take_while(|&&i| i % 3 == 2).count();
            s[..primary].sort_unstable();
            s
        }
        RoleAssignment::SeededRandom => {
            let mut rng = crate::rng::stream(seed, "roles", &[]);
            let mut s = sample(&mut rng, num_clients, spec.attacker_count()).into_vec();
            s.sort_unstable();
            s
        }
        RoleAssignment::Explicit { faulty, malicious } => {
            if faulty.len() != spec.faulty_count || malicious.len() != spec.malicious_count {
                return Err(Error::validation("explicit role lists disagree with role counts"));
            }
            let mut all: Vec<usize> = faulty.iter().chain(malicious).copied().collect();
            if all.iter().any(|&i| i >= num_clients) {
                return Err(Error::validation("explicit attacker index out of range"));
            }
            let listed = all.clone();
            all.sort_unstable();
            all.dedup();
            if all.len() != listed.len() {
                return Err(Error::validation("a client is listed under two attacker roles"));
            }
            listed
        }
    };
    for (k, &slot) in slots.iter().enumerate() {
        roles[slot] = if k < spec.faulty_count {
            ClientRole::Faulty
        } else {
            ClientRole::Malicious
        };
    }
    Ok(roles)
}

/// `params + N(0, variance)` per element. The input is left untouched.
pub fn apply_faulty<R: Rng + ?Sized>(params: &ModelParams, variance: f64, rng: &mut R) -> ModelParams {
    let sigma = libm::sqrt(variance);
    let values = params
        .as_slice()
        .iter()
        .map(|&w| {
            let z: f64 = StandardNormal.sample(rng);
            w + sigma * z
        })
        .collect();
    ModelParams::new(values)
}

/// Replace every label by `target_label`.
pub fn apply_malicious(dataset: &LabeledDataset, target_label: usize) -> Result<LabeledDataset> {
    if target_label >= dataset.class_count() {
        return Err(Error::validation(alloc::format!(
            "flip target {target_label} out of range for {} classes",
            dataset.class_count()
        )));
    }
    dataset.with_labels(vec![target_label; dataset.len()])
}
