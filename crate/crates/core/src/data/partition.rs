use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{DistillSource, LabeledDataset, ServerDistillSet};
use crate::rng::stream;
use crate::{Error, Result};

/// Relative size jitter (±10%) applied per client in the IID split.
pub const DEFAULT_QUANTITY_SKEW: f64 = 0.1;

/// Resampling attempts before a Dirichlet split gives up on empty clients.
pub const MAX_PARTITION_RETRIES: usize = 100;

/// One client's training data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub client_id: usize,
    pub dataset: LabeledDataset,
}

impl ClientShard {
    pub fn size(&self) -> usize {
        self.dataset.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Heterogeneity {
    /// Shuffled near-equal split with a multiplicative size jitter in
    /// `[1 - quantity_skew, 1 + quantity_skew]`.
    Iid { quantity_skew: f64 },
    /// Per-class proportions drawn from a symmetric `Dir(alpha)`.
    Dirichlet { alpha: f64 },
}

impl Heterogeneity {
    pub fn iid() -> Self {
        Heterogeneity::Iid {
            quantity_skew: DEFAULT_QUANTITY_SKEW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub num_clients: usize,
    pub heterogeneity: Heterogeneity,
    pub rng_seed: u64,
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::validation("num_clients must be at least 1"));
        }
        match self.heterogeneity {
            Heterogeneity::Dirichlet { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::validation("Dirichlet alpha must be positive and finite"))
            }
            Heterogeneity::Iid { quantity_skew } if !(0.0..1.0).contains(&quantity_skew) => {
                Err(Error::validation("quantity_skew must be in [0, 1)"))
            }
            _ => Ok(()),
        }
    }
}

pub fn partition(dataset: &LabeledDataset, spec: &PartitionSpec) -> Result<Vec<ClientShard>> {
    spec.validate()?;
    match spec.heterogeneity {
        Heterogeneity::Iid { quantity_skew } => {
            iid_partition(dataset, spec.num_clients, spec.rng_seed, quantity_skew)
        }
        Heterogeneity::Dirichlet { alpha } => {
            dirichlet_partition(dataset, spec.num_clients, alpha, spec.rng_seed)
        }
    }
}

/// Split `total` into integer parts proportional to `weights`.
///
/// Floors first, then hands the leftover units to the largest fractional
/// remainders (ties to the lowest index). The parts always sum to `total`.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    if !(sum > 0.0) {
        let mut out = vec![0; weights.len()];
        out[0] = total;
        return out;
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut parts: Vec<usize> = exact.iter().map(|e| libm::floor(*e) as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - libm::floor(exact[a]);
        let fb = exact[b] - libm::floor(exact[b]);
        fb.partial_cmp(&fa).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    // floor can only under-assign, by fewer than weights.len() units
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    parts
}

fn shards_from_groups(dataset: &LabeledDataset, groups: Vec<Vec<usize>>) -> Vec<ClientShard> {
    groups
        .into_iter()
        .enumerate()
        .map(|(client_id, idx)| ClientShard {
            client_id,
            dataset: dataset.subset(&idx),
        })
        .collect()
}

/// Shuffled contiguous split with per-client size jitter.
pub fn iid_partition(
    dataset: &LabeledDataset,
    num_clients: usize,
    seed: u64,
    quantity_skew: f64,
) -> Result<Vec<ClientShard>> {
    let n = dataset.len();
    if num_clients == 0 {
        return Err(Error::validation("num_clients must be at least 1"));
    }
    if n < num_clients {
        return Err(Error::validation(alloc::format!(
            "{n} samples cannot fill {num_clients} clients"
        )));
    }
    let mut rng = stream(seed, "iid", &[]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let weights: Vec<f64> = (0..num_clients)
        .map(|_| {
            if quantity_skew > 0.0 {
                1.0 + quantity_skew * (2.0 * rng.random::<f64>() - 1.0)
            } else {
                1.0
            }
        })
        .collect();
    let mut sizes = largest_remainder(n, &weights);
    // keep every client nonempty when n is barely above num_clients
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let donor = (0..sizes.len()).max_by_key(|&i| (sizes[i], usize::MAX - i)).unwrap();
        sizes[donor] -= 1;
        sizes[empty] += 1;
    }
    let mut groups = Vec::with_capacity(num_clients);
    let mut start = 0;
    for s in sizes {
        groups.push(order[start..start + s].to_vec());
        start += s;
    }
    Ok(shards_from_groups(dataset, groups))
}

/// Label-skewed split: each class is divided among clients in proportions
/// drawn from a symmetric Dirichlet, resampling when a client ends up empty.
pub fn dirichlet_partition(
    dataset: &LabeledDataset,
    num_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<ClientShard>> {
    if num_clients == 0 {
        return Err(Error::validation("num_clients must be at least 1"));
    }
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|_| Error::validation("Dirichlet alpha must be positive and finite"))?;
    let classes = dataset.class_indices();
    if let Some(c) = classes.iter().position(|g| g.is_empty()) {
        return Err(Error::validation(alloc::format!("class {c} has no samples")));
    }
    for attempt in 0..MAX_PARTITION_RETRIES {
        let mut rng = stream(seed, "dirichlet", &[attempt as u64]);
        let mut groups = vec![Vec::new(); num_clients];
        for class in &classes {
            let mut members = class.clone();
            members.shuffle(&mut rng);
            let props = loop {
                let draws: Vec<f64> = (0..num_clients).map(|_| gamma.sample(&mut rng)).collect();
                // all-underflow draws are possible for tiny alpha
                if draws.iter().sum::<f64>() > 0.0 {
                    break draws;
                }
            };
            let counts = largest_remainder(members.len(), &props);
            let mut start = 0;
            for (client, count) in counts.into_iter().enumerate() {
                groups[client].extend_from_slice(&members[start..start + count]);
                start += count;
            }
        }
        if groups.iter().all(|g| !g.is_empty()) {
            for g in &mut groups {
                g.sort_unstable();
            }
            return Ok(shards_from_groups(dataset, groups));
        }
    }
    Err(Error::Partition(alloc::format!(
        "some client stayed empty after {MAX_PARTITION_RETRIES} Dirichlet draws \
         (alpha={alpha}, clients={num_clients})"
    )))
}

/// Remove `size` random samples from `train` and return them unlabeled.
pub fn carve_server_set(
    train: &LabeledDataset,
    size: usize,
    seed: u64,
) -> Result<(LabeledDataset, ServerDistillSet)> {
    let n = train.len();
    if size >= n {
        return Err(Error::validation(alloc::format!(
            "cannot carve {size} of {n} training samples"
        )));
    }
    if size == 0 {
        let empty = crate::nn::RealMatrix::zeros(0, train.input_dim());
        return Ok((train.clone(), ServerDistillSet::new(empty, DistillSource::HeldOutReal)));
    }
    let mut rng = stream(seed, "carve", &[]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut server = order[..size].to_vec();
    let mut keep = order[size..].to_vec();
    server.sort_unstable();
    keep.sort_unstable();
    let distill = ServerDistillSet::new(
        train.inputs().select_rows(&server),
        DistillSource::HeldOutReal,
    );
    Ok((train.subset(&keep), distill))
}
