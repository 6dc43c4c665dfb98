use fedrad_core::aggregate::{
    aggregate, comed, fedavg, feddf, feddfmed, fedrad, fedradnoise, krum_scores, mkrum, mkrum_select,
    AggregationInput, AggregatorKind,
};
use fedrad_core::data::{DistillSource, ServerDistillSet};
use fedrad_core::distill::{mean_logits, median_logits, pseudolabels_mean, pseudolabels_median, DistillConfig};
use fedrad_core::nn::{param_count, softmax, ModelParams, RealMatrix};
use fedrad_core::scoring::{adjust_scores_by_size, median_scores, LogitEnsemble};
use proptest::prelude::*;

const TABLE_ROWS: [([f64; 10], f64, f64); 5] = [
    ([1., 1., 2., 2., 3., 3., 4., 4., 5., 5.], 3.0, 3.0),
    ([1., 1., 2., 2., 3., 3., 4., 4., 5., 15.], 4.0, 3.0),
    ([1., 1., 2., 2., 3., 3., 14., 14., 15., 15.], 7.0, 3.0),
    ([1., 1., 2., 2., 3., 3., 4., 4., 5., 1005.], 103.0, 3.0),
    ([1., 1., 2., 2., 3., 3., 1004., 1004., 1005., 1005.], 403.0, 3.0),
];

fn scalar_models(values: &[f64]) -> LogitEnsemble {
    LogitEnsemble::new(values.iter().map(|&v| RealMatrix::new(1, 1, vec![v]).unwrap()).collect()).unwrap()
}

/// Ensemble from `cells[model][point * classes + class]`.
fn ensemble(cells: &[Vec<f64>], points: usize, classes: usize) -> LogitEnsemble {
    LogitEnsemble::new(cells.iter().map(|c| RealMatrix::new(points, classes, c.clone()).unwrap()).collect()).unwrap()
}

/// Sort (value, index) pairs, take the lower median value, return the
/// smallest index holding it.
#[allow(clippy::needless_range_loop)]
fn brute_force_counts(cells: &[Vec<f64>]) -> Vec<u64> {
    let m = cells.len();
    let mut counts = vec![0u64; m];
    for j in 0..cells[0].len() {
        let mut pairs: Vec<(f64, usize)> = (0..m).map(|k| (cells[k][j], k)).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let median = pairs[m.div_ceil(2) - 1].0;
        let owner = (0..m).find(|&k| cells[k][j] == median).unwrap();
        counts[owner] += 1;
    }
    counts
}

fn distill_set(rows: usize, dim: usize, f: impl FnMut(usize, usize) -> f64) -> ServerDistillSet {
    ServerDistillSet::new(RealMatrix::from_fn(rows, dim, f), DistillSource::HeldOutReal)
}

fn no_kd() -> DistillConfig {
    DistillConfig {
        epochs: 0,
        ..DistillConfig::default()
    }
}

#[test]
fn mean_and_median_logits_reproduce_the_robustness_table() {
    for (row, mean, median) in TABLE_ROWS {
        let e = scalar_models(&row);
        assert_eq!(mean_logits(&e).get(0, 0), mean);
        assert_eq!(median_logits(&e).get(0, 0), median);
    }
}

#[test]
fn median_pseudolabels_ignore_planted_strong_attackers() {
    // class 0 carries a table row, class 1 is a constant 0 logit
    let build = |row: &[f64; 10]| {
        let cells: Vec<Vec<f64>> = row.iter().map(|&v| vec![v, 0.0]).collect();
        ensemble(&cells, 1, 2)
    };
    let clean = build(&TABLE_ROWS[0].0);
    let attacked = build(&TABLE_ROWS[4].0);
    let reference = softmax(&RealMatrix::new(1, 2, vec![3.0, 0.0]).unwrap()).unwrap();
    assert_eq!(pseudolabels_median(&attacked).unwrap().probs, reference);
    assert_eq!(pseudolabels_median(&clean).unwrap().probs, reference);
    assert_eq!(pseudolabels_mean(&clean).unwrap().probs, reference);
    let shifted = pseudolabels_mean(&attacked).unwrap().probs;
    assert!((shifted.get(0, 0) - reference.get(0, 0)).abs() > 0.04);
    assert_eq!(shifted.get(0, 0), 1.0);
}

#[test]
fn lower_median_ownership_examples() {
    assert_eq!(median_scores(&scalar_models(&[1.0, 2.0, 3.0, 4.0])).0.scores, vec![0.0, 1.0, 0.0, 0.0]);
    assert_eq!(median_scores(&scalar_models(&[1.0, 2.0, 3.0])).1.counts, vec![0, 1, 0]);
    assert_eq!(
        adjust_scores_by_size(&fedrad_core::scoring::ScoreVector { scores: vec![0.5, 0.5] }, &[30, 10])
            .unwrap()
            .scores,
        vec![0.75, 0.25]
    );
}

/// Three clients with architecture [2, 2] and a two-point server set, traced
/// by hand through scoring, size adjustment and averaging.
#[test]
fn fedrad_matches_a_hand_trace() {
    let arch = [2, 2];
    // layout: W row-major (2x2) then b (2)
    let clients = [
        ModelParams::new(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        ModelParams::new(vec![2.0, 0.0, 0.0, 3.0, 0.5, -0.5]),
        ModelParams::new(vec![-1.0, 1.0, 1.0, 0.0, 1.0, 1.0]),
    ];
    let sizes = [10, 20, 30];
    let set = distill_set(2, 2, |r, c| if r == c { 1.0 } else { 0.5 * r as f64 });
    // x0 = (1, 0), x1 = (0.5, 1)
    // client 0: x0 -> (1, 0)      x1 -> (0.5, 1)
    // client 1: x0 -> (2.5, -0.5) x1 -> (1.5, 2.5)
    // client 2: x0 -> (0, 2)      x1 -> (1.5, 1.5)
    // medians: (x0,c0) 1 -> k0; (x0,c1) 0 -> k0; (x1,c0) 1.5 -> k1 (first holder); (x1,c1) 1.5 -> k2
    let counts = [2.0, 1.0, 1.0];
    let raw: Vec<f64> = counts.iter().map(|c| c / 4.0).collect();
    let product: Vec<f64> = raw.iter().zip(sizes).map(|(p, n)| p * n as f64).collect();
    let total: f64 = product.iter().sum();
    let weights: Vec<f64> = product.iter().map(|p| p / total).collect();
    let expected: Vec<f64> = (0..6)
        .map(|j| (0..3).map(|k| weights[k] * clients[k].as_slice()[j]).sum())
        .collect();

    let mut input = AggregationInput::new(&clients, &sizes, &arch);
    input.distill_set = Some(&set);
    input.distill = no_kd();
    let out = fedrad(&input).unwrap();
    assert_eq!(out.histogram.as_ref().unwrap().counts, vec![2, 1, 1]);
    for (a, b) in out.scores.unwrap().scores.iter().zip(&weights) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in out.params.as_slice().iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn fedrad_with_a_single_median_owner_returns_that_client() {
    let arch = [1, 3];
    let clients: Vec<ModelParams> = [-1.0, 0.0, 1.0]
        .iter()
        .map(|&b| ModelParams::new(vec![0.3, -0.2, 0.1, b, b, b]))
        .collect();
    let sizes = [5, 50, 500];
    let set = distill_set(4, 1, |r, _| r as f64);
    let mut input = AggregationInput::new(&clients, &sizes, &arch);
    input.distill_set = Some(&set);
    input.distill = no_kd();
    let out = fedrad(&input).unwrap();
    assert_eq!(out.scores.unwrap().scores, vec![0.0, 1.0, 0.0]);
    assert_eq!(out.params, clients[1]);
}

#[test]
fn kd_free_distillation_rules_reduce_to_fedavg() {
    let arch = [3, 2];
    let clients: Vec<ModelParams> = (0..4)
        .map(|k| ModelParams::new((0..8).map(|j| ((k * 8 + j) as f64).sin()).collect()))
        .collect();
    let sizes = [3, 1, 4, 1];
    let set = distill_set(5, 3, |r, c| (r + c) as f64 * 0.1);
    let mut input = AggregationInput::new(&clients, &sizes, &arch);
    input.distill_set = Some(&set);
    input.distill = no_kd();
    let avg = fedavg(&input).unwrap();
    assert_eq!(feddf(&input).unwrap(), avg);
    assert_eq!(feddfmed(&input).unwrap(), avg);
    let noisy = fedradnoise(&input).unwrap();
    assert_eq!(noisy.params.len(), avg.len());
    assert_eq!(fedradnoise(&input).unwrap(), noisy);
}

#[test]
fn distillation_rules_require_a_server_set() {
    let arch = [1, 2];
    let clients = vec![ModelParams::new(vec![0.0; 4]); 3];
    let input = AggregationInput::new(&clients, &[1, 1, 1], &arch);
    for kind in [AggregatorKind::FedDf, AggregatorKind::FedDfMed, AggregatorKind::FedRad] {
        assert!(aggregate(&kind, &input).is_err(), "{kind}");
    }
    assert!(aggregate(&AggregatorKind::FedRadNoise, &input).is_ok());
}

#[test]
fn comed_matches_sort_oracle() {
    let clients: Vec<ModelParams> = (0..9)
        .map(|k| ModelParams::new((0..100).map(|j| ((k * 131 + j * 17) as f64 * 0.37).sin() * 10.0).collect()))
        .collect();
    let arch = [9, 10];
    assert_eq!(param_count(&arch), 100);
    let out = comed(&AggregationInput::new(&clients, &[1; 9], &arch)).unwrap();
    for j in 0..100 {
        let mut column: Vec<f64> = clients.iter().map(|c| c.as_slice()[j]).collect();
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(out.as_slice()[j], column[4]);
    }
    let pair = [ModelParams::new(vec![0.0]), ModelParams::new(vec![1.0])];
    assert_eq!(comed(&AggregationInput::new(&pair, &[1, 1], &[0, 1])).unwrap().as_slice(), &[0.5]);
}

#[test]
fn mkrum_never_selects_a_far_outlier() {
    let mut clients: Vec<ModelParams> = (0..5)
        .map(|k| ModelParams::new(vec![k as f64 * 0.1, 1.0 - k as f64 * 0.05, 0.3]))
        .collect();
    clients.insert(2, ModelParams::new(vec![100.0, -80.0, 55.0]));
    let chosen = mkrum_select(&clients, 1, 3).unwrap();
    assert!(!chosen.contains(&2), "{chosen:?}");
    let scores = krum_scores(&clients, 1).unwrap();
    assert!(scores.iter().enumerate().all(|(i, s)| i == 2 || *s < scores[2]));
    let input = AggregationInput::new(&clients, &[1; 6], &[2, 1]);
    let out = mkrum(&input, 1, 3).unwrap();
    assert!(out.as_slice()[0] < 1.0);
    assert!(krum_scores(&clients[..3], 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn median_scores_match_brute_force(m in 1usize..=7, points in 1usize..5, classes in 1usize..5, seed in any::<u64>()) {
        // small integer values force frequent ties
        let cells: Vec<Vec<f64>> = (0..m)
            .map(|k| (0..points * classes).map(|j| ((seed.wrapping_mul(k as u64 + 1) >> (j % 60)) % 4) as f64).collect())
            .collect();
        let (scores, hist) = median_scores(&ensemble(&cells, points, classes));
        prop_assert_eq!(&hist.counts, &brute_force_counts(&cells));
        prop_assert_eq!(hist.total, (points * classes) as u64);
        prop_assert_eq!(hist.counts.iter().sum::<u64>(), hist.total);
        prop_assert!((scores.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn median_scores_are_scale_invariant_and_permutation_equivariant(
        cells in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 6), 2..8),
        scale in 0.01f64..100.0,
        rotate in 0usize..8,
    ) {
        let m = cells.len();
        let (_, base) = median_scores(&ensemble(&cells, 2, 3));
        let scaled: Vec<Vec<f64>> = cells.iter().map(|c| c.iter().map(|v| v * scale).collect()).collect();
        prop_assert_eq!(&median_scores(&ensemble(&scaled, 2, 3)).1.counts, &base.counts);
        // continuous draws are tie-free, so a permutation permutes the counts
        let r = rotate % m;
        let mut rotated = cells.clone();
        rotated.rotate_left(r);
        let mut expected = base.counts.clone();
        expected.rotate_left(r);
        prop_assert_eq!(median_scores(&ensemble(&rotated, 2, 3)).1.counts, expected);
    }

    #[test]
    fn value_median_survives_minority_replacement(
        values in prop::collection::vec(-10.0f64..10.0, 3..12),
        planted in prop::collection::vec(-1e6f64..1e6, 6),
        upward in 1.0f64..1e6,
    ) {
        let m = values.len();
        let minority = m.div_ceil(2) - 1;
        let original = median_logits(&scalar_models(&values)).get(0, 0);
        let mut attacked = values.clone();
        for (k, v) in planted.iter().take(minority).enumerate() {
            attacked[k] = *v;
        }
        let untouched = &values[minority..];
        let lo = untouched.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = untouched.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let median = median_logits(&scalar_models(&attacked)).get(0, 0);
        prop_assert!(median >= lo && median <= hi);

        // values above both middle order statistics pushed further up: median unchanged
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut pushed = values.clone();
        let mut above: Vec<usize> = (0..m).filter(|&k| values[k] > sorted[m / 2]).collect();
        above.truncate(minority);
        for &k in &above {
            pushed[k] += upward;
        }
        prop_assert_eq!(median_logits(&scalar_models(&pushed)).get(0, 0), original);
        if !above.is_empty() {
            let mean_shift = mean_logits(&scalar_models(&pushed)).get(0, 0) - mean_logits(&scalar_models(&values)).get(0, 0);
            prop_assert!(mean_shift >= upward / m as f64 * 0.999);
        }
    }

    #[test]
    fn comed_stays_inside_the_honest_envelope(
        m in 3usize..10,
        coords in 1usize..20,
        seed in any::<u64>(),
        outlier in prop::sample::select(vec![-1e9f64, -1e3, 1e3, 1e9]),
    ) {
        let mut clients: Vec<Vec<f64>> = (0..m)
            .map(|k| (0..coords).map(|j| ((seed % 1000) as f64 + (k * coords + j) as f64 * 0.77).sin()).collect())
            .collect();
        let minority = m.div_ceil(2) - 1;
        let mut poisoned = vec![vec![false; coords]; m];
        for j in 0..coords {
            for t in 0..minority {
                let k = (j + t * 3 + seed as usize) % m;
                if !poisoned[k][j] {
                    clients[k][j] = outlier * (1.0 + t as f64);
                    poisoned[k][j] = true;
                }
            }
        }
        let params: Vec<ModelParams> = clients.iter().cloned().map(ModelParams::new).collect();
        let sizes = vec![1; m];
        let arch = [coords - 1, 1];
        prop_assume!(param_count(&arch) == coords);
        let out = comed(&AggregationInput::new(&params, &sizes, &arch)).unwrap();
        for j in 0..coords {
            let honest: Vec<f64> = (0..m).filter(|&k| !poisoned[k][j]).map(|k| clients[k][j]).collect();
            let lo = honest.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = honest.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out.as_slice()[j] >= lo && out.as_slice()[j] <= hi);
        }
    }

    #[test]
    fn fedrad_with_uniform_median_counts_is_fedavg(
        sizes in prop::collection::vec(1usize..1000, 3),
        weights in prop::collection::vec(-3.0f64..3.0, 9),
    ) {
        // zero input: logits are the biases; a rotated bias pattern makes
        // each client the median of exactly one class
        let arch = [3, 3];
        let pattern = [[1.0, 2.0, 3.0], [2.0, 3.0, 1.0], [3.0, 1.0, 2.0]];
        let clients: Vec<ModelParams> = (0..3)
            .map(|k| {
                let mut v: Vec<f64> = weights.iter().map(|w| w * (k as f64 + 1.0)).collect();
                v.extend((0..3).map(|c| pattern[c][k]));
                ModelParams::new(v)
            })
            .collect();
        let set = distill_set(2, 3, |_, _| 0.0);
        let mut input = AggregationInput::new(&clients, &sizes, &arch);
        input.distill_set = Some(&set);
        input.distill = no_kd();
        let out = fedrad(&input).unwrap();
        prop_assert_eq!(&out.histogram.unwrap().counts, &vec![2, 2, 2]);
        let avg = fedavg(&input).unwrap();
        for (a, b) in out.params.as_slice().iter().zip(avg.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn every_aggregator_preserves_parameter_length(seed in any::<u64>(), m in 4usize..7) {
        let arch = [3, 4, 2];
        let n = param_count(&arch);
        let clients: Vec<ModelParams> = (0..m)
            .map(|k| ModelParams::new((0..n).map(|j| ((seed % 997) as f64 + (k * n + j) as f64).sin()).collect()))
            .collect();
        let sizes: Vec<usize> = (1..=m).collect();
        let set = distill_set(6, 3, |r, c| ((r * 3 + c) as f64).cos());
        let mut input = AggregationInput::new(&clients, &sizes, &arch);
        input.distill_set = Some(&set);
        input.distill = DistillConfig { epochs: 1, batch_size: 4, ..DistillConfig::default() };
        input.attacker_count = 1;
        input.noise_set_size = 8;
        for kind in AggregatorKind::ALL {
            let out = aggregate(&kind, &input).unwrap();
            prop_assert_eq!(out.params.len(), n);
            prop_assert!(out.params.as_slice().iter().all(|v| v.is_finite()));
        }
        let lo: Vec<f64> = (0..n).map(|j| clients.iter().map(|c| c.as_slice()[j]).fold(f64::INFINITY, f64::min)).collect();
        let hi: Vec<f64> = (0..n).map(|j| clients.iter().map(|c| c.as_slice()[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
        for kind in [AggregatorKind::FedAvg, AggregatorKind::Comed] {
            let out = aggregate(&kind, &input).unwrap().params;
            for j in 0..n {
                prop_assert!(out.as_slice()[j] >= lo[j] - 1e-12 && out.as_slice()[j] <= hi[j] + 1e-12);
            }
        }
    }
}
