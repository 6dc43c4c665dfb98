mod common;

use std::fs;

use fedrad::manifest::{AttackScenario, ExperimentManifest, HeterogeneityLevel};
use fedrad::report::{format_table, read_summary_csv};
use fedrad::runner::{bold_within_group, load_data, run_matrix, run_matrix_with_data};
use fedrad::svg::{emit_curve_svg, CurveSeries};
use fedrad_core::aggregate::AggregatorKind;
use tempfile::tempdir;

fn series(label: &str, values: Vec<f64>) -> CurveSeries {
    CurveSeries {
        label: label.into(),
        values,
    }
}

#[test]
fn svg_is_well_formed_and_deterministic() {
    let curves = [
        series("fedavg", vec![0.5, 0.2, 0.1]),
        series("fedrad <median>", vec![0.6, 0.3, 0.05]),
    ];
    let a = emit_curve_svg("10 faulty & iid", &curves);
    assert_eq!(a, emit_curve_svg("10 faulty & iid", &curves));
    let doc = roxmltree::Document::parse(&a).unwrap();
    let polylines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(polylines.len(), 2);
    let text: String = doc.descendants().filter_map(|n| n.text()).collect();
    assert!(text.contains("fedrad <median>") && text.contains("round") && text.contains("test error rate"));
}

#[test]
fn flat_trace_lies_on_its_gridline() {
    let svg = emit_curve_svg("flat", &[series("collapsed", vec![0.9; 5])]);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let grid_y: Vec<String> = doc
        .descendants()
        .filter(|n| n.has_tag_name("line") && n.parent().and_then(|p| p.attribute("class")) == Some("grid"))
        .map(|n| n.attribute("y1").unwrap().to_string())
        .collect();
    assert_eq!(grid_y.len(), 11);
    let points = doc.descendants().find(|n| n.has_tag_name("polyline")).unwrap().attribute("points").unwrap();
    let ys: Vec<f64> = points.split(' ').map(|p| p.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(ys.iter().all(|y| *y == ys[0]));
    let gridline: f64 = grid_y[9].parse().unwrap();
    assert!((ys[0] - gridline).abs() < 0.01, "{} vs {gridline}", ys[0]);
}

#[test]
fn best_cell_is_always_bold() {
    let groups = [
        vec![Some(vec![0.05, 0.06]), Some(vec![0.9, 0.91]), None],
        vec![Some(vec![0.10, 0.12, 0.11]), Some(vec![0.105, 0.115, 0.12]), Some(vec![0.5, 0.52, 0.51])],
        vec![Some(vec![0.3]), Some(vec![0.2])],
    ];
    assert_eq!(bold_within_group(&groups[0]), vec![true, false, false]);
    assert_eq!(bold_within_group(&groups[1]), vec![true, true, false]);
    assert_eq!(bold_within_group(&groups[2]), vec![false, true]);
    assert_eq!(bold_within_group(&[None, None]), vec![false, false]);
}

#[test]
fn singleton_grid_writes_one_row_and_its_artifacts() {
    let dir = tempdir().unwrap();
    common::write_blob_mnist(dir.path());
    let text = common::tiny_manifest(
        dir.path(),
        "[grid]\nheterogeneity = [\"alpha=0.5\"]\naggregators = [\"fedrad\"]\n[[grid.attacks]]\nlabel = \"1 faulty\"\nfaulty = 1\n",
    );
    let path = dir.path().join("m.toml");
    fs::write(&path, text).unwrap();
    let manifest = ExperimentManifest::load(&path).unwrap();
    let outcome = run_matrix(&manifest).unwrap();
    assert_eq!(outcome.failed_cells(), 0);
    let out = dir.path().join("out");
    let rows = read_summary_csv(&out.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].bold);
    assert_eq!(rows[0].aggregator, "fedrad");
    let cell = out.join("cells").join("1_faulty__alpha_0.5__fedrad");
    let trace = fs::read_to_string(cell.join("trace_seed0.csv")).unwrap();
    assert!(trace.starts_with("round,error_rate\n0,"));
    assert_eq!(trace.lines().count(), 1 + 4);
    let hist = fs::read_to_string(cell.join("histogram_seed1_round3.csv")).unwrap();
    assert!(hist.starts_with("client_id,role,median_count\n"));
    assert_eq!(hist.lines().filter(|l| l.contains(",faulty,")).count(), 1);
    let total: u64 = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 50 * 10);
    roxmltree::Document::parse(&fs::read_to_string(cell.join("curve.svg")).unwrap()).unwrap();
    assert_eq!(fs::read_dir(out.join("curves")).unwrap().count(), 1);
    assert!(format_table(&rows).contains("fedrad"));

    // a second run reproduces every artifact byte for byte
    let first_summary = fs::read(out.join("summary.csv")).unwrap();
    let first_svg = fs::read(cell.join("curve.svg")).unwrap();
    run_matrix(&manifest).unwrap();
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), first_summary);
    assert_eq!(fs::read(cell.join("curve.svg")).unwrap(), first_svg);
    assert_eq!(fs::read_to_string(cell.join("trace_seed0.csv")).unwrap(), trace);
}

#[test]
fn failing_cells_are_recorded_and_the_grid_continues() {
    let dir = tempdir().unwrap();
    let data = load_data(&common::write_blob_mnist(dir.path())).unwrap();
    let mut manifest = ExperimentManifest::with_data(fedrad::manifest::DataPaths::mnist_in(dir.path()));
    manifest.output_dir = dir.path().join("out");
    manifest.base.num_clients = 4;
    manifest.base.rounds = 1;
    manifest.base.seeds = vec![0];
    manifest.base.layer_dims = vec![16, 10];
    manifest.base.distill_set_size = 0;
    manifest.attacks = vec![AttackScenario::new("none", 0, 0)];
    manifest.heterogeneity = vec![HeterogeneityLevel::Iid];
    manifest.aggregators = vec![AggregatorKind::FedAvg, AggregatorKind::FedDf];
    let outcome = run_matrix_with_data(&manifest, &data).unwrap();
    assert_eq!(outcome.failed_cells(), 1);
    let rows = read_summary_csv(&manifest.output_dir.join("summary.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].mean_error.is_some() && rows[0].bold);
    assert!(rows[1].mean_error.is_none() && !rows[1].bold);
    let cells = fs::read_to_string(manifest.output_dir.join("cells.csv")).unwrap();
    assert!(cells.contains("failed") && cells.contains("distill_set_size"));
    assert!(format_table(&rows).contains("failed"));
}
