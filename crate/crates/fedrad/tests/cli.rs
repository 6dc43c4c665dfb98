mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn fedrad(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedrad"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn validate_prints_the_normalized_manifest() {
    let dir = tempdir().unwrap();
    let data_only = "[data]\ntrain_images = \"a\"\ntrain_labels = \"b\"\ntest_images = \"c\"\ntest_labels = \"d\"\n";
    fs::write(dir.path().join("m.toml"), data_only).unwrap();
    let out = fedrad(&["validate", "m.toml"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("[simulation.distill]") && stdout.contains("temperature = 1.0"));
    assert!(text(&out.stderr).contains("84 cells"));
}

#[test]
fn validate_rejects_unknown_keys() {
    let dir = tempdir().unwrap();
    let body = common::tiny_manifest(Path::new("data"), "[grid]\naggregator = [\"fedavg\"]");
    fs::write(dir.path().join("m.toml"), body).unwrap();
    let out = fedrad(&["validate", "m.toml"], dir.path());
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("aggregator") && err.contains("line"), "{err}");
}

#[test]
fn run_then_summarize() {
    let dir = tempdir().unwrap();
    common::write_blob_mnist(dir.path());
    let grid = "[grid]\nheterogeneity = [\"iid\"]\naggregators = [\"fedavg\", \"comed\"]\n[[grid.attacks]]\nlabel = \"none\"\n";
    fs::write(dir.path().join("m.toml"), common::tiny_manifest(dir.path(), grid)).unwrap();
    let out = fedrad(&["run", "m.toml", "--output", "res"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    assert!(summary.starts_with("attack,heterogeneity,aggregator,mean_error,std_error,bold\n"));
    assert_eq!(summary.lines().count(), 3);
    let out = fedrad(&["summarize", "res"], dir.path());
    assert!(out.status.success());
    let table = text(&out.stdout);
    assert!(table.contains("comed") && table.contains("iid"));
}

#[test]
fn run_exits_nonzero_when_data_is_missing() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("m.toml"), common::tiny_manifest(Path::new("nowhere"), "[grid]\naggregators = [\"fedavg\"]\n[[grid.attacks]]\nlabel = \"none\"\n")).unwrap();
    let out = fedrad(&["run", "m.toml"], dir.path());
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("nowhere"));
}

#[test]
fn fetch_data_verifies_checksums() {
    let dir = tempdir().unwrap();
    let src = dir.path().join("src");
    common::write_blob_mnist(&src);
    let out = fedrad(&["fetch-data", "dest", "--from", "src"], dir.path());
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("checksum mismatch"), "{}", text(&out.stderr));

    let real = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist");
    if real.join("t10k-labels-idx1-ubyte").exists() {
        let out = fedrad(&["fetch-data", "dest", "--from", real.to_str().unwrap()], dir.path());
        assert!(out.status.success(), "{}", text(&out.stderr));
        assert_eq!(text(&out.stdout).lines().count(), 4);
    }
}
