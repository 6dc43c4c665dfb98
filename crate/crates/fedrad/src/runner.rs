//! Executes a manifest's grid and writes every artifact.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.normalized.toml
//! summary.csv                     attack,heterogeneity,aggregator,mean_error,std_error,bold
//! cells.csv                       per-cell status, per-seed final errors, collapse flags
//! curves/<attack>__<het>.svg      mean learning curve per aggregator
//! cells/<slug>/trace_seed<S>.csv  round,error_rate (round 0 is the untrained model)
//! cells/<slug>/curve.svg          one polyline per seed
//! cells/<slug>/histogram_seed<S>_round<R>.csv   client_id,role,median_count
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use fedrad_core::scoring::export_histogram;
use fedrad_core::sim::{
    prepare_pool, run_experiment_with_clock, summarize_seeds, Clock, ExperimentData,
    ExperimentResult, ExperimentTrace,
};
use fedrad_core::welch_t_test;
use log::{info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::idx::load_idx;
use crate::manifest::{Cell, DataPaths, ExperimentManifest};
use crate::svg::{write_curve_svg, CurveSeries};

/// Significance level for the "statistically tied with the best" mark.
pub const BOLD_ALPHA: f64 = 0.05;

/// Monotonic wall clock for round timings.
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ns(&self) -> u64 {
        self.0.elapsed().as_nanos() as u64
    }
}

pub fn load_data(paths: &DataPaths) -> Result<ExperimentData> {
    Ok(ExperimentData {
        train: load_idx(&paths.train_images, &paths.train_labels)?,
        test: load_idx(&paths.test_images, &paths.test_labels)?,
    })
}

/// Result of one grid cell across all seeds.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: Cell,
    pub result: std::result::Result<ExperimentResult, String>,
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub attack: String,
    pub heterogeneity: String,
    pub aggregator: String,
    /// `None` for a failed cell, written as `NaN`.
    pub mean_error: Option<f64>,
    pub std_error: Option<f64>,
    pub bold: bool,
}

#[derive(Debug, Clone)]
pub struct MatrixOutcome {
    pub cells: Vec<CellOutcome>,
    pub summary: Vec<SummaryRow>,
    pub output_dir: PathBuf,
}

impl MatrixOutcome {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_err()).count()
    }

    pub fn outcome(&self, attack: &str, heterogeneity: &str, aggregator: &str) -> Option<&CellOutcome> {
        self.cells.iter().find(|c| {
            c.cell.attack.label == attack
                && c.cell.heterogeneity.label() == heterogeneity
                && c.cell.aggregator.name() == aggregator
        })
    }
}

/// Marks which entries are statistically indistinguishable from the best.
///
/// `finals[i]` holds per-seed final errors of one cell, `None` if it failed.
/// The lowest mean is always bold; another cell is bold when a Welch
/// t-test against the best gives p >= [`BOLD_ALPHA`].
pub fn bold_within_group(finals: &[Option<Vec<f64>>]) -> Vec<bool> {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let best = finals
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.as_ref().filter(|v| !v.is_empty()).map(|v| (i, mean(v))))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    let Some(best) = best else {
        return vec![false; finals.len()];
    };
    let best_values = finals[best].as_deref().unwrap_or_default();
    finals
        .iter()
        .enumerate()
        .map(|(i, f)| match f {
            _ if i == best => true,
            Some(v) => welch_t_test(best_values, v)
                .map(|w| w.p_value >= BOLD_ALPHA)
                .unwrap_or(false),
            None => false,
        })
        .collect()
}

/// Summary rows in grid order with bold marks computed per (attack, heterogeneity).
pub fn summarize_cells(cells: &[CellOutcome]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        groups
            .entry((c.cell.attack.label.clone(), c.cell.heterogeneity.label()))
            .or_default()
            .push(i);
    }
    let mut bold = vec![false; cells.len()];
    for members in groups.values() {
        let finals: Vec<Option<Vec<f64>>> = members
            .iter()
            .map(|&i| cells[i].result.as_ref().ok().map(|r| r.final_errors.clone()))
            .collect();
        for (&i, b) in members.iter().zip(bold_within_group(&finals)) {
            bold[i] = b;
        }
    }
    cells
        .iter()
        .zip(bold)
        .map(|(c, bold)| SummaryRow {
            attack: c.cell.attack.label.clone(),
            heterogeneity: c.cell.heterogeneity.label(),
            aggregator: c.cell.aggregator.name().to_string(),
            mean_error: c.result.as_ref().ok().map(|r| r.mean_error),
            std_error: c.result.as_ref().ok().map(|r| r.std_error),
            bold,
        })
        .collect()
}

/// Load the data named in the manifest and run the whole grid.
pub fn run_matrix(manifest: &ExperimentManifest) -> Result<MatrixOutcome> {
    let data = load_data(&manifest.data)?;
    run_matrix_with_data(manifest, &data)
}

/// Run the grid on preloaded data and write all artifacts.
///
/// Partitions are built once per (heterogeneity, seed) and shared by every
/// attack and aggregator. A failing cell is recorded and the rest continue.
pub fn run_matrix_with_data(manifest: &ExperimentManifest, data: &ExperimentData) -> Result<MatrixOutcome> {
    let cells = manifest.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.workers)
        .build()
        .map_err(|e| Error::Runtime(format!("thread pool: {e}")))?;
    let clock = WallClock::new();
    let traces: Vec<Mutex<Vec<std::result::Result<ExperimentTrace, String>>>> =
        cells.iter().map(|_| Mutex::new(Vec::new())).collect();

    for het in &manifest.heterogeneity {
        let members: Vec<usize> = (0..cells.len())
            .filter(|&i| cells[i].heterogeneity == *het)
            .collect();
        for &seed in &manifest.base.seeds {
            let split_config = &cells[members[0]].config;
            let prepared = prepare_pool(split_config, seed, &data.train);
            let prepared = match prepared {
                Ok(p) => p,
                Err(e) => {
                    warn!("partition for {} seed {seed} failed: {e}", het.label());
                    for &i in &members {
                        traces[i].lock().unwrap().push(Err(format!("seed {seed}: {e}")));
                    }
                    continue;
                }
            };
            pool.install(|| {
                members.par_iter().for_each(|&i| {
                    let cell = &cells[i];
                    let started = Instant::now();
                    let outcome = run_experiment_with_clock(&cell.config, seed, &prepared, &data.test, &clock)
                        .map_err(|e| format!("seed {seed}: {e}"));
                    match &outcome {
                        Ok(t) => info!(
                            "{} seed {seed}: final error {:.4} ({:.1}s)",
                            cell.slug(),
                            t.final_error(),
                            started.elapsed().as_secs_f64()
                        ),
                        Err(e) => warn!("{} failed: {e}", cell.slug()),
                    }
                    traces[i].lock().unwrap().push(outcome);
                });
            });
        }
    }

    let outcomes: Vec<CellOutcome> = cells
        .into_iter()
        .zip(traces)
        .map(|(cell, t)| {
            let runs = t.into_inner().unwrap();
            let result = runs
                .into_iter()
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(summarize_seeds);
            CellOutcome { cell, result }
        })
        .collect();
    let summary = summarize_cells(&outcomes);
    let out = MatrixOutcome {
        cells: outcomes,
        summary,
        output_dir: manifest.output_dir.clone(),
    };
    write_artifacts(manifest, &out)?;
    Ok(out)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| format!("{x:.6}"))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["attack", "heterogeneity", "aggregator", "mean_error", "std_error", "bold"])?;
    for r in rows {
        w.write_record([
            r.attack.as_str(),
            r.heterogeneity.as_str(),
            r.aggregator.as_str(),
            &fmt_opt(r.mean_error),
            &fmt_opt(r.std_error),
            if r.bold { "true" } else { "false" },
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(path: &Path, trace: &ExperimentTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["round", "error_rate"])?;
    for r in std::iter::once(&trace.baseline).chain(&trace.rounds) {
        w.write_record([r.round_index.to_string(), format!("{:.6}", r.test_error_rate)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_cell(dir: &Path, cell: &Cell, result: &ExperimentResult) -> Result<()> {
    create_dir(dir)?;
    for trace in &result.traces {
        write_trace_csv(&dir.join(format!("trace_seed{}.csv", trace.seed)), trace)?;
        for round in &trace.rounds {
            if let Some(hist) = &round.histogram {
                let roles: Vec<_> = round.participants.iter().map(|&c| trace.roles[c]).collect();
                let rows = export_histogram(hist, &round.participants, &roles)?;
                let path = dir.join(format!("histogram_seed{}_round{}.csv", trace.seed, round.round_index));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["client_id", "role", "median_count"])?;
                for r in rows {
                    w.write_record([r.client_id.to_string(), r.role.as_str().to_string(), r.median_count.to_string()])?;
                }
                w.flush().map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    let series: Vec<CurveSeries> = result
        .traces
        .iter()
        .map(|t| CurveSeries {
            label: format!("seed {}", t.seed),
            values: t.error_curve(),
        })
        .collect();
    write_curve_svg(&dir.join("curve.svg"), &cell.slug(), &series)
}

/// Per-round mean over seeds.
pub fn mean_curve(result: &ExperimentResult) -> Vec<f64> {
    let rounds = result.traces.iter().map(|t| t.rounds.len()).min().unwrap_or(0);
    (0..rounds)
        .map(|r| {
            result.traces.iter().map(|t| t.rounds[r].test_error_rate).sum::<f64>() / result.traces.len() as f64
        })
        .collect()
}

fn write_artifacts(manifest: &ExperimentManifest, out: &MatrixOutcome) -> Result<()> {
    let root = &out.output_dir;
    create_dir(&root.join("cells"))?;
    create_dir(&root.join("curves"))?;
    let normalized = root.join("manifest.normalized.toml");
    fs::write(&normalized, manifest.to_toml()).map_err(|e| Error::io(&normalized, e))?;
    write_summary_csv(&root.join("summary.csv"), &out.summary)?;

    let details = root.join("cells.csv");
    let mut w = csv::Writer::from_path(&details)?;
    w.write_record([
        "attack",
        "heterogeneity",
        "aggregator",
        "status",
        "final_errors",
        "collapsed_seeds",
        "fallback_rounds",
        "mean_round_seconds",
        "message",
    ])?;
    for c in &out.cells {
        let (attack, het, agg) = (&c.cell.attack.label, c.cell.heterogeneity.label(), c.cell.aggregator.name());
        match &c.result {
            Ok(r) => {
                write_cell(&root.join("cells").join(c.cell.slug()), &c.cell, r)?;
                let finals: Vec<String> = r.final_errors.iter().map(|e| format!("{e:.6}")).collect();
                let collapsed: Vec<String> = r.collapsed_seeds.iter().map(|s| s.to_string()).collect();
                let rounds: Vec<_> = r.traces.iter().flat_map(|t| &t.rounds).collect();
                let fallbacks = rounds.iter().filter(|x| x.score_fallback).count();
                let secs = rounds.iter().map(|x| x.wall_time_ns as f64).sum::<f64>() / 1e9 / rounds.len().max(1) as f64;
                w.write_record([
                    attack.as_str(),
                    &het,
                    agg,
                    "ok",
                    &finals.join(";"),
                    &collapsed.join(";"),
                    &fallbacks.to_string(),
                    &format!("{secs:.3}"),
                    "",
                ])?;
            }
            Err(msg) => {
                w.write_record([attack.as_str(), &het, agg, "failed", "", "", "", "", msg])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&details, e))?;

    let mut groups: BTreeMap<String, (String, Vec<CurveSeries>)> = BTreeMap::new();
    for c in &out.cells {
        if let Ok(r) = &c.result {
            let entry = groups.entry(c.cell.group_slug()).or_insert_with(|| {
                (format!("{}, {}", c.cell.attack.label, c.cell.heterogeneity.label()), Vec::new())
            });
            entry.1.push(CurveSeries {
                label: c.cell.aggregator.name().to_string(),
                values: mean_curve(r),
            });
        }
    }
    for (key, (title, series)) in groups {
        write_curve_svg(&root.join("curves").join(format!("{key}.svg")), &title, &series)?;
    }
    Ok(())
}
