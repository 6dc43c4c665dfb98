//! Reading `summary.csv` back and printing it as a results table.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::runner::SummaryRow;

pub const SUMMARY_HEADER: [&str; 6] = ["attack", "heterogeneity", "aggregator", "mean_error", "std_error", "bold"];

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("unexpected header {header:?}"),
        });
    }
    let number = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
    let mut rows = Vec::new();
    for record in r.records() {
        let rec = record?;
        rows.push(SummaryRow {
            attack: rec[0].to_string(),
            heterogeneity: rec[1].to_string(),
            aggregator: rec[2].to_string(),
            mean_error: number(&rec[3]),
            std_error: number(&rec[4]),
            bold: &rec[5] == "true",
        });
    }
    Ok(rows)
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

/// Rows are (attack, aggregator), columns are heterogeneity levels. Cells
/// read `mean ± std` in percent; `*` marks bold and `failed` a failed cell.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let hets = first_seen(rows.iter().map(|r| r.heterogeneity.as_str()));
    let attacks = first_seen(rows.iter().map(|r| r.attack.as_str()));
    let aggs = first_seen(rows.iter().map(|r| r.aggregator.as_str()));
    let mut out = String::new();
    let _ = write!(out, "| {:<24} | {:<12} |", "attack", "aggregator");
    for h in &hets {
        let _ = write!(out, " {h:>16} |");
    }
    out.push('\n');
    let _ = write!(out, "|{}|{}|", "-".repeat(26), "-".repeat(14));
    for _ in &hets {
        let _ = write!(out, "{}|", "-".repeat(18));
    }
    out.push('\n');
    for attack in &attacks {
        for agg in &aggs {
            let line: Vec<Option<&SummaryRow>> = hets
                .iter()
                .map(|h| {
                    rows.iter()
                        .find(|r| r.attack == *attack && r.aggregator == *agg && r.heterogeneity == *h)
                })
                .collect();
            if line.iter().all(Option::is_none) {
                continue;
            }
            let _ = write!(out, "| {attack:<24} | {agg:<12} |");
            for cell in line {
                let text = match cell {
                    None => String::new(),
                    Some(SummaryRow {
                        mean_error: Some(m),
                        std_error: Some(s),
                        bold,
                        ..
                    }) => format!("{}{:.2} ± {:.2}", if *bold { "*" } else { "" }, m * 100.0, s * 100.0),
                    Some(_) => "failed".to_string(),
                };
                let _ = write!(out, " {text:>16} |");
            }
            out.push('\n');
        }
    }
    out
}
