//! Learning-curve plots as standalone SVG.
//!
//! Output is a pure function of the input: fixed precision, fixed palette,
//! no timestamps. The y axis is the test error rate on a fixed [0, 1] scale.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One polyline: error rate per round, starting at round 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub label: String,
    pub values: Vec<f64>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Render `series` as an SVG document.
pub fn emit_curve_svg(title: &str, series: &[CurveSeries]) -> String {
    let rounds = series.iter().map(|s| s.values.len()).max().unwrap_or(0).max(1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |round: usize| {
        if rounds == 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * (round - 1) as f64 / (rounds - 1) as f64
        }
    };
    let y_of = |err: f64| TOP + plot_h * (1.0 - err.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    let _ = writeln!(s, r##"<g class="grid" stroke="#dddddd" stroke-width="1">"##);
    for tick in 0..=10 {
        let y = y_of(tick as f64 / 10.0);
        let _ = writeln!(s, r#"<line x1="{LEFT:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}"/>"#, LEFT + plot_w);
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g class="axes" stroke="#000000" stroke-width="1">"##);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.1}" y1="{TOP:.1}" x2="{LEFT:.1}" y2="{:.1}"/>"#,
        TOP + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    );
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="y-ticks" text-anchor="end">"#);
    for tick in 0..=10 {
        let v = tick as f64 / 10.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{v:.1}</text>"#, LEFT - 6.0, y_of(v) + 4.0);
    }
    let _ = writeln!(s, "</g>");

    let step = (rounds / 10).max(1);
    let _ = writeln!(s, r#"<g class="x-ticks" text-anchor="middle">"#);
    let mut r = 1;
    while r <= rounds {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{r}</text>"#, x_of(r), TOP + plot_h + 16.0);
        r += step;
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">round</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">test error rate</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let _ = writeln!(s, r#"<g class="series" fill="none" stroke-width="1.5">"#);
    for (i, curve) in series.iter().enumerate() {
        let mut points = String::new();
        for (j, v) in curve.values.iter().enumerate() {
            if j > 0 {
                points.push(' ');
            }
            let _ = write!(points, "{:.2},{:.2}", x_of(j + 1), y_of(*v));
        }
        let _ = writeln!(
            s,
            r#"<polyline stroke="{}" points="{points}"><title>{}</title></polyline>"#,
            PALETTE[i % PALETTE.len()],
            escape(&curve.label)
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, curve) in series.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{}" stroke-width="3"/>"#,
            x + 20.0,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, x + 26.0, y + 4.0, escape(&curve.label));
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

pub fn write_curve_svg(path: &Path, title: &str, series: &[CurveSeries]) -> Result<()> {
    std::fs::write(path, emit_curve_svg(title, series)).map_err(|e| Error::io(path, e))
}
