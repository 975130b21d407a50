//! Report emission: CSV (one row per trial, diff-friendly), JSON, and a
//! self-contained SVG success-rate chart. Aggregation lives in
//! [`summarize`]; the CSV schema is fixed and parsed back by the
//! `summarize` subcommand.

use std::fmt::Write as _;

use super::{HarnessError, TrialReport};

pub const CSV_HEADER: &str = "n,delta,seed,trial,success,traces_used,wall_ms,failure_reason";

/// `f64` Display is the shortest round-trip form, which is deterministic;
/// that is what keeps identical seeds byte-identical on disk.
fn fmt_delta(d: f64) -> String {
    format!("{d}")
}

fn sanitize(reason: &str) -> String {
    reason.replace(',', ";")
}

pub fn to_csv(reports: &[TrialReport]) -> String {
    let mut out = String::with_capacity(64 * (reports.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            fmt_delta(r.delta),
            r.seed,
            r.trial,
            r.success,
            r.traces_used,
            r.wall_ms,
            r.failure_reason.as_deref().map(sanitize).unwrap_or_default()
        );
    }
    out
}

pub fn to_json(reports: &[TrialReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<TrialReport>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(8, ',').collect();
        if fields.len() != 8 {
            return Err(format!("row {}: expected 8 fields", i + 2));
        }
        fn field<T: std::str::FromStr>(row: usize, what: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("row {row}: bad {what} {v:?}"))
        }
        let row = i + 2;
        out.push(TrialReport {
            n: field(row, "n", fields[0])?,
            delta: field(row, "delta", fields[1])?,
            seed: field(row, "seed", fields[2])?,
            trial: field(row, "trial", fields[3])?,
            success: field(row, "success", fields[4])?,
            traces_used: field(row, "traces_used", fields[5])?,
            wall_ms: field(row, "wall_ms", fields[6])?,
            failure_reason: if fields[7].is_empty() {
                None
            } else {
                Some(fields[7].to_string())
            },
        });
    }
    Ok(out)
}

/// Per-cell aggregate of a sweep.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Summary {
    pub n: usize,
    pub delta: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_traces: f64,
    pub mean_wall_ms: f64,
}

/// Aggregate reports per `(n, delta)` cell, ordered by `(n, delta)`.
pub fn summarize(reports: &[TrialReport]) -> Vec<Summary> {
    let mut cells: Vec<(usize, f64)> = reports.iter().map(|r| (r.n, r.delta)).collect();
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cells.dedup();
    cells
        .into_iter()
        .map(|(n, delta)| {
            let rows: Vec<&TrialReport> = reports
                .iter()
                .filter(|r| r.n == n && r.delta == delta)
                .collect();
            let trials = rows.len();
            let successes = rows.iter().filter(|r| r.success).count();
            let mean = |f: &dyn Fn(&TrialReport) -> f64| {
                rows.iter().map(|r| f(r)).sum::<f64>() / trials as f64
            };
            Summary {
                n,
                delta,
                trials,
                successes,
                success_rate: successes as f64 / trials as f64,
                mean_traces: mean(&|r| r.traces_used as f64),
                mean_wall_ms: mean(&|r| r.wall_ms as f64),
            }
        })
        .collect()
}

pub fn summary_to_csv(rows: &[Summary]) -> String {
    let mut out = String::from("n,delta,trials,successes,success_rate,mean_traces,mean_wall_ms\n");
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.3},{:.3}",
            s.n,
            fmt_delta(s.delta),
            s.trials,
            s.successes,
            s.success_rate,
            s.mean_traces,
            s.mean_wall_ms
        );
    }
    out
}

const SVG_W: f64 = 760.0;
const SVG_H: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_B: f64 = 60.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_R: f64 = 30.0;

const LINE_COLORS: &[&str] = &["#1b6ca8", "#c0392b", "#1e8449", "#8e44ad", "#d68910", "#34495e"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Success rate against deletion rate, one polyline per `n`, each point
/// annotated with its trial count. Deltas are placed categorically so a
/// delta of zero coexists with log-spaced grids.
pub fn to_svg(reports: &[TrialReport]) -> String {
    let rows = summarize(reports);
    let mut deltas: Vec<f64> = rows.iter().map(|s| s.delta).collect();
    deltas.sort_by(|a, b| a.total_cmp(b));
    deltas.dedup();
    let mut ns: Vec<usize> = rows.iter().map(|s| s.n).collect();
    ns.sort_unstable();
    ns.dedup();

    let plot_w = SVG_W - MARGIN_L - MARGIN_R;
    let plot_h = SVG_H - MARGIN_T - MARGIN_B;
    let x_of = |delta: f64| {
        let i = deltas.iter().position(|&d| d == delta).unwrap();
        let steps = (deltas.len().max(2) - 1) as f64;
        MARGIN_L + plot_w * i as f64 / steps
    };
    let y_of = |rate: f64| MARGIN_T + plot_h * (1.0 - rate);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">Reconstruction success rate vs deletion rate</text>"#,
        SVG_W / 2.0
    );

    // axes and gridlines
    for tick in 0..=4 {
        let rate = tick as f64 / 4.0;
        let y = y_of(rate);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{y}" x2="{}" y2="{y}" stroke="#dddddd"/>"##,
            SVG_W - MARGIN_R
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{rate:.2}</text>"#,
            MARGIN_L - 6.0,
            y + 4.0
        );
    }
    for &d in &deltas {
        let x = x_of(d);
        let _ = writeln!(
            s,
            r##"<line x1="{x}" y1="{MARGIN_T}" x2="{x}" y2="{}" stroke="#eeeeee"/>"##,
            SVG_H - MARGIN_B
        );
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            SVG_H - MARGIN_B + 16.0,
            esc(&fmt_delta(d))
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">deletion rate δ</text>"#,
        MARGIN_L + plot_w / 2.0,
        SVG_H - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">success rate</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    );

    for (ni, &n) in ns.iter().enumerate() {
        let color = LINE_COLORS[ni % LINE_COLORS.len()];
        let series: Vec<&Summary> = rows.iter().filter(|r| r.n == n).collect();
        let points: Vec<String> = series
            .iter()
            .map(|r| format!("{:.2},{:.2}", x_of(r.delta), y_of(r.success_rate)))
            .collect();
        if points.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
                points.join(" ")
            );
        }
        for r in &series {
            let (x, y) = (x_of(r.delta), y_of(r.success_rate));
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" fill="{color}">{}/{}</text>"#,
                x + 5.0,
                y - 5.0,
                r.successes,
                r.trials
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">n = {n}</text>"#,
            SVG_W - MARGIN_R - 110.0,
            MARGIN_T + 16.0 * (ni + 1) as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Formats a report list and writes it out, surfacing I/O errors with the
/// offending path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmitFormat {
    Csv,
    Json,
    SvgPlot,
}

impl EmitFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            EmitFormat::Csv => "csv",
            EmitFormat::Json => "json",
            EmitFormat::SvgPlot => "svg",
        }
    }
}

impl std::str::FromStr for EmitFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            "svg-plot" => Ok(EmitFormat::SvgPlot),
            other => Err(format!("unknown format {other:?} (csv | json | svg-plot)")),
        }
    }
}

pub fn render(reports: &[TrialReport], format: EmitFormat) -> String {
    match format {
        EmitFormat::Csv => to_csv(reports),
        EmitFormat::Json => to_json(reports),
        EmitFormat::SvgPlot => to_svg(reports),
    }
}

pub fn emit(
    reports: &[TrialReport],
    format: EmitFormat,
    out: &std::path::Path,
) -> Result<(), HarnessError> {
    std::fs::write(out, render(reports, format)).map_err(|source| HarnessError::Io {
        path: out.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(n: usize, delta: f64, trial: usize, success: bool) -> TrialReport {
        TrialReport {
            n,
            delta,
            seed: 1,
            trial,
            success,
            traces_used: 42,
            wall_ms: 0,
            failure_reason: if success { None } else { Some("end finding failed".into()) },
        }
    }

    #[test]
    fn empty_reports_give_header_only_csv() {
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_row_count_and_roundtrip() {
        let reports: Vec<TrialReport> = (0..10)
            .flat_map(|t| {
                [report(1000, 1e-4, t, true), report(2000, 1e-3, t, t % 2 == 0)]
            })
            .collect();
        let csv = to_csv(&reports);
        assert_eq!(csv.lines().count(), 21);
        let back = parse_csv(&csv).unwrap();
        assert_eq!(back.len(), reports.len());
        assert_eq!(back[3].n, reports[3].n);
        assert_eq!(back[3].failure_reason, reports[3].failure_reason);
    }

    #[test]
    fn summaries_aggregate_per_cell() {
        let reports: Vec<TrialReport> = (0..10)
            .map(|t| report(1000, 1e-4, t, t < 9))
            .chain((0..10).map(|t| report(1000, 1e-3, t, t < 5)))
            .collect();
        let rows = summarize(&reports);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].successes, 9);
        assert!((rows[1].success_rate - 0.5).abs() < 1e-12);
    }

    /// Minimal well-formedness check: every opened tag closes in order.
    fn xml_well_formed(doc: &str) -> bool {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = doc;
        while let Some(start) = rest.find('<') {
            let Some(end_rel) = rest[start..].find('>') else {
                return false;
            };
            let tag = &rest[start + 1..start + end_rel];
            rest = &rest[start + end_rel + 1..];
            if tag.starts_with('?') || tag.starts_with('!') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                if stack.pop().as_deref() != Some(name.trim()) {
                    return false;
                }
            } else if !tag.ends_with('/') {
                let name = tag.split_whitespace().next().unwrap_or("");
                stack.push(name.to_string());
            }
        }
        stack.is_empty()
    }

    #[test]
    fn svg_is_well_formed_xml() {
        let reports: Vec<TrialReport> = [0.0, 1e-5, 1e-4, 1e-3]
            .iter()
            .flat_map(|&d| {
                (0..5).flat_map(move |t| {
                    [report(1000, d, t, true), report(2000, d, t, t < 3)]
                })
            })
            .collect();
        let svg = to_svg(&reports);
        assert!(svg.starts_with("<?xml"));
        assert!(xml_well_formed(&svg), "svg not well formed:\n{svg}");
    }

    #[test]
    fn commas_in_failure_reasons_are_sanitized() {
        let mut r = report(100, 0.1, 0, false);
        r.failure_reason = Some("a, b, c".into());
        let csv = to_csv(&[r]);
        let back = parse_csv(&csv).unwrap();
        assert_eq!(back[0].failure_reason.as_deref(), Some("a; b; c"));
    }
}
