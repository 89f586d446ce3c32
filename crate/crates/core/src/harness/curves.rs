use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::aggregate::{aggregate_dir, Aggregated, Summary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

/// Training series, plus the evaluation series when any checkpoint has one.
pub fn series_from_summary(summary: &Summary) -> Vec<CurveSeries> {
    let pick = |f: &dyn Fn(&super::aggregate::SummaryRow) -> Option<super::aggregate::Stats>| -> Vec<CurvePoint> {
        summary
            .rows
            .iter()
            .filter_map(|r| f(r).map(|s| CurvePoint { step: r.step, mean: s.mean, stderr: s.stderr }))
            .collect()
    };
    let mut out = vec![CurveSeries { label: "train".into(), points: pick(&|r| r.train) }];
    let eval = pick(&|r| r.eval);
    if !eval.is_empty() {
        out.push(CurveSeries { label: "eval".into(), points: eval });
    }
    out.retain(|s| !s.points.is_empty());
    out
}

const PALETTE: [&str; 11] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000",
];

/// Standalone SVG line chart: steps against mean return, with a shaded
/// band of one standard error.
pub fn render_svg(series: &[CurveSeries], title: &str) -> String {
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (80.0, 150.0, 40.0, 60.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        x0 = x0.min(p.step as f64);
        x1 = x1.max(p.step as f64);
        y0 = y0.min(p.mean - p.stderr);
        y1 = y1.max(p.mean + p.stderr);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let sy = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, escape(title));
    let (ax0, ax1, ay0, ay1) = (sx(x0), sx(x1), sy(y0), sy(y1));
    let _ = writeln!(svg, r#"<line x1="{ax0:.1}" y1="{ay0:.1}" x2="{ax1:.1}" y2="{ay0:.1}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{ax0:.1}" y1="{ay0:.1}" x2="{ax0:.1}" y2="{ay1:.1}" stroke="black"/>"#);
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, sx(xv), ay0 + 18.0, tick(xv));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, ax0 - 6.0, sy(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(svg, r#"<text class="x-label" x="{:.1}" y="{:.1}" text-anchor="middle">steps</text>"#, (ax0 + ax1) / 2.0, h - 15.0);
    let _ = writeln!(
        svg,
        r#"<text class="y-label" x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">mean return</text>"#,
        (ay0 + ay1) / 2.0,
        (ay0 + ay1) / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.step as f64), sy(p.mean + p.stderr))).collect();
        let lower: Vec<String> = s.points.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.step as f64), sy(p.mean - p.stderr))).collect();
        let _ = writeln!(svg, r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, upper.join(" "), lower.join(" "));
        let line: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.step as f64), sy(p.mean))).collect();
        let _ = writeln!(svg, r#"<polyline data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, escape(&s.label), line.join(" "));
        let ly = top + 20.0 * i as f64 + 10.0;
        let _ = writeln!(svg, r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, w - right + 15.0, w - right + 35.0);
        let _ = writeln!(svg, r#"<text class="legend" x="{:.1}" y="{:.1}">{}</text>"#, w - right + 40.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else if v.fract().abs() < 1e-9 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn points_csv(series: &[CurveSeries]) -> String {
    let mut out = String::from("# drrl-curves v1\nseries,step,mean,stderr\n");
    for s in series {
        for p in &s.points {
            let _ = writeln!(out, "{},{},{},{}", s.label, p.step, p.mean, p.stderr);
        }
    }
    out
}

/// Writes `<stem>.svg` and `<stem>.csv` (the plotted points).
pub fn emit_curves(series: &[CurveSeries], title: &str, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    let svg = stem.with_extension("svg");
    let csv = stem.with_extension("csv");
    std::fs::write(&svg, render_svg(series, title)).map_err(|e| Error::io(&svg, e))?;
    std::fs::write(&csv, points_csv(series)).map_err(|e| Error::io(&csv, e))?;
    Ok((svg, csv))
}

/// Aggregates `dir` and draws its curves: train/eval for one experiment,
/// or one series per experiment (eval if present, else train) for a sweep.
pub fn curves_dir(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let title = dir.file_name().map_or_else(|| "experiment".into(), |n| n.to_string_lossy().into_owned());
    let series = match aggregate_dir(dir)? {
        Aggregated::Experiment(summary) => series_from_summary(&summary),
        Aggregated::Sweep(rows) => rows
            .iter()
            .filter_map(|r| {
                let mut s = series_from_summary(&r.summary);
                s.pop().map(|mut last| {
                    last.label = r.label.clone();
                    last
                })
            })
            .collect(),
    };
    if series.is_empty() {
        return Err(Error::Aggregation(format!("{} has nothing to plot", dir.display())));
    }
    emit_curves(&series, &title, &dir.join("curves"))
}
