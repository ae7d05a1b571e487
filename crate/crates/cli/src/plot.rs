//! Standalone SVG line plots of the result CSVs.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::config::PlotKind;

pub const MSE_HEADER: [&str; 5] = ["scheme", "horizon", "mse", "seed", "scenario_hash"];
pub const SE_HEADER: [&str; 5] = ["step", "phase", "scheme", "se_bits_per_s_hz", "seed"];

const W: f64 = 760.0;
const H: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// One named series of `(x, y)` points, in input order.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub kind: PlotKind,
    pub series: Vec<Series>,
    /// x positions of vertical phase markers.
    pub markers: Vec<f64>,
}

fn push(series: &mut Vec<Series>, name: &str, p: (f64, f64)) {
    match series.iter_mut().find(|s| s.name == name) {
        Some(s) => s.points.push(p),
        None => series.push(Series { name: name.to_string(), points: vec![p] }),
    }
}

/// Parses a result CSV. `Auto` picks the kind from the header.
pub fn parse_csv(text: &str, kind: PlotKind) -> Result<PlotData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().context("CSV header")?.iter().map(str::to_string).collect();
    let detected = if header == MSE_HEADER {
        PlotKind::MseVsHorizon
    } else if header == SE_HEADER {
        PlotKind::SeVsTime
    } else {
        bail!("CSV header {header:?} matches no plot schema");
    };
    if kind != PlotKind::Auto && kind != detected {
        bail!("CSV schema is {detected} but {kind} was requested");
    }
    let mut series = Vec::new();
    let mut markers = Vec::new();
    let mut phase_at: Vec<(f64, String)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("CSV row {}", i + 2))?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().with_context(|| format!("row {}: column {} is not a number", i + 2, header[j]))
        };
        match detected {
            PlotKind::MseVsHorizon => push(&mut series, &rec[0], (num(1)?, num(2)?)),
            _ => {
                let step = num(0)?;
                push(&mut series, &rec[2], (step, num(3)?));
                if series.len() == 1 {
                    phase_at.push((step, rec[1].to_string()));
                }
            }
        }
    }
    if series.is_empty() {
        bail!("CSV has no data rows");
    }
    for w in phase_at.windows(2) {
        if w[0].1 != w[1].1 {
            markers.push(w[1].0);
        }
    }
    Ok(PlotData { kind: detected, series, markers })
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(d: &PlotData) -> Result<String> {
    let pts = d.series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        if !x.is_finite() || !y.is_finite() {
            bail!("non-finite value in plot data");
        }
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    y0 = y0.min(0.0);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    y1 += 0.05 * (y1 - y0);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
    let (title, xl, yl) = match d.kind {
        PlotKind::MseVsHorizon => ("MSE versus prediction length", "prediction horizon (steps)", "MSE"),
        _ => ("Sum spectral efficiency over time", "time step", "sum SE (bit/s/Hz)"),
    };

    let mut o = String::new();
    writeln!(o, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(o, r#"<rect width="{W}" height="{H}" fill="white"/>"#)?;
    writeln!(o, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{title}</text>"#, LEFT + pw / 2.0)?;
    writeln!(o, r#"<g class="axes" stroke="black" fill="none">"#)?;
    writeln!(o, r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/>"#, TOP + ph, LEFT + pw, TOP + ph)?;
    writeln!(o, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/>"#, TOP + ph)?;
    writeln!(o, "</g>")?;
    for t in ticks(x0, x1, 5) {
        let x = sx(t);
        writeln!(o, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0)?;
        writeln!(o, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, fmt_tick(t))?;
    }
    for t in ticks(y0, y1, 5) {
        let y = sy(t);
        writeln!(o, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0)?;
        writeln!(o, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, fmt_tick(t))?;
    }
    writeln!(o, r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">{xl}</text>"#, LEFT + pw / 2.0, H - 15.0)?;
    writeln!(
        o,
        r#"<text class="y-label" x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{yl}</text>"#,
        TOP + ph / 2.0
    )?;
    for &m in &d.markers {
        let x = sx(m);
        writeln!(
            o,
            r#"<line class="phase-boundary" data-step="{m}" x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}" stroke="gray" stroke-dasharray="4 3"/>"#,
            TOP + ph
        )?;
    }
    for (i, s) in d.series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(
            o,
            r#"<polyline class="series" data-scheme="{}" fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#,
            escape(&s.name),
            pts.join(" ")
        )?;
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        writeln!(o, r#"<g class="legend-entry">"#)?;
        writeln!(o, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#, lx + 25.0)?;
        writeln!(o, r#"<text x="{}" y="{}">{}</text>"#, lx + 32.0, ly + 4.0, escape(&s.name))?;
        writeln!(o, "</g>")?;
    }
    writeln!(o, "</svg>")?;
    Ok(o)
}

/// Renders `input` to `output`. Nothing is written when the CSV is empty or
/// does not match the requested kind.
pub fn render_plot(input: &Path, kind: PlotKind, output: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    if text.trim().is_empty() {
        bail!("{} is empty", input.display());
    }
    let data = parse_csv(&text, kind).with_context(|| format!("plotting {}", input.display()))?;
    let svg = render_svg(&data)?;
    std::fs::write(output, svg).with_context(|| format!("writing {}", output.display()))
}
