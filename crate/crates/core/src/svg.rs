//! Self-contained SVG scatter-plus-frontier charts of sweep records.

use std::fmt::Write;

use crate::error::{DpflError, Result};
use crate::report::InfoField;
use crate::sweep::{frontier, TradeoffRecord, FRONTIER_BINS};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

pub fn escape_xml(s: &str) -> String {
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

/// Tick positions at a 1-2-5 step covering `[lo, hi]` with about `target` intervals.
pub fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
        if lo == 0.0 {
            hi = 1.0;
        } else {
            let pad = 0.1 * lo.abs();
            lo -= pad;
            hi += pad;
        }
    }
    let raw = (hi - lo) / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).floor() as i64;
    let last = (hi / step).ceil() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Renders `y` against `x` for every record with a finite report, overlaid
/// with the upper-envelope frontier. Axis labels name the quantity and unit.
pub fn render_svg(records: &[TradeoffRecord], x: InfoField, y: InfoField) -> Result<String> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.value(x), r.value(y)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .collect();
    if points.is_empty() {
        return Err(DpflError::EmptyRecords);
    }
    let range = |vals: &mut dyn Iterator<Item = f64>| {
        vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (x_lo, x_hi) = range(&mut points.iter().map(|p| p.0));
    let (y_lo, y_hi) = range(&mut points.iter().map(|p| p.1));
    let xt = nice_ticks(x_lo, x_hi, 6);
    let yt = nice_ticks(y_lo, y_hi, 6);
    let (x0, x1) = (xt[0], *xt.last().unwrap());
    let (y0, y1) = (yt[0], *yt.last().unwrap());
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| LEFT + (v - x0) / (x1 - x0) * plot_w;
    let py = |v: f64| TOP + plot_h - (v - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let w = &mut s;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="13">"#
    )
    .unwrap();
    writeln!(
        w,
        "<title>{}</title>",
        escape_xml(&format!("{} vs {}", y.label(), x.label()))
    )
    .unwrap();
    writeln!(w, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).unwrap();

    writeln!(w, r##"<g class="grid" stroke="#dddddd" stroke-width="1">"##).unwrap();
    for &t in &xt {
        writeln!(w, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#, px(t), TOP, TOP + plot_h).unwrap();
    }
    for &t in &yt {
        writeln!(w, r#"<line x1="{1:.2}" y1="{0:.2}" x2="{2:.2}" y2="{0:.2}"/>"#, py(t), LEFT, LEFT + plot_w).unwrap();
    }
    writeln!(w, "</g>").unwrap();

    writeln!(
        w,
        r##"<rect class="frame" x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#333333"/>"##
    )
    .unwrap();
    writeln!(w, r#"<g class="x-ticks" text-anchor="middle">"#).unwrap();
    for &t in &xt {
        writeln!(w, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, px(t), TOP + plot_h + 20.0, tick_label(t)).unwrap();
    }
    writeln!(w, "</g>").unwrap();
    writeln!(w, r#"<g class="y-ticks" text-anchor="end">"#).unwrap();
    for &t in &yt {
        writeln!(w, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, LEFT - 8.0, py(t) + 4.0, tick_label(t)).unwrap();
    }
    writeln!(w, "</g>").unwrap();

    writeln!(
        w,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 20.0,
        escape_xml(&format!("{} (nats)", x.label()))
    )
    .unwrap();
    writeln!(
        w,
        r#"<text class="y-label" x="{0:.2}" y="{1:.2}" text-anchor="middle" font-size="15" transform="rotate(-90 {0:.2} {1:.2})">{2}</text>"#,
        25.0,
        TOP + plot_h / 2.0,
        escape_xml(&format!("{} (nats)", y.label()))
    )
    .unwrap();

    writeln!(w, r##"<g class="points" fill="#1f77b4" fill-opacity="0.7">"##).unwrap();
    for &(a, b) in &points {
        writeln!(w, r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4"/>"#, px(a), py(b)).unwrap();
    }
    writeln!(w, "</g>").unwrap();

    let front = frontier(records, x, y, FRONTIER_BINS);
    let coords: Vec<String> = front.iter().map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
    writeln!(
        w,
        r##"<polyline class="frontier" points="{}" fill="none" stroke="#d62728" stroke-width="2"/>"##,
        coords.join(" ")
    )
    .unwrap();
    writeln!(w, "</svg>").unwrap();
    Ok(s)
}
