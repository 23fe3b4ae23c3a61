//! Hand-assembled SVG figures: forest plots, trace panels and WAIC bars.

use std::fmt::Write;

use crate::VERSION;

const PALETTE: [&str; 6] = ["#1b6ca8", "#d1495b", "#edae49", "#00798c", "#66a182", "#8d6a9f"];
const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
        );
        let _ = writeln!(out, "<!-- hieval {VERSION} -->");
        let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>",
            width / 2.0,
            escape(title)
        );
        Self { out }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>"
        );
    }

    fn dashed(&mut self, x1: f64, y1: f64, x2: f64, y2: f64) {
        let _ = writeln!(
            self.out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>"
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(
            self.out,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\" {FONT}>{}</text>",
            escape(s)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear map from data range to pixel range.
#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi > lo {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        Self { lo, hi, px_lo, px_hi }
    }

    fn at(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    /// About five round tick values inside the range.
    fn ticks(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(mag * 10.0);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-12 {
            out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn x_axis(c: &mut Canvas, axis: &Axis, y: f64, top: f64, label: &str) {
    c.line(axis.px_lo, y, axis.px_hi, y, "black", 1.0);
    for t in axis.ticks() {
        let x = axis.at(t);
        c.line(x, y, x, y + 4.0, "black", 1.0);
        c.line(x, top, x, y, "#eee", 1.0);
        c.text(x, y + 16.0, "middle", &tick_label(t));
    }
    c.text((axis.px_lo + axis.px_hi) / 2.0, y + 32.0, "middle", label);
}

/// One row of a forest plot.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestRow {
    pub label: String,
    pub mean: f64,
    pub low: f64,
    pub high: f64,
    /// Empirical mean and its standard error, drawn as a hollow marker.
    pub baseline: Option<(f64, Option<f64>)>,
}

/// Posterior intervals as horizontal segments with a dot at the mean;
/// baselines as hollow squares with ±1 SEM whiskers.
pub fn forest(rows: &[ForestRow], title: &str, axis_label: &str, reference: Option<f64>) -> String {
    let (left, right, top, row_h) = (170.0, 620.0, 34.0, 22.0);
    let height = top + row_h * rows.len().max(1) as f64 + 50.0;
    let mut c = Canvas::new(right + 30.0, height, title);
    let mut values: Vec<f64> = rows.iter().flat_map(|r| [r.low, r.high]).collect();
    for r in rows {
        if let Some((m, s)) = r.baseline {
            values.extend([m - s.unwrap_or(0.0), m + s.unwrap_or(0.0)]);
        }
    }
    values.extend(reference);
    values.retain(|v| v.is_finite());
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let axis = if lo.is_finite() { Axis::new(lo, hi, left, right) } else { Axis::new(0.0, 1.0, left, right) };
    let bottom = top + row_h * rows.len().max(1) as f64;
    x_axis(&mut c, &axis, bottom, top, axis_label);
    if let Some(r) = reference {
        let x = axis.at(r);
        c.dashed(x, top, x, bottom);
    }
    for (i, r) in rows.iter().enumerate() {
        let y = top + row_h * (i as f64 + 0.5);
        c.text(left - 8.0, y + 4.0, "end", &r.label);
        c.line(axis.at(r.low), y, axis.at(r.high), y, PALETTE[0], 2.0);
        let _ = writeln!(
            c.out,
            "<circle class=\"posterior\" cx=\"{:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"{}\"/>",
            axis.at(r.mean),
            PALETTE[0]
        );
        if let Some((m, sem)) = r.baseline.filter(|(m, _)| m.is_finite()) {
            let yb = y + 6.0;
            if let Some(s) = sem.filter(|s| s.is_finite()) {
                c.line(axis.at(m - s), yb, axis.at(m + s), yb, PALETTE[1], 1.0);
            }
            let _ = writeln!(
                c.out,
                "<rect class=\"baseline\" x=\"{:.2}\" y=\"{:.2}\" width=\"6\" height=\"6\" fill=\"none\" stroke=\"{}\"/>",
                axis.at(m) - 3.0,
                yb - 3.0,
                PALETTE[1]
            );
        }
    }
    c.finish()
}

/// Keeps at most `max` evenly spaced points.
fn thin(values: &[f64], max: usize) -> Vec<(usize, f64)> {
    let stride = values.len().div_ceil(max).max(1);
    values.iter().copied().enumerate().step_by(stride).collect()
}

/// One panel per parameter, one polyline per chain.
pub fn trace(panels: &[(String, Vec<Vec<f64>>)], title: &str) -> String {
    let (left, right, top, panel_h, gap) = (70.0, 620.0, 34.0, 90.0, 30.0);
    let height = top + (panel_h + gap) * panels.len().max(1) as f64 + 10.0;
    let mut c = Canvas::new(right + 30.0, height, title);
    for (p, (name, chains)) in panels.iter().enumerate() {
        let y0 = top + (panel_h + gap) * p as f64;
        let y1 = y0 + panel_h;
        let all = chains.iter().flatten().copied().filter(|v| v.is_finite());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        let yaxis = Axis::new(lo, hi, y1, y0);
        let len = chains.iter().map(Vec::len).max().unwrap_or(0).max(2);
        let xaxis = Axis { lo: 0.0, hi: (len - 1) as f64, px_lo: left, px_hi: right };
        c.line(left, y1, right, y1, "black", 1.0);
        c.line(left, y0, left, y1, "black", 1.0);
        c.text(left, y0 - 4.0, "start", name);
        c.text(left - 6.0, y0 + 10.0, "end", &tick_label(yaxis.hi));
        c.text(left - 6.0, y1, "end", &tick_label(yaxis.lo));
        for (k, chain) in chains.iter().enumerate() {
            let mut pts = String::new();
            for (t, v) in thin(chain, 400) {
                let _ = write!(pts, "{:.1},{:.1} ", xaxis.at(t as f64), yaxis.at(v));
            }
            let _ = writeln!(
                c.out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"0.8\" opacity=\"0.8\"/>",
                pts.trim_end(),
                PALETTE[k % PALETTE.len()]
            );
        }
    }
    c.finish()
}

/// A model's bar in the WAIC chart.
#[derive(Debug, Clone, PartialEq)]
pub struct WaicBar {
    pub model: String,
    pub elpd: f64,
    pub se: f64,
    pub delta: f64,
    pub se_delta: f64,
}

/// Horizontal bars of elpd (higher is better) with ±1 se whiskers, best first.
pub fn waic_bars(bars: &[WaicBar], title: &str) -> String {
    let (left, right, top, row_h) = (170.0, 560.0, 34.0, 30.0);
    let height = top + row_h * bars.len().max(1) as f64 + 50.0;
    let mut c = Canvas::new(right + 120.0, height, title);
    let lo = bars.iter().map(|b| b.elpd - b.se).fold(0.0, f64::min);
    let hi = bars.iter().map(|b| b.elpd + b.se).fold(0.0, f64::max);
    let axis = Axis::new(lo, hi, left, right);
    let bottom = top + row_h * bars.len().max(1) as f64;
    x_axis(&mut c, &axis, bottom, top, "elpd_waic (higher is better)");
    let zero = axis.at(0.0);
    for (i, b) in bars.iter().enumerate() {
        let y = top + row_h * i as f64 + 6.0;
        let (x0, x1) = (zero.min(axis.at(b.elpd)), zero.max(axis.at(b.elpd)));
        let _ = writeln!(
            c.out,
            "<rect class=\"bar\" x=\"{x0:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            x1 - x0,
            row_h - 12.0,
            PALETTE[i % PALETTE.len()]
        );
        let ym = y + (row_h - 12.0) / 2.0;
        c.line(axis.at(b.elpd - b.se), ym, axis.at(b.elpd + b.se), ym, "black", 1.0);
        c.text(left - 8.0, ym + 4.0, "end", &b.model);
        let note = if i == 0 {
            format!("{:.1}", b.elpd)
        } else {
            format!("{:.1} ({:+.1} ± {:.1})", b.elpd, -b.delta, b.se_delta)
        };
        c.text(right + 8.0, ym + 4.0, "start", &note);
    }
    c.finish()
}
