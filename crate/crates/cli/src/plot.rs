//! Minimal standalone SVG line plots with axes, ticks, legend and optional
//! logarithmic scales.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStyle {
    Solid,
    Dashed,
    Dotted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub style: LineStyle,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { label: label.into(), x, y, style: LineStyle::Solid }
    }

    pub fn styled(mut self, style: LineStyle) -> Self {
        self.style = style;
        self
    }

    /// Step outline of a histogram given `n + 1` edges and `n` heights.
    pub fn steps(label: impl Into<String>, edges: &[f64], heights: &[f64]) -> Self {
        let mut x = Vec::with_capacity(2 * heights.len());
        let mut y = Vec::with_capacity(2 * heights.len());
        for (i, h) in heights.iter().enumerate() {
            x.extend([edges[i], edges[i + 1]]);
            y.extend([*h, *h]);
        }
        Self::new(label, x, y)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Axes {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
}

impl Axes {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_x: false, log_y: false }
    }

    pub fn log_y(mut self) -> Self {
        self.log_y = true;
        self
    }

    pub fn log_x(mut self) -> Self {
        self.log_x = true;
        self
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Plot coordinate of a data value (log10 on log axes); `None` if not drawable.
fn coord(v: f64, log: bool) -> Option<f64> {
    if !v.is_finite() {
        return None;
    }
    if log {
        (v > 0.0).then(|| v.log10())
    } else {
        Some(v)
    }
}

struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if hi - lo <= 1e-12 * lo.abs().max(1.0) {
            let pad = 0.5 * lo.abs().max(1.0);
            return Some(Self { lo: lo - pad, hi: hi + pad });
        }
        Some(Self { lo, hi })
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }

    /// Tick positions at 1, 2 or 5 times a power of ten.
    fn ticks(&self, log: bool) -> Vec<f64> {
        let span = self.hi - self.lo;
        let raw = span / 6.0;
        let mag = 10f64.powf(raw.log10().floor());
        let mut step = [1.0, 2.0, 5.0, 10.0].iter().map(|k| k * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        if log {
            step = step.max(1.0).round();
        }
        let first = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        let mut t = first;
        while t <= self.hi + 1e-9 * span {
            out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        return format!("1e{}", v.round() as i64);
    }
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-3..1e4).contains(&a) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders `series` into a standalone SVG document.
pub fn emit_plot(series: &[Series], axes: &Axes) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.x.is_empty()) {
        return Err(CliError::Config("cannot plot an empty series list".into()));
    }
    for s in series {
        if s.x.len() != s.y.len() {
            return Err(CliError::Config(format!("series '{}' has {} x and {} y values", s.label, s.x.len(), s.y.len())));
        }
    }
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.x.iter()
                .zip(&s.y)
                .filter_map(|(&x, &y)| Some((coord(x, axes.log_x)?, coord(y, axes.log_y)?)))
                .collect()
        })
        .collect();
    let xr = Range::of(pts.iter().flatten().map(|p| p.0))
        .ok_or_else(|| CliError::Config("no drawable points".into()))?;
    let yr = Range::of(pts.iter().flatten().map(|p| p.1)).expect("x range implies y range");
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        (x0 + x1) / 2.0,
        escape(&axes.title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );
    for t in xr.ticks(axes.log_x) {
        let px = xr.map(t, x0, x1);
        let _ = writeln!(svg, r##"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{y1}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            tick_label(t, axes.log_x)
        );
    }
    for t in yr.ticks(axes.log_y) {
        let py = yr.map(t, y0, y1);
        let _ = writeln!(svg, r##"<line x1="{x0}" y1="{py:.2}" x2="{x1}" y2="{py:.2}" stroke="#e0e0e0"/>"##);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py + 4.0,
            tick_label(t, axes.log_y)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(&axes.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(&axes.y_label)
    );

    for (k, (s, p)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let dash = match s.style {
            LineStyle::Solid => "",
            LineStyle::Dashed => r#" stroke-dasharray="8 4""#,
            LineStyle::Dotted => r#" stroke-dasharray="2 3""#,
        };
        let mut points = String::new();
        for &(x, y) in p {
            let _ = write!(points, "{:.3},{:.3} ", xr.map(x, x0, x1), yr.map(y, y0, y1));
        }
        let _ = writeln!(
            svg,
            r#"<polyline data-label="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
            escape(&s.label),
            points.trim_end()
        );
        let ly = TOP + 14.0 + 20.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.6"{dash}/>"#,
            x1 + 12.0,
            x1 + 40.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, x1 + 46.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_plot(path: &Path, series: &[Series], axes: &Axes) -> Result<()> {
    let svg = emit_plot(series, axes)?;
    std::fs::write(path, svg).map_err(|e| CliError::io(path, e))
}
