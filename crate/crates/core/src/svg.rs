//! Minimal static SVG line charts.
//!
//! Output depends only on the input data: coordinates are printed with a
//! fixed number of decimals and elements are emitted in series order, so
//! identical input gives byte-identical documents.

use std::fmt::Write as _;

use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChartStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub width: u32,
    pub height: u32,
    /// Draw circles at the data points (useful for scans with few values).
    pub markers: bool,
}

impl Default for ChartStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
            width: 800,
            height: 500,
            markers: false,
        }
    }
}

impl ChartStyle {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Self::default()
        }
    }

    pub fn with_markers(mut self) -> Self {
        self.markers = true;
        self
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// "Nice" tick positions covering [lo, hi], roughly `target` of them.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    }
}

/// Renders `series` as a line chart. Non-finite points are dropped.
pub fn emit_svg(series: &[Series], style: &ChartStyle) -> Result<String> {
    let clean: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts = s
                .points
                .iter()
                .copied()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect();
            (s.label.as_str(), pts)
        })
        .collect();
    if clean.is_empty() || clean.iter().all(|(_, p)| p.is_empty()) {
        return Err(Error::Analysis("cannot plot an empty series".into()));
    }

    let all = || clean.iter().flat_map(|(_, p)| p.iter());
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().map(|p| p.1));

    let (w, h) = (style.width as f64, style.height as f64);
    let (ml, mr, mt, mb) = (80.0, 170.0, 40.0, 60.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if !style.title.is_empty() {
        let _ = writeln!(
            s,
            r#"<text class="title" x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            ml + pw / 2.0,
            escape(&style.title)
        );
    }

    let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(s, r#"<line x1="{ml:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, mt + ph, ml + pw, mt + ph);
    let _ = writeln!(s, r#"<line x1="{ml:.2}" y1="{mt:.2}" x2="{ml:.2}" y2="{:.2}"/>"#, mt + ph);
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="ticks" fill="black">"#);
    for t in ticks(x0, x1, 8) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            mt + ph,
            mt + ph + 5.0,
            mt + ph + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1, 6) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{ml:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ml - 5.0,
            ml - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        h - 15.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0,
        escape(&style.y_label)
    );

    for (k, (label, pts)) in clean.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            coords.join(" "),
            escape(label)
        );
        if style.markers {
            for &(x, y) in pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
    }

    let _ = writeln!(s, r#"<g class="legend">"#);
    for (k, (label, _)) in clean.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let y = mt + 10.0 + 18.0 * k as f64;
        let x = ml + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text class="legend-entry" x="{:.2}" y="{:.2}">{}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0,
            escape(label)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(doc: &str, pat: &str) -> usize {
        doc.matches(pat).count()
    }

    #[test]
    fn two_points() {
        let doc = emit_svg(&[Series::new("a", vec![(0.0, 0.0), (1.0, 1.0)])], &ChartStyle::default()).unwrap();
        assert_eq!(count(&doc, "<polyline"), 1);
        assert_eq!(count(&doc, r#"class="axis-label""#), 2);
        assert!(doc.starts_with("<?xml"));
        assert!(doc.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn six_traces_six_legend_entries() {
        let series: Vec<Series> = (0..6)
            .map(|k| Series::new(format!("trace {k}"), (0..50).map(|i| (i as f64, (i * k) as f64)).collect()))
            .collect();
        let doc = emit_svg(&series, &ChartStyle::new("overlay", "t (us)", "|S|")).unwrap();
        assert_eq!(count(&doc, "<polyline"), 6);
        assert_eq!(count(&doc, r#"class="legend-entry""#), 6);
    }

    #[test]
    fn empty_is_error() {
        assert!(emit_svg(&[], &ChartStyle::default()).is_err());
        assert!(emit_svg(&[Series::new("e", vec![])], &ChartStyle::default()).is_err());
        assert!(emit_svg(&[Series::new("nan", vec![(f64::NAN, 1.0)])], &ChartStyle::default()).is_err());
    }

    #[test]
    fn deterministic_and_escaped() {
        let s = [Series::new("<ρ13> & co", vec![(0.0, 1.0), (2.0, 5.0), (3.0, -1.0)])];
        let style = ChartStyle::new("a \"title\"", "x", "y").with_markers();
        let a = emit_svg(&s, &style).unwrap();
        let b = emit_svg(&s, &style).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("&lt;ρ13&gt; &amp; co"));
        assert!(a.contains("a &quot;title&quot;"));
        assert_eq!(count(&a, "<circle"), 3);
    }

    #[test]
    fn constant_series_still_plots() {
        let doc = emit_svg(&[Series::new("flat", vec![(0.0, 2.0), (1.0, 2.0)])], &ChartStyle::default()).unwrap();
        assert!(!doc.contains("NaN"));
        let doc = emit_svg(&[Series::new("dot", vec![(1.0, 0.0)])], &ChartStyle::default()).unwrap();
        assert!(!doc.contains("NaN") && !doc.contains("inf"));
    }

    #[test]
    fn tick_positions() {
        assert_eq!(ticks(0.0, 10.0, 5), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let t = ticks(-0.3, 0.7, 5);
        assert!(t.first().unwrap() >= &-0.3 && t.last().unwrap() <= &0.7);
        assert_eq!(tick_label(-0.0), "0");
        assert_eq!(tick_label(2.5), "2.5");
    }
}
