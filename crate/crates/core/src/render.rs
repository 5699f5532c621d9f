//! Standalone SVG heat maps and line plots.
//!
//! Colors interpolate linearly between two anchors fixed at magnitudes 0 and
//! 1, so maps rendered separately stay comparable. Annotations show values
//! rounded to two decimals; serialized CSV/JSON keep full precision.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maps::HeatMapGrid;
use crate::measures::DriftValue;
use crate::schema::AttributeSchema;
use crate::temporal::DriftSeries;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("figure dimensions must be at least {min}x{min}, got {width}x{height}")]
    Dimensions { width: u32, height: u32, min: u32 },
    #[error("y range must be finite and increasing, got [{0}, {1}]")]
    YRange(f64, f64),
    #[error("nothing to render: {0}")]
    Empty(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    fn lerp(self, other: Rgb, t: f64) -> Rgb {
        let t = t.clamp(0.0, 1.0);
        let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
        Rgb(mix(self.0, other.0), mix(self.1, other.1), mix(self.2, other.2))
    }

    fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotStyle {
    /// Color at magnitude 0.
    pub low_color: Rgb,
    /// Color at magnitude 1.
    pub high_color: Rgb,
    pub annotate: bool,
    pub width: u32,
    pub height: u32,
    pub axis_labels: bool,
    pub title: Option<String>,
    /// Times (ticks) at which line plots draw dashed vertical lines.
    pub markers: Vec<i64>,
    /// Line-plot y-axis range.
    pub y_range: (f64, f64),
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            low_color: Rgb(255, 255, 255),
            high_color: Rgb(178, 24, 43),
            annotate: true,
            width: 800,
            height: 600,
            axis_labels: true,
            title: None,
            markers: Vec::new(),
            y_range: (0.0, 1.0),
        }
    }
}

const MIN_DIMENSION: u32 = 100;

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

impl PlotStyle {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width < MIN_DIMENSION || self.height < MIN_DIMENSION {
            return Err(RenderError::Dimensions { width: self.width, height: self.height, min: MIN_DIMENSION });
        }
        let (lo, hi) = self.y_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(RenderError::YRange(lo, hi));
        }
        Ok(())
    }

    pub fn color(&self, magnitude: f64) -> String {
        self.low_color.lerp(self.high_color, magnitude).hex()
    }
}

/// Two-decimal display form of a magnitude.
pub fn annotation(magnitude: f64) -> String {
    format!("{magnitude:.2}")
}

pub(crate) fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
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

fn open_svg(out: &mut String, style: &PlotStyle) {
    let (w, h) = (style.width, style.height);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(out, "<rect class=\"background\" x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>");
    if let Some(t) = &style.title {
        let _ = writeln!(
            out,
            "<text class=\"title\" x=\"{:.2}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
            w as f64 / 2.0,
            escape(t)
        );
    }
}

/// Approximate rendered width of a label in pixels at 12px.
fn text_width(s: &str) -> f64 {
    s.chars().count() as f64 * 7.0
}

/// One colored cell per grid cell, row/column labels, and a [0, 1] legend.
/// Insufficient-data cells are hatched.
pub fn render_heatmap(grid: &HeatMapGrid, style: &PlotStyle) -> Result<String, RenderError> {
    style.validate()?;
    let (rows, cols) = (grid.rows(), grid.columns());
    if rows == 0 || cols == 0 {
        return Err(RenderError::Empty("grid has no cells"));
    }
    let title_h = if style.title.is_some() { 28.0 } else { 8.0 };
    let (left, top) = if style.axis_labels {
        let row_w = grid.row_labels.iter().map(|l| text_width(l)).fold(0.0, f64::max);
        let col_w = grid.column_labels.iter().map(|l| text_width(l)).fold(0.0, f64::max);
        (row_w + 12.0, title_h + col_w * 0.75 + 12.0)
    } else {
        (8.0, title_h)
    };
    let legend_w = 70.0;
    let cell_w = ((style.width as f64 - left - legend_w) / cols as f64).max(1.0);
    let cell_h = ((style.height as f64 - top - 8.0) / rows as f64).max(1.0);

    let mut out = String::new();
    open_svg(&mut out, style);
    out.push_str(
        "<defs>\n<pattern id=\"hatch\" patternUnits=\"userSpaceOnUse\" width=\"6\" height=\"6\">\
         <rect width=\"6\" height=\"6\" fill=\"#e0e0e0\"/><path d=\"M0,6 L6,0\" stroke=\"#909090\" stroke-width=\"1\"/>\
         </pattern>\n",
    );
    let _ = writeln!(
        out,
        "<linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\"><stop offset=\"0\" stop-color=\"{}\"/>\
         <stop offset=\"1\" stop-color=\"{}\"/></linearGradient>\n</defs>",
        style.color(0.0),
        style.color(1.0)
    );
    let _ = writeln!(
        out,
        "<metadata>{}</metadata>",
        escape(&format!(
            "map_kind={} distance={} window_a=[{},{}) window_b=[{},{}){}",
            grid.map_kind,
            grid.distance_kind,
            grid.window_a.start(),
            grid.window_a.end(),
            grid.window_b.start(),
            grid.window_b.end(),
            grid.class_label.as_ref().map(|c| format!(" class={c}")).unwrap_or_default()
        ))
    );

    out.push_str("<g class=\"cells\">\n");
    for i in 0..rows {
        for j in 0..cols {
            let x = left + j as f64 * cell_w;
            let y = top + i as f64 * cell_h;
            match grid.cell(i, j) {
                DriftValue::Magnitude(v) => {
                    let _ = writeln!(
                        out,
                        "<rect class=\"cell\" data-row=\"{i}\" data-col=\"{j}\" x=\"{x:.2}\" y=\"{y:.2}\" \
                         width=\"{cell_w:.2}\" height=\"{cell_h:.2}\" fill=\"{}\" stroke=\"#ffffff\"/>",
                        style.color(v)
                    );
                    if style.annotate {
                        let ink = if v > 0.5 { "#ffffff" } else { "#000000" };
                        let _ = writeln!(
                            out,
                            "<text class=\"annotation\" x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" \
                             dominant-baseline=\"central\" fill=\"{ink}\">{}</text>",
                            x + cell_w / 2.0,
                            y + cell_h / 2.0,
                            annotation(v)
                        );
                    }
                }
                DriftValue::InsufficientData => {
                    let _ = writeln!(
                        out,
                        "<rect class=\"cell insufficient\" data-row=\"{i}\" data-col=\"{j}\" x=\"{x:.2}\" \
                         y=\"{y:.2}\" width=\"{cell_w:.2}\" height=\"{cell_h:.2}\" fill=\"url(#hatch)\" stroke=\"#ffffff\"/>"
                    );
                }
            }
        }
    }
    out.push_str("</g>\n");

    if style.axis_labels {
        out.push_str("<g class=\"row-labels\">\n");
        for (i, l) in grid.row_labels.iter().enumerate() {
            let _ = writeln!(
                out,
                "<text class=\"row-label\" x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" dominant-baseline=\"central\">{}</text>",
                left - 6.0,
                top + (i as f64 + 0.5) * cell_h,
                escape(l)
            );
        }
        out.push_str("</g>\n<g class=\"column-labels\">\n");
        for (j, l) in grid.column_labels.iter().enumerate() {
            let x = left + (j as f64 + 0.5) * cell_w;
            let y = top - 6.0;
            let _ = writeln!(
                out,
                "<text class=\"column-label\" x=\"{x:.2}\" y=\"{y:.2}\" transform=\"rotate(-45 {x:.2} {y:.2})\">{}</text>",
                escape(l)
            );
        }
        out.push_str("</g>\n");
    }

    let lx = style.width as f64 - legend_w + 14.0;
    let lh = (style.height as f64 - top - 8.0).max(20.0);
    let _ = writeln!(
        out,
        "<g class=\"legend\"><rect x=\"{lx:.2}\" y=\"{top:.2}\" width=\"16\" height=\"{lh:.2}\" fill=\"url(#scale)\" \
         stroke=\"#606060\"/><text x=\"{:.2}\" y=\"{:.2}\" dominant-baseline=\"central\">1</text><text x=\"{:.2}\" \
         y=\"{:.2}\" dominant-baseline=\"central\">0</text></g>",
        lx + 22.0,
        top,
        lx + 22.0,
        top + lh
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// One polyline per measure over time, broken at insufficient-data points;
/// isolated points become markers. Dashed vertical lines mark `style.markers`.
pub fn render_lineplot(
    series: &DriftSeries,
    schema: &AttributeSchema,
    style: &PlotStyle,
) -> Result<String, RenderError> {
    style.validate()?;
    if series.points.is_empty() {
        return Err(RenderError::Empty("series has no points"));
    }
    let clock = schema.clock();
    let times = series.times();
    let (t0, t1) = (times[0], *times.last().unwrap());
    let left = 56.0;
    let legend_w = 190.0;
    let top = if style.title.is_some() { 32.0 } else { 12.0 };
    let right = (style.width as f64 - legend_w).max(left + 10.0);
    let bottom = style.height as f64 - 44.0;
    let (ylo, yhi) = style.y_range;
    let x_of = |t: i64| {
        if t1 == t0 {
            (left + right) / 2.0
        } else {
            left + (t - t0) as f64 / (t1 - t0) as f64 * (right - left)
        }
    };
    let y_of = |v: f64| bottom - ((v - ylo) / (yhi - ylo)).clamp(0.0, 1.0) * (bottom - top);

    let mut out = String::new();
    open_svg(&mut out, style);
    let _ = writeln!(
        out,
        "<metadata>{}</metadata>",
        escape(&format!(
            "step={} span={} alignment={} points={}",
            series.spec.compute_step,
            series.spec.span,
            series.spec.alignment,
            series.points.len()
        ))
    );
    let _ = writeln!(
        out,
        "<rect class=\"frame\" x=\"{left:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#404040\"/>",
        right - left,
        bottom - top
    );
    out.push_str("<g class=\"y-axis\">\n");
    for k in 0..=4 {
        let v = ylo + (yhi - ylo) * k as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{left:.2}\" y2=\"{y:.2}\" stroke=\"#404040\"/><text x=\"{:.2}\" \
             y=\"{y:.2}\" text-anchor=\"end\" dominant-baseline=\"central\">{}</text>",
            left - 4.0,
            left - 6.0,
            annotation(v)
        );
    }
    out.push_str("</g>\n");
    if style.axis_labels {
        out.push_str("<g class=\"x-axis\">\n");
        let ticks = if t1 == t0 { vec![t0] } else { (0..=4).map(|k| t0 + (t1 - t0) * k / 4).collect() };
        for t in ticks {
            let x = x_of(t);
            let _ = writeln!(
                out,
                "<line x1=\"{x:.2}\" y1=\"{bottom:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#404040\"/><text x=\"{x:.2}\" \
                 y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
                bottom + 4.0,
                bottom + 18.0,
                escape(&clock.format_time(t))
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("<g class=\"markers\">\n");
    for &m in &style.markers {
        if m < t0 || m > t1 {
            continue;
        }
        let x = x_of(m);
        let _ = writeln!(
            out,
            "<line class=\"marker\" x1=\"{x:.2}\" y1=\"{top:.2}\" x2=\"{x:.2}\" y2=\"{bottom:.2}\" stroke=\"#808080\" \
             stroke-dasharray=\"4 3\"/>"
        );
    }
    out.push_str("</g>\n");

    for (mi, spec) in series.spec.measures.iter().enumerate() {
        let color = PALETTE[mi % PALETTE.len()];
        let _ = writeln!(out, "<g class=\"measure\" data-measure=\"{}\">", escape(&spec.label(schema)));
        let values = series.values(mi);
        let mut segments: Vec<Vec<(f64, f64)>> = vec![Vec::new()];
        for (t, v) in times.iter().zip(&values) {
            match v.magnitude() {
                Some(v) => segments.last_mut().unwrap().push((x_of(*t), y_of(v))),
                None if !segments.last().unwrap().is_empty() => segments.push(Vec::new()),
                None => {}
            }
        }
        for seg in segments.iter().filter(|s| !s.is_empty()) {
            if seg.len() == 1 {
                let _ = writeln!(
                    out,
                    "<circle class=\"point\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                    seg[0].0, seg[0].1
                );
            } else {
                let pts: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    out,
                    "<polyline class=\"segment\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                    pts.join(" ")
                );
            }
        }
        out.push_str("</g>\n");
    }

    out.push_str("<g class=\"legend\">\n");
    for (mi, spec) in series.spec.measures.iter().enumerate() {
        let y = top + 8.0 + mi as f64 * 18.0;
        let x = right + 12.0;
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{}\" stroke-width=\"2\"/>\
             <text class=\"legend-label\" x=\"{:.2}\" y=\"{y:.2}\" dominant-baseline=\"central\">{}</text>",
            x + 18.0,
            PALETTE[mi % PALETTE.len()],
            x + 24.0,
            escape(&spec.label(schema))
        );
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}
