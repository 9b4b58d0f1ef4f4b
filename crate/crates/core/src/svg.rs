//! Minimal SVG plots: line/stem charts and color-mapped heatmaps.

use std::fmt::Write;

const W: f64 = 760.0;
const H: f64 = 380.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    /// Vertical stems from zero, used for firing instants.
    Stems,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Series {
            name: name.into(),
            points,
            style,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Horizontal reference lines (value, label).
    pub guides: Vec<(f64, String)>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-300);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        esc(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>",
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for t in nice_ticks(f.x0, f.x1, 8) {
        let x = f.px(t);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#333\"/><text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            H - BOTTOM,
            H - BOTTOM + 5.0,
            H - BOTTOM + 18.0,
            tick_label(t)
        );
    }
    for t in nice_ticks(f.y0, f.y1, 6) {
        let y = f.py(t);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"#333\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 10.0,
        esc(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>",
        TOP + (H - TOP - BOTTOM) / 2.0,
        TOP + (H - TOP - BOTTOM) / 2.0,
        esc(y_label)
    );
}

fn bounds(plot: &LinePlot) -> Frame {
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for s in &plot.series {
        for &(x, y) in s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if s.style == Style::Stems {
            y0 = y0.min(0.0);
            y1 = y1.max(0.0);
        }
    }
    for (g, _) in &plot.guides {
        y0 = y0.min(*g);
        y1 = y1.max(*g);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    Frame {
        x0,
        x1,
        y0: y0 - pad,
        y1: y1 + pad,
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let f = bounds(self);
        let mut out = String::new();
        header(&mut out, &self.title);
        axes(&mut out, &f, &self.x_label, &self.y_label);
        for (g, label) in &self.guides {
            let y = f.py(*g);
            let _ = writeln!(
                out,
                "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#888\" stroke-dasharray=\"5,4\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#555\">{}</text>",
                W - RIGHT,
                W - RIGHT - 4.0,
                y - 4.0,
                esc(label)
            );
        }
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts = s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite());
            match s.style {
                Style::Line => {
                    let path: Vec<String> = pts
                        .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
                        .collect();
                    let _ = writeln!(
                        out,
                        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.3\" points=\"{}\"/>",
                        path.join(" ")
                    );
                }
                Style::Stems => {
                    let base = f.py(0.0);
                    for &(x, y) in pts {
                        let _ = writeln!(
                            out,
                            "<line x1=\"{0:.2}\" y1=\"{base:.2}\" x2=\"{0:.2}\" y2=\"{1:.2}\" stroke=\"{color}\" stroke-width=\"0.7\"/>",
                            f.px(x),
                            f.py(y)
                        );
                    }
                }
                Style::Markers => {
                    for &(x, y) in pts {
                        let _ = writeln!(
                            out,
                            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{color}\"/>",
                            f.px(x),
                            f.py(y)
                        );
                    }
                }
            }
            let ly = TOP + 14.0 + 15.0 * i as f64;
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"12\" height=\"3\" fill=\"{color}\"/><text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
                LEFT + 10.0,
                ly - 4.0,
                LEFT + 26.0,
                ly,
                esc(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_ticks: Vec<String>,
    pub y_ticks: Vec<String>,
    /// `values[row][col]`, rows along y.
    pub values: Vec<Vec<f64>>,
}

fn ramp(u: f64) -> String {
    // dark blue → yellow
    let u = u.clamp(0.0, 1.0);
    let r = (30.0 + 225.0 * u) as u8;
    let g = (40.0 + 200.0 * u) as u8;
    let b = (110.0 - 80.0 * u) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

impl Heatmap {
    pub fn render(&self) -> String {
        let mut out = String::new();
        header(&mut out, &self.title);
        let rows = self.values.len().max(1);
        let cols = self.values.first().map_or(1, |r| r.len().max(1));
        let finite = self.values.iter().flatten().filter(|v| v.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = finite.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let cw = (W - LEFT - RIGHT - 60.0) / cols as f64;
        let ch = (H - TOP - BOTTOM) / rows as f64;
        for (r, row) in self.values.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let x = LEFT + c as f64 * cw;
                let y = H - BOTTOM - (r + 1) as f64 * ch;
                let fill = if v.is_finite() { ramp((v - lo) / span) } else { "#cccccc".into() };
                let _ = writeln!(
                    out,
                    "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cw:.2}\" height=\"{ch:.2}\" fill=\"{fill}\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"10\" fill=\"{}\">{}</text>",
                    x + cw / 2.0,
                    y + ch / 2.0 + 3.0,
                    if v.is_finite() && (v - lo) / span > 0.6 { "black" } else { "white" },
                    if v.is_finite() { format!("{v:.1}") } else { "-".into() }
                );
            }
        }
        for (c, t) in self.x_ticks.iter().enumerate() {
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
                LEFT + (c as f64 + 0.5) * cw,
                H - BOTTOM + 16.0,
                esc(t)
            );
        }
        for (r, t) in self.y_ticks.iter().enumerate() {
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                LEFT - 6.0,
                H - BOTTOM - (r as f64 + 0.5) * ch + 4.0,
                esc(t)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>",
            LEFT + cols as f64 * cw / 2.0,
            H - 10.0,
            esc(&self.x_label),
            TOP + (H - TOP - BOTTOM) / 2.0,
            TOP + (H - TOP - BOTTOM) / 2.0,
            esc(&self.y_label)
        );
        // color bar
        let bx = W - RIGHT - 40.0;
        for k in 0..20 {
            let u = k as f64 / 19.0;
            let y = H - BOTTOM - (k + 1) as f64 * (H - TOP - BOTTOM) / 20.0;
            let _ = writeln!(
                out,
                "<rect x=\"{bx:.2}\" y=\"{y:.2}\" width=\"14\" height=\"{:.2}\" fill=\"{}\"/>",
                (H - TOP - BOTTOM) / 20.0 + 0.5,
                ramp(u)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\">{}</text><text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\">{}</text>",
            bx - 4.0,
            TOP - 4.0,
            tick_label(hi),
            bx - 4.0,
            H - BOTTOM + 14.0,
            tick_label(lo)
        );
        out.push_str("</svg>\n");
        out
    }
}
