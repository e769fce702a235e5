//! Minimal self-contained SVG charts.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 54.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

pub struct Axes<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn draw_axes(&self, out: &mut String, axes: &Axes) {
        let _ = write!(
            out,
            r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
        for t in ticks(self.x.0, self.x.1) {
            let x = self.px(t);
            let _ = write!(
                out,
                r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                HEIGHT - BOTTOM,
                HEIGHT - BOTTOM + 5.0,
                HEIGHT - BOTTOM + 20.0,
                label(t)
            );
        }
        for t in ticks(self.y.0, self.y.1) {
            let y = self.py(t);
            let _ = write!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                LEFT - 5.0,
                LEFT - 8.0,
                y + 4.0,
                label(t)
            );
        }
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text><text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text><text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(axes.title),
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT - 12.0,
            escape(axes.x_label),
            (TOP + HEIGHT - BOTTOM) / 2.0,
            escape(axes.y_label)
        );
    }
}

fn header() -> String {
    format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12"><rect width="100%" height="100%" fill="white"/>"#
    )
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

/// Line chart; non-finite points break the line.
pub fn line_chart(axes: &Axes, series: &[Series]) -> String {
    let x = finite_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = finite_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let frame = Frame::new(
        if x.0.is_finite() { x } else { (0.0, 1.0) },
        if y.0.is_finite() { y } else { (0.0, 1.0) },
    );
    let mut out = header();
    frame.draw_axes(&mut out, axes);
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for &(px, py) in s.points {
            if !(px.is_finite() && py.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, frame.px(px), frame.py(py));
            pen_down = true;
        }
        let _ = write!(out, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        if series.len() > 1 {
            let ly = TOP + 16.0 + 16.0 * k as f64;
            let _ = write!(
                out,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                WIDTH - RIGHT - 150.0,
                WIDTH - RIGHT - 130.0,
                WIDTH - RIGHT - 125.0,
                ly + 4.0,
                escape(s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Blue-white-red color for `t` in `[0, 1]`.
fn diverging(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (40.0 + 215.0 * s, 80.0 + 175.0 * s, 200.0 + 55.0 * s)
    } else {
        let s = (t - 0.5) / 0.5;
        (255.0 - 20.0 * s, 255.0 - 200.0 * s, 255.0 - 215.0 * s)
    };
    format!("rgb({},{},{})", r as u8, g as u8, b as u8)
}

/// Boundaries halfway between grid points, extended by half a spacing at
/// the ends.
fn cell_edges(v: &[f64]) -> Vec<f64> {
    match v.len() {
        0 => vec![0.0, 1.0],
        1 => vec![v[0] - 0.5, v[0] + 0.5],
        n => {
            let mut e = Vec::with_capacity(n + 1);
            e.push(v[0] - 0.5 * (v[1] - v[0]));
            e.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            e.push(v[n - 1] + 0.5 * (v[n - 1] - v[n - 2]));
            e
        }
    }
}

/// Color map of `values[row][col]` over the `rows` × `cols` grid; `None`
/// cells are drawn grey.
pub fn heat_map(axes: &Axes, cols: &[f64], rows: &[f64], values: &[Vec<Option<f64>>]) -> String {
    let (col_edges, row_edges) = (cell_edges(cols), cell_edges(rows));
    let span = |e: &[f64]| (e[0], e[e.len() - 1]);
    let frame = Frame::new(span(&col_edges), span(&row_edges));
    let (lo, hi) = finite_range(values.iter().flatten().flatten().copied());
    let limit = lo.abs().max(hi.abs()).max(1e-12);
    let mut out = header();
    for (r, row) in values.iter().enumerate() {
        let (y0, y1) = (row_edges[r], row_edges[r + 1]);
        for (c, v) in row.iter().enumerate() {
            let (x0, x1) = (col_edges[c], col_edges[c + 1]);
            let fill = v.map_or("#bbbbbb".to_string(), |v| diverging(0.5 + 0.5 * v / limit));
            let (px0, px1) = (frame.px(x0).max(LEFT), frame.px(x1).min(WIDTH - RIGHT));
            let (py0, py1) = (frame.py(y1).max(TOP), frame.py(y0).min(HEIGHT - BOTTOM));
            let _ = write!(
                out,
                r#"<rect x="{px0:.2}" y="{py0:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                (px1 - px0).max(0.0) + 0.3,
                (py1 - py0).max(0.0) + 0.3
            );
        }
    }
    frame.draw_axes(&mut out, axes);
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">color: ±{} dB</text>"#,
        WIDTH - RIGHT,
        TOP - 6.0,
        label(limit)
    );
    out.push_str("</svg>\n");
    out
}
