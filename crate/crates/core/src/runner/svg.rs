//! Minimal SVG figures: scatter plots and line charts on a fixed viewBox.

use std::fmt::Write as _;

pub const WIDTH: f64 = 480.0;
pub const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub fn palette(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Square,
    Circle,
    Star,
}

#[derive(Debug, Clone)]
struct Point {
    x: f64,
    y: f64,
    marker: Marker,
    color: String,
    size: f64,
}

#[derive(Debug, Clone)]
struct Line {
    points: Vec<(f64, f64)>,
    color: String,
    dashed: bool,
}

/// Data-space bounds mapped affinely onto the plot area (y grows upwards).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Viewport {
    pub fn fit(points: impl IntoIterator<Item = (f64, f64)>, pad: f64) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x0 > x1 {
            return Self { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 };
        }
        let widen = |lo: f64, hi: f64| {
            let span = (hi - lo).max(1e-9);
            (lo - pad * span, hi + pad * span)
        };
        let (x_min, x_max) = widen(x0, x1);
        let (y_min, y_max) = widen(y0, y1);
        Self { x_min, x_max, y_min, y_max }
    }

    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let inner_w = WIDTH - 2.0 * MARGIN;
        let inner_h = HEIGHT - 2.0 * MARGIN;
        let px = MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * inner_w;
        let py = HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * inner_h;
        (px, py)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Figure {
    title: String,
    x_label: String,
    y_label: String,
    points: Vec<Point>,
    lines: Vec<Line>,
    legend: Vec<(Marker, String, String)>,
    viewport: Option<Viewport>,
}

impl Figure {
    pub fn new(title: &str) -> Self {
        Self {
            title: title.to_string(),
            ..Self::default()
        }
    }

    pub fn labels(mut self, x: &str, y: &str) -> Self {
        self.x_label = x.to_string();
        self.y_label = y.to_string();
        self
    }

    pub fn viewport(mut self, v: Viewport) -> Self {
        self.viewport = Some(v);
        self
    }

    pub fn point(&mut self, x: f64, y: f64, marker: Marker, color: &str, size: f64) {
        self.points.push(Point {
            x,
            y,
            marker,
            color: color.to_string(),
            size,
        });
    }

    pub fn line(&mut self, points: Vec<(f64, f64)>, color: &str, dashed: bool) {
        self.lines.push(Line {
            points,
            color: color.to_string(),
            dashed,
        });
    }

    pub fn legend(&mut self, marker: Marker, color: &str, label: &str) {
        self.legend.push((marker, color.to_string(), label.to_string()));
    }

    pub fn render(&self) -> String {
        let vp = self.viewport.unwrap_or_else(|| {
            Viewport::fit(
                self.points
                    .iter()
                    .map(|p| (p.x, p.y))
                    .chain(self.lines.iter().flat_map(|l| l.points.iter().copied())),
                0.05,
            )
        });
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let (l, b) = (MARGIN, HEIGHT - MARGIN);
        let (r, t) = (WIDTH - MARGIN, MARGIN);
        let _ = writeln!(
            s,
            r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="dimgray"/>"#,
            r - l,
            b - t
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = vp.x_min + f * (vp.x_max - vp.x_min);
            let yv = vp.y_min + f * (vp.y_max - vp.y_min);
            let (px, _) = vp.map(xv, vp.y_min);
            let (_, py) = vp.map(vp.x_min, yv);
            let _ = writeln!(
                s,
                r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                b + 14.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{py:.1}" text-anchor="end" dominant-baseline="middle">{}</text>"#,
                l - 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
            WIDTH / 2.0,
            t - 16.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="12" y="{}" text-anchor="middle" transform="rotate(-90 12 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for line in &self.lines {
            let pts: Vec<String> = line
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| {
                    let (px, py) = vp.map(x, y);
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            let dash = if line.dashed { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
                pts.join(" "),
                line.color
            );
        }
        for p in &self.points {
            if !(p.x.is_finite() && p.y.is_finite()) {
                continue;
            }
            let (px, py) = vp.map(p.x, p.y);
            s.push_str(&marker_svg(p.marker, px, py, p.size, &p.color));
        }
        for (k, (marker, color, label)) in self.legend.iter().enumerate() {
            let y = t + 12.0 + 16.0 * k as f64;
            s.push_str(&marker_svg(*marker, r - 110.0, y, 4.0, color));
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" dominant-baseline="middle">{}</text>"#,
                r - 100.0,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn marker_svg(marker: Marker, x: f64, y: f64, size: f64, color: &str) -> String {
    match marker {
        Marker::Square => format!(
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" stroke="black" stroke-width="0.5"/>
"#,
            x - size,
            y - size,
            2.0 * size,
            2.0 * size
        ),
        Marker::Circle => format!(
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{size:.2}" fill="{color}" fill-opacity="0.7"/>
"#
        ),
        Marker::Star => {
            let pts: Vec<String> = (0..10)
                .map(|k| {
                    let r = if k % 2 == 0 { 1.6 * size } else { 0.7 * size };
                    let a = std::f64::consts::PI * (k as f64 / 5.0 - 0.5);
                    format!("{:.2},{:.2}", x + r * a.cos(), y + r * a.sin())
                })
                .collect();
            format!(
                r#"<polygon points="{}" fill="{color}" stroke="black" stroke-width="0.4"/>
"#,
                pts.join(" ")
            )
        }
    }
}

fn tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-2 && v.abs() < 1e4) {
        format!("{:.2}", v)
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
