//! Self-contained SVG line plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 52.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stroke {
    Solid,
    Dashed,
    Dotted,
    /// Markers only, no connecting line.
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: Option<String>,
    pub color: String,
    pub stroke: Stroke,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(color: &str, stroke: Stroke, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: None,
            color: color.into(),
            stroke,
            points,
        }
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub series: Vec<Series>,
}

/// A blue-to-red ramp for `t` in `[0, 1]`.
pub fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (40.0 + 200.0 * t).round() as u8;
    let b = (220.0 - 190.0 * t).round() as u8;
    format!("#{r:02x}50{b:02x}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Tick positions with their labels.
fn ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let span = (hi - lo).abs();
    if span == 0.0 || !span.is_finite() {
        return vec![(lo, lo.to_string())];
    }
    let raw = span / 5.0;
    let exponent = raw.log10().floor();
    let mag = 10f64.powf(exponent);
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let decimals = (-(step.log10() + 1e-9).floor()).max(0.0) as usize;
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last)
        .map(|k| {
            let t = k as f64 * step;
            (t, format!("{t:.decimals$}"))
        })
        .collect()
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range,
            y_range,
            series: Vec::new(),
        }
    }

    pub fn push(&mut self, series: Series) -> &mut Self {
        self.series.push(series);
        self
    }

    pub fn render(&self) -> String {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(s, r##"<g stroke="#dddddd" stroke-width="1">"##);
        for (t, _) in ticks(x0, x1) {
            let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#, sx(t), TOP, TOP + ph);
        }
        for (t, _) in ticks(y0, y1) {
            let _ = writeln!(s, r#"<line x1="{1:.2}" y1="{0:.2}" x2="{2:.2}" y2="{0:.2}"/>"#, sy(t), LEFT, LEFT + pw);
        }
        let _ = writeln!(s, "</g>");
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for (t, label) in ticks(x0, x1) {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, sx(t), TOP + ph + 16.0);
        }
        for (t, label) in ticks(y0, y1) {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 6.0, sy(t) + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">{1}</text>"#,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let _ = writeln!(
            s,
            r#"<clipPath id="plot-area"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#
        );
        let _ = writeln!(s, r#"<g clip-path="url(#plot-area)" fill="none" stroke-width="1.6">"#);
        for series in &self.series {
            let pts: Vec<String> = series.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let dash = match series.stroke {
                Stroke::Dashed => r#" stroke-dasharray="6 4""#,
                Stroke::Dotted => r#" stroke-dasharray="2 3""#,
                _ => "",
            };
            if series.stroke == Stroke::Points {
                for p in &pts {
                    let (x, y) = p.split_once(',').expect("formatted as x,y");
                    let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{}" stroke="none"/>"#, series.color);
                }
            } else if !pts.is_empty() {
                let _ = writeln!(s, r#"<polyline points="{}" stroke="{}"{dash}/>"#, pts.join(" "), series.color);
            }
        }
        let _ = writeln!(s, "</g>");

        let mut y = TOP + 8.0;
        for series in self.series.iter().filter(|s| s.label.is_some()) {
            let x = LEFT + pw + 12.0;
            let dash = match series.stroke {
                Stroke::Dashed => r#" stroke-dasharray="6 4""#,
                Stroke::Dotted => r#" stroke-dasharray="2 3""#,
                _ => "",
            };
            if series.stroke == Stroke::Points {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, x + 10.0, series.color);
            } else {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="1.6"{dash}/>"#,
                    x + 20.0,
                    series.color
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                x + 26.0,
                y + 4.0,
                escape(series.label.as_deref().unwrap_or(""))
            );
            y += 18.0;
        }
        s.push_str("</svg>\n");
        s
    }
}
