//! Minimal SVG line and scatter plots.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const MAX_POINTS: usize = 4000;

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#7f7f7f", "#bcbd22",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dots,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            style: Style::Line,
        }
    }

    pub fn dots(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            style: Style::Dots,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Dashed vertical markers `(x, label)`, drawn in the colour of the
    /// series with the same index when `Some`.
    pub v_markers: Vec<(f64, String, Option<usize>)>,
    /// Dashed horizontal reference lines.
    pub h_markers: Vec<(f64, String)>,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly five round-numbered ticks covering `[lo, hi]`.
fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.6}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

impl Plot {
    fn data_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in self.series.iter().flat_map(|s| s.points.iter()) {
            if !(x.is_finite() && y.is_finite()) || (self.log_y && *y <= 0.0) {
                continue;
            }
            xs = (xs.0.min(*x), xs.1.max(*x));
            ys = (ys.0.min(*y), ys.1.max(*y));
        }
        let widen = |(a, b): (f64, f64)| {
            if !a.is_finite() {
                (0.0, 1.0)
            } else if a == b {
                (a - 0.5 * a.abs().max(1.0), b + 0.5 * b.abs().max(1.0))
            } else {
                (a, b)
            }
        };
        (widen(xs), widen(ys))
    }

    pub fn render(&self) -> String {
        let (dx, dy) = self.data_bounds();
        let (x0, x1) = self.x_range.unwrap_or(dx);
        let (mut y0, mut y1) = self.y_range.unwrap_or(dy);
        if self.log_y {
            y0 = 10f64.powf(y0.max(1e-300).log10().floor());
            y1 = 10f64.powf(y1.max(y0 * 10.0).log10().ceil());
        } else if self.y_range.is_none() {
            let pad = 0.05 * (y1 - y0);
            y0 -= pad;
            y1 += pad;
        }
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| {
            let f = if self.log_y {
                (y.log10() - y0.log10()) / (y1.log10() - y0.log10())
            } else {
                (y - y0) / (y1 - y0)
            };
            TOP + (1.0 - f.clamp(-0.01, 1.01)) * ph
        };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );

        // x ticks
        for t in linear_ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 20.0,
                tick_label(t)
            );
        }
        // y ticks
        let y_ticks: Vec<f64> = if self.log_y {
            let (a, b) = (y0.log10().round() as i32, y1.log10().round() as i32);
            let stride = ((b - a) / 8).max(1);
            (a..=b).step_by(stride as usize).map(|e| 10f64.powi(e)).collect()
        } else {
            linear_ticks(y0, y1)
        };
        for t in y_ticks {
            let y = sy(t);
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT - 5.0,
                LEFT - 8.0,
                y + 4.0,
                tick_label(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 15.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        let _ = writeln!(
            s,
            r#"<clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath>"#
        );
        let _ = writeln!(s, r#"<g clip-path="url(#plot)">"#);
        for (y, _) in &self.h_markers {
            let yy = sy(*y);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#999" stroke-dasharray="6 4"/>"##,
                LEFT + pw
            );
        }
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let stride = series.points.len().div_ceil(MAX_POINTS).max(1);
            let last = series.points.len().saturating_sub(1);
            let pts: Vec<(f64, f64)> = series
                .points
                .iter()
                .enumerate()
                .filter(|(k, (x, y))| {
                    (k % stride == 0 || *k == last)
                        && x.is_finite()
                        && y.is_finite()
                        && !(self.log_y && *y <= 0.0)
                })
                .map(|(_, &(x, y))| (sx(x), sy(y)))
                .collect();
            match series.style {
                Style::Line => {
                    let mut d = String::new();
                    for (k, (x, y)) in pts.iter().enumerate() {
                        let _ = write!(d, "{}{x:.2},{y:.2}", if k == 0 { "M" } else { " L" });
                    }
                    let _ = writeln!(
                        s,
                        r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
                    );
                }
                Style::Dots => {
                    for (x, y) in pts {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.6" fill="{color}"/>"#
                        );
                    }
                }
            }
        }
        for (x, _, idx) in &self.v_markers {
            let color = idx.map(|i| PALETTE[i % PALETTE.len()]).unwrap_or("#555");
            let xx = sx(*x);
            let _ = writeln!(
                s,
                r#"<line x1="{xx:.2}" y1="{TOP}" x2="{xx:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="4 3"/>"#,
                TOP + ph
            );
        }
        let _ = writeln!(s, "</g>");

        // legend
        let lx = LEFT + pw + 12.0;
        let mut ly = TOP + 10.0;
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{}" y="{}">{}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0,
                escape(&series.label)
            );
            ly += 18.0;
        }
        for (_, label, idx) in &self.v_markers {
            let color = idx.map(|i| PALETTE[i % PALETTE.len()]).unwrap_or("#555");
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-dasharray="4 3"/><text x="{}" y="{}">{}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0,
                escape(label)
            );
            ly += 18.0;
        }
        for (_, label) in &self.h_markers {
            let _ = writeln!(
                s,
                r##"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="#999" stroke-dasharray="6 4"/><text x="{}" y="{}">{}</text>"##,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0,
                escape(label)
            );
            ly += 18.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(linear_ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let t = linear_ticks(-0.3, 0.7);
        assert!(t.len() >= 3 && t.len() <= 7, "{t:?}");
    }

    #[test]
    fn renders_log_plot_with_markers() {
        let p = Plot {
            title: "r <t>".into(),
            log_y: true,
            series: vec![Series::line("a", vec![(0.0, 1.0), (1.0, 1e8)])],
            v_markers: vec![(0.9, "T".into(), Some(0))],
            h_markers: vec![(1e8, "r_max".into())],
            ..Plot::default()
        };
        let s = p.render();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("r &lt;t&gt;"));
        assert!(s.contains("1e8"));
        assert!(s.contains("stroke-dasharray"));
    }
}
