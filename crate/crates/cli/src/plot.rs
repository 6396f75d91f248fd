//! Minimal deterministic SVG charts.
//!
//! Every series is emitted as `<g class="series" data-name="...">` holding
//! either one `<polyline>` (lines), `<rect>`s (bars) or `<circle>`s
//! (points), so tests can recover the plotted coordinates structurally.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Bars,
    Points,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub mark: Mark,
    pub color: &'static str,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub enum Ticks {
    Linear,
    /// Coordinates are already log10 values; ticks are drawn at integers
    /// and labelled as powers of ten.
    Decades,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_ticks: Ticks,
    pub y_ticks: Ticks,
    pub series: Vec<Series>,
    pub notes: Vec<String>,
    /// Fixed x range; derived from the data when `None`.
    pub x_range: Option<(f64, f64)>,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_ticks: Ticks::Linear,
            y_ticks: Ticks::Linear,
            series: Vec::new(),
            notes: Vec::new(),
            x_range: None,
        }
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let pts = self.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return ((0.0, 1.0), (0.0, 1.0));
        }
        if self.series.iter().any(|s| s.mark == Mark::Bars) {
            y0 = y0.min(0.0);
        }
        let pad = |lo: f64, hi: f64| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let xr = self.x_range.unwrap_or(pad(x0, x1));
        let (ylo, yhi) = pad(y0, y1);
        let extra = (yhi - ylo) * 0.05;
        (xr, (if ylo == 0.0 { 0.0 } else { ylo - extra }, yhi + extra))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
        let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            esc(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );

        for t in ticks(x0, x1, self.x_ticks) {
            let x = sx(t);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                MARGIN_T + plot_h,
                MARGIN_T + plot_h + 5.0,
                MARGIN_T + plot_h + 19.0,
                label(t, self.x_ticks)
            );
        }
        for t in ticks(y0, y1, self.y_ticks) {
            let y = sy(t);
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_L}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_L - 5.0,
                MARGIN_L - 8.0,
                y + 4.0,
                label(t, self.y_ticks)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_L + plot_w / 2.0,
            HEIGHT - 12.0,
            esc(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            MARGIN_T + plot_h / 2.0,
            esc(&self.y_label)
        );

        let clip = |x: f64| x >= x0 && x <= x1;
        for series in &self.series {
            let _ = writeln!(s, r#"<g class="series" data-name="{}">"#, esc(&series.name));
            let visible: Vec<(f64, f64)> =
                series.points.iter().copied().filter(|p| clip(p.0) && p.1.is_finite()).collect();
            match series.mark {
                Mark::Line => {
                    let pts: Vec<String> = visible.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                        series.color,
                        pts.join(" ")
                    );
                }
                Mark::Points => {
                    for &(x, y) in &visible {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                            sx(x),
                            sy(y),
                            series.color
                        );
                    }
                }
                Mark::Bars => {
                    let bar_w = if visible.len() > 1 {
                        ((sx(visible[1].0) - sx(visible[0].0)).abs()).max(0.5)
                    } else {
                        plot_w / 10.0
                    };
                    for &(x, y) in &visible {
                        let top = sy(y.max(y0));
                        let _ = writeln!(
                            s,
                            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                            sx(x) - bar_w / 2.0,
                            top,
                            bar_w,
                            (sy(y0) - top).max(0.0),
                            series.color
                        );
                    }
                }
            }
            let _ = writeln!(s, "</g>");
        }
        for (i, note) in self.notes.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text class="note" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                WIDTH - MARGIN_R - 8.0,
                MARGIN_T + 18.0 + 16.0 * i as f64,
                esc(note)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn ticks(lo: f64, hi: f64, kind: Ticks) -> Vec<f64> {
    match kind {
        Ticks::Decades => (lo.ceil() as i64..=hi.floor() as i64).map(|k| k as f64).collect(),
        Ticks::Linear => {
            let span = hi - lo;
            let raw = span / 6.0;
            let mag = 10f64.powf(raw.log10().floor());
            let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|&s| s >= raw).unwrap_or(10.0 * mag);
            let start = (lo / step).ceil() as i64;
            let end = (hi / step).floor() as i64;
            (start..=end).map(|k| k as f64 * step).collect()
        }
    }
}

fn label(v: f64, kind: Ticks) -> String {
    match kind {
        Ticks::Decades => format!("1e{}", v as i64),
        Ticks::Linear => {
            let r = (v * 1e6).round() / 1e6;
            if r == 0.0 {
                "0".into()
            } else {
                format!("{r}")
            }
        }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
