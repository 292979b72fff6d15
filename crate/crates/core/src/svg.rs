//! Minimal SVG line charts: stacked panels sharing the time axis, one
//! polyline per series, a legend and tick labels.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 280.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 40.0;
const PANEL_GAP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 45.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub y_label: String,
    pub series: Vec<Series>,
    /// Plot `log10(y)`; nonpositive values are dropped.
    pub log_y: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub panels: Vec<Panel>,
}

/// Up to ~6 round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(chart: &Chart) -> String {
    let n_panels = chart.panels.len().max(1);
    let height = MARGIN_TOP + n_panels as f64 * PANEL_HEIGHT + (n_panels - 1) as f64 * PANEL_GAP + MARGIN_BOTTOM;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let (x_lo, x_hi) = {
        let (lo, hi) = bounds(chart.panels.iter().flat_map(|p| p.series.iter().flat_map(|s| s.points.iter().map(|q| q.0))));
        let pad = 0.05 * (hi - lo) / 1.1;
        (lo + pad, hi - pad)
    };
    let sx = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(&chart.title));

    for (pi, panel) in chart.panels.iter().enumerate() {
        let top = MARGIN_TOP + pi as f64 * (PANEL_HEIGHT + PANEL_GAP);
        let bottom = top + PANEL_HEIGHT;
        let tf = |y: f64| if panel.log_y { y.log10() } else { y };
        let keep = |y: f64| y.is_finite() && (!panel.log_y || y > 0.0);
        let (y_lo, y_hi) = bounds(panel.series.iter().flat_map(|s| s.points.iter().filter(|q| keep(q.1)).map(|q| tf(q.1))));
        let sy = |y: f64| bottom - (y - y_lo) / (y_hi - y_lo) * PANEL_HEIGHT;

        let _ = writeln!(out, r#"<rect x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="black"/>"#);
        for t in ticks(x_lo, x_hi) {
            let x = sx(t);
            let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="black"/>"##, bottom + 5.0);
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, bottom + 18.0, fmt_tick(t));
        }
        for t in ticks(y_lo, y_hi) {
            let y = sy(t);
            let label = if panel.log_y { format!("1e{}", fmt_tick(t)) } else { fmt_tick(t) };
            let _ = writeln!(out, r##"<line x1="{}" y1="{y:.2}" x2="{MARGIN_LEFT}" y2="{y:.2}" stroke="black"/>"##, MARGIN_LEFT - 5.0);
            let _ = writeln!(out, r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#e0e0e0"/>"##, MARGIN_LEFT + plot_w);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, MARGIN_LEFT - 8.0, y + 4.0);
        }
        let _ = writeln!(
            out,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            top + PANEL_HEIGHT / 2.0,
            top + PANEL_HEIGHT / 2.0,
            escape(&panel.y_label)
        );

        for (si, s) in panel.series.iter().enumerate() {
            let color = PALETTE[si % PALETTE.len()];
            let mut pts = String::new();
            for &(x, y) in s.points.iter().filter(|q| keep(q.1)) {
                let _ = write!(pts, "{:.2},{:.2} ", sx(x), sy(tf(y)));
            }
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.trim_end());
            let ly = top + 14.0 + si as f64 * 16.0;
            let lx = MARGIN_LEFT + plot_w + 12.0;
            let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
            let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label));
        }
    }
    let last_bottom = MARGIN_TOP + n_panels as f64 * PANEL_HEIGHT + (n_panels - 1) as f64 * PANEL_GAP;
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        last_bottom + 38.0,
        escape(&chart.x_label)
    );
    out.push_str("</svg>\n");
    out
}
