//! Minimal static line and stem charts.

use std::fmt::Write;

use super::experiments::{ChainResult, SweepResult};
use crate::spectral::Spectrum;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Most points drawn per spectrum; larger spectra keep the maximum of each
/// bucket so narrow lines survive.
const SPECTRUM_POINTS: usize = 2000;

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) if hi > lo => (lo, hi),
                (true, true) => (lo - 0.5, hi + 0.5),
                _ => (0.0, 1.0),
            }
        };
        Self {
            x: range(&mut xs.clone()),
            y: range(&mut ys.clone()),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open(title: &str, axes: &Axes, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{x0}" y="{}" text-anchor="start">{:.4}</text>"#,
        y0 + 14.0,
        axes.x.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{x1}" y="{}" text-anchor="end">{:.4}</text>"#,
        y0 + 14.0,
        axes.x.1
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{y0}" text-anchor="end">{:.4}</text>"#,
        x0 - 4.0,
        axes.y.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{:.4}</text>"#,
        x0 - 4.0,
        y1 + 4.0,
        axes.y.1
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" text-anchor="middle" transform="rotate(-90 12 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    s
}

fn polyline(s: &mut String, axes: &Axes, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
    let points: Vec<String> = pts
        .map(|(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="1"/>"#,
        points.join(" ")
    );
}

fn legend(s: &mut String, entries: &[(&str, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let x = WIDTH - MARGIN - 140.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#,
            y - 9.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y}">{}</text>"#,
            x + 14.0,
            escape(label)
        );
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Single-order and averaged deviation against δ.
pub fn sweep_chart(sweep: &SweepResult) -> String {
    let rows = &sweep.rows;
    let axes = Axes::fit(
        rows.iter().map(|r| r.delta),
        rows.iter().flat_map(|r| [r.dev1_bins, r.devavg_bins]),
    );
    let title = format!(
        "deviation vs delta (epsilon={}, N={})",
        sweep.epsilon, sweep.order_count
    );
    let mut s = open(&title, &axes, "delta (bins)", "deviation (bins)");
    polyline(
        &mut s,
        &axes,
        rows.iter().map(|r| (r.delta, r.dev1_bins)),
        COLORS[0],
    );
    polyline(
        &mut s,
        &axes,
        rows.iter().map(|r| (r.delta, r.devavg_bins)),
        COLORS[1],
    );
    legend(
        &mut s,
        &[
            ("single order", COLORS[0]),
            ("multi-order average", COLORS[1]),
        ],
    );
    s.push_str("</svg>\n");
    s
}

/// Magnitude in dB relative to the largest bin, against frequency in GHz.
pub fn spectrum_chart(spec: &Spectrum) -> String {
    let mags = spec.magnitudes();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let db = |m: f64| {
        if peak > 0.0 {
            (20.0 * (m / peak).log10()).max(-160.0)
        } else {
            -160.0
        }
    };
    let bucket = mags.len().div_ceil(SPECTRUM_POINTS).max(1);
    let pts: Vec<(f64, f64)> = mags
        .chunks(bucket)
        .enumerate()
        .map(|(i, c)| {
            let (off, m) =
                c.iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (j, m)| if m > acc.1 { (j, m) } else { acc },
                    );
            (
                spec.grid().bin_to_hz((i * bucket + off) as f64) / 1e9,
                db(m),
            )
        })
        .collect();
    let axes = Axes::fit(pts.iter().map(|p| p.0), pts.iter().map(|p| p.1));
    let mut s = open("spectrum", &axes, "frequency (GHz)", "magnitude (dB)");
    polyline(&mut s, &axes, pts.into_iter(), COLORS[0]);
    s.push_str("</svg>\n");
    s
}

/// Truth, (order, deviation kHz) stems and the average in kHz.
type DeviationSeries = (f64, Vec<(f64, f64)>, Option<f64>);

/// Stems of the per-order deviations with each tone's average drawn flat.
pub fn deviation_chart(chain: &ChainResult) -> String {
    let series: Vec<DeviationSeries> = chain
        .tones
        .iter()
        .map(|t| {
            let pts = t
                .estimate
                .iter()
                .flat_map(|e| e.zones.iter())
                .filter_map(|z| z.deviation_hz.map(|d| (z.order as f64, d / 1e3)))
                .collect();
            (t.truth_hz, pts, t.avg_deviation_hz().map(|d| d / 1e3))
        })
        .collect();
    let xs = series.iter().flat_map(|s| s.1.iter().map(|p| p.0));
    let ys = series
        .iter()
        .flat_map(|s| s.1.iter().map(|p| p.1).chain(s.2).chain([0.0]));
    let axes = Axes::fit(xs, ys);
    let mut s = open("per-order deviation", &axes, "order n", "deviation (kHz)");
    let base = axes.py(0.0);
    let mut labels = Vec::new();
    for (i, (truth, pts, avg)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let shift = 4.0 * i as f64;
        for &(x, y) in pts {
            let (px, py) = (axes.px(x) + shift, axes.py(y));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{base:.2}" x2="{px:.2}" y2="{py:.2}" stroke="{color}"/>"#
            );
            let _ = writeln!(
                s,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{color}"/>"#
            );
        }
        if let Some(a) = avg {
            let y = axes.py(*a);
            let _ = writeln!(
                s,
                r#"<line x1="{MARGIN}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="{color}" stroke-dasharray="4 3"/>"#,
                WIDTH - MARGIN
            );
        }
        labels.push(format!("{:.4} GHz", truth / 1e9));
    }
    let entries: Vec<(&str, &str)> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), COLORS[i % COLORS.len()]))
        .collect();
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    s
}
