//! Index plots of PRESS components as standalone SVG.

use std::fmt::Write as _;

const PANEL_WIDTH: f64 = 480.0;
const PANEL_HEIGHT: f64 = 320.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 44.0;

pub struct Panel<'a> {
    pub title: &'a str,
    pub values: &'a [f64],
    /// Zero-based indices to annotate.
    pub flagged: &'a [usize],
}

/// Indices whose value exceeds `factor` times the mean value.
pub fn flag(values: &[f64], factor: f64) -> Vec<usize> {
    if values.is_empty() {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let cut = factor * mean;
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > cut && v > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Round tick step near `span / 5`.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let base = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * base)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * base)
}

fn panel(out: &mut String, offset: f64, p: &Panel) {
    let n = p.values.len().max(1);
    let top = p.values.iter().copied().fold(0.0, f64::max);
    let step = if top > 0.0 { tick_step(top) } else { 1.0 };
    let y_max = if top > 0.0 { (top / step).ceil() * step } else { 1.0 };
    let plot_w = PANEL_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |i: usize| offset + MARGIN_LEFT + plot_w * (i as f64 + 0.5) / n as f64;
    let sy = |v: f64| MARGIN_TOP + plot_h * (1.0 - v / y_max);

    writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        offset + MARGIN_LEFT + plot_w / 2.0,
        p.title
    )
    .unwrap();
    writeln!(
        out,
        r#"<rect x="{:.2}" y="{MARGIN_TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#,
        offset + MARGIN_LEFT
    )
    .unwrap();
    let mut tick = 0.0;
    while tick <= y_max * (1.0 + 1e-9) {
        let y = sy(tick);
        writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#,
            offset + MARGIN_LEFT - 4.0,
            offset + MARGIN_LEFT,
            offset + MARGIN_LEFT - 6.0,
            y + 3.0,
            trim_number(tick)
        )
        .unwrap();
        tick += step;
    }
    let x_step = tick_step(n as f64).max(1.0) as usize;
    for i in (x_step..=n).step_by(x_step) {
        let x = sx(i - 1);
        let base = MARGIN_TOP + plot_h;
        writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{i}</text>"#,
            base + 4.0,
            base + 16.0
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">index</text>"#,
        offset + MARGIN_LEFT + plot_w / 2.0,
        PANEL_HEIGHT - 8.0
    )
    .unwrap();
    for (i, &v) in p.values.iter().enumerate() {
        writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="black"/>"#,
            sx(i),
            sy(v)
        )
        .unwrap();
    }
    for &i in p.flagged {
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="firebrick">{}</text>"#,
            sx(i) + 4.0,
            sy(p.values[i]) - 4.0,
            i + 1
        )
        .unwrap();
    }
}

fn trim_number(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Side-by-side panels in one SVG document.
pub fn render(panels: &[Panel]) -> String {
    let width = PANEL_WIDTH * panels.len() as f64;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{PANEL_HEIGHT:.0}" viewBox="0 0 {width:.0} {PANEL_HEIGHT:.0}" font-family="sans-serif">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (k, p) in panels.iter().enumerate() {
        panel(&mut out, PANEL_WIDTH * k as f64, p);
    }
    out.push_str("</svg>\n");
    out
}
