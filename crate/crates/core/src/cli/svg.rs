//! Self-contained SVG line charts.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const PANEL_H: f64 = 220.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const GAP: f64 = 50.0;
const MAX_POINTS: usize = 4000;

pub struct Series<'a> {
    pub label: &'a str,
    pub values: Vec<f64>,
    pub color: &'a str,
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

/// One panel per series, sharing a logarithmic `x` axis.
pub fn panels(title: &str, x_label: &str, x: &[f64], series: &[Series]) -> String {
    let height = MARGIN_T + series.len() as f64 * (PANEL_H + GAP);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" style="font-family:sans-serif;font-size:11px">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="18" text-anchor="middle" style="font-size:14px">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let keep: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    if keep.len() < 2 {
        out.push_str("</svg>\n");
        return out;
    }
    let stride = keep.len().div_ceil(MAX_POINTS);
    let mut idx: Vec<usize> = keep.iter().cloned().step_by(stride).collect();
    if idx.last() != keep.last() {
        idx.push(*keep.last().unwrap());
    }
    let lx0 = x[keep[0]].log10();
    let lx1 = x[*keep.last().unwrap()].log10();
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let sx = |v: f64| MARGIN_L + (v.log10() - lx0) / (lx1 - lx0).max(1e-300) * plot_w;

    for (p, s) in series.iter().enumerate() {
        let top = MARGIN_T + p as f64 * (PANEL_H + GAP);
        let finite: Vec<f64> = idx.iter().map(|&i| s.values[i]).filter(|v| v.is_finite()).collect();
        let (mut lo, mut hi) =
            finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        if !(hi > lo) {
            lo -= 1.0;
            hi += 1.0;
        }
        let pad = 0.05 * (hi - lo);
        let (lo, hi) = (lo - pad, hi + pad);
        let sy = |v: f64| top + PANEL_H - (v - lo) / (hi - lo) * PANEL_H;
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN_L}" y="{top}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        );
        for t in nice_ticks(lo, hi, 5) {
            let yy = sy(t);
            let _ = writeln!(
                out,
                r##"<line x1="{MARGIN_L}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                MARGIN_L + plot_w,
                MARGIN_L - 4.0,
                yy + 4.0,
                fmt_tick(t)
            );
        }
        if lo < 0.0 && hi > 0.0 {
            let y0 = sy(0.0);
            let _ = writeln!(
                out,
                r##"<line x1="{MARGIN_L}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
                MARGIN_L + plot_w
            );
        }
        for e in lx0.floor() as i32..=lx1.ceil() as i32 {
            let v = 10f64.powi(e);
            if v.log10() < lx0 - 1e-12 || v.log10() > lx1 + 1e-12 {
                continue;
            }
            let xx = sx(v);
            let _ = writeln!(
                out,
                r##"<line x1="{xx:.2}" y1="{top}" x2="{xx:.2}" y2="{:.2}" stroke="#ddd"/><text x="{xx:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"##,
                top + PANEL_H,
                top + PANEL_H + 14.0
            );
        }
        let mut pts = String::new();
        for &i in &idx {
            let v = s.values[i];
            if v.is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(x[i]), sy(v));
            }
        }
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            s.color,
            pts.trim_end()
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" style="font-size:13px" fill="{}">{}</text><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_L + 8.0,
            top + 16.0,
            s.color,
            escape(s.label),
            MARGIN_L + plot_w,
            top + PANEL_H + 28.0,
            escape(x_label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_self_contained_document() {
        let x: Vec<f64> = (1..=100).map(|i| 0.01 * i as f64).collect();
        let s = vec![
            Series { label: "W", values: x.iter().map(|v| -1.0 - v).collect(), color: "#1f77b4" },
            Series { label: "R", values: x.iter().map(|v| 2.0 / (v * v)).collect(), color: "#d62728" },
        ];
        let svg = panels("profile <test>", "y", &x, &s);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("&lt;test&gt;"));
        assert!(!svg.contains("href"));
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(nice_ticks(0.0, 10.0, 5), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(nice_ticks(1.0, 1.0, 5), vec![1.0]);
    }
}
