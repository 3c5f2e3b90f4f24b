//! Minimal SVG line and bar charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Scale {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let t = if log { v.log10() } else { v };
            if t.is_finite() {
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Scale { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let t = if self.log { v.log10() } else { v };
        t.is_finite().then(|| (t - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..=4)
            .map(|k| {
                let f = k as f64 / 4.0;
                let t = self.lo + f * (self.hi - self.lo);
                (f, fmt_tick(if self.log { 10f64.powf(t) } else { t }))
            })
            .collect()
    }
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>
"#,
        (LEFT + W - RIGHT) / 2.0,
        escape(title),
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(x_label),
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(y_label),
        W - LEFT - RIGHT,
        H - TOP - BOTTOM,
    );
}

/// One polyline per series with a legend on the right. Non-finite points
/// (and non-positive ones on a log axis) are skipped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], axes: Axes) -> String {
    let xs = Scale::new(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), axes.log_x);
    let ys = Scale::new(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), axes.log_y);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label);
    for (f, label) in xs.ticks() {
        let x = LEFT + f * pw;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
    }
    for (f, label) in ys.ticks() {
        let y = TOP + ph - f * ph;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter_map(|&(x, y)| {
                let (fx, fy) = (xs.frac(x)?, ys.frac(y)?);
                Some(format!("{:.1},{:.1}", LEFT + fx * pw, TOP + ph - fy * ph))
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - RIGHT + 10.0,
            W - RIGHT + 30.0,
            W - RIGHT + 35.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bars, one per category.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let ys = Scale::new(bars.iter().map(|b| b.1).chain(std::iter::once(0.0)), false);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let mut out = String::new();
    frame(&mut out, title, "", y_label);
    for (f, label) in ys.ticks() {
        let y = TOP + ph - f * ph;
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let slot = pw / bars.len().max(1) as f64;
    let base = TOP + ph - ys.frac(0.0).unwrap_or(0.0) * ph;
    for (k, (label, v)) in bars.iter().enumerate() {
        let top = TOP + ph - ys.frac(*v).unwrap_or(0.0) * ph;
        let x = LEFT + slot * k as f64 + slot * 0.15;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/><text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            top.min(base),
            slot * 0.7,
            (base - top).abs(),
            PALETTE[k % PALETTE.len()],
            x + slot * 0.35,
            TOP + ph + 16.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Stacks complete charts top to bottom in one document.
pub fn stack_vertical(panels: &[String]) -> String {
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{}\">\n",
        H * panels.len() as f64
    );
    for (k, p) in panels.iter().enumerate() {
        let inner = p.replacen("<svg ", &format!("<svg y=\"{}\" ", H * k as f64), 1);
        out.push_str(&inner);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_well_formed() {
        let s = vec![
            Series { label: "m=64".into(), points: vec![(0.0, 1.0), (0.5, 0.2), (0.9, f64::INFINITY)] },
            Series { label: "a<b".into(), points: vec![(0.0, 2.0)] },
        ];
        let svg = line_chart("t", "tau", "err", &s, Axes::default());
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn log_axes_skip_nonpositive() {
        let s = vec![Series { label: "x".into(), points: vec![(1.0, 0.0), (10.0, 1.0), (100.0, 0.1)] }];
        let svg = line_chart("t", "m", "d", &s, Axes { log_x: true, log_y: true });
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn bars() {
        let svg = bar_chart("err", "rate", &[("DSRR".into(), 0.1), ("DisDCA".into(), 0.05)]);
        assert_eq!(svg.matches("<rect").count(), 4);
        let both = stack_vertical(&[svg.clone(), svg]);
        assert_eq!(both.matches("<svg").count(), 3);
        assert!(both.contains(&format!("y=\"{H}\"")));
    }
}
