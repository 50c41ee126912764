//! Minimal SVG charts: labeled bar charts and multi-series line plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

/// Rounded tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        let h = HEIGHT - TOP - BOTTOM;
        TOP + h * (1.0 - (v - self.y_lo) / (self.y_hi - self.y_lo))
    }

    fn axes(&self, out: &mut String, y_label: &str) {
        for t in ticks(self.y_lo, self.y_hi) {
            let y = self.y(t);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                WIDTH - RIGHT,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
            HEIGHT - BOTTOM
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            escape(y_label)
        );
    }
}

fn padded_range(values: impl Iterator<Item = f64>, include_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if include_zero {
        lo = lo.min(0.0);
        hi = hi.max(0.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.05 * (hi - lo);
    (
        if lo < 0.0 || !include_zero {
            lo - pad
        } else {
            lo
        },
        hi + pad,
    )
}

/// One bar per label; `None` or non-finite values leave an empty, marked slot.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, Option<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (y_lo, y_hi) = padded_range(bars.iter().filter_map(|b| b.1), true);
    let frame = Frame { y_lo, y_hi };
    frame.axes(&mut out, y_label);
    let zero = frame.y(0.0);
    let slot = (WIDTH - LEFT - RIGHT) / bars.len().max(1) as f64;
    for (i, (label, value)) in bars.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        match value.filter(|v| v.is_finite()) {
            Some(v) => {
                let y = frame.y(v);
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/><text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
                    cx - slot * 0.3,
                    y.min(zero),
                    slot * 0.6,
                    (y - zero).abs(),
                    PALETTE[i % PALETTE.len()],
                    if v >= 0.0 { y - 4.0 } else { y + 12.0 },
                    fmt_tick(v)
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" fill="gray">n/a</text>"#,
                    zero - 4.0
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 18.0,
            escape(label)
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{zero:.2}" x2="{}" y2="{zero:.2}" stroke="black"/>"#,
        WIDTH - RIGHT
    );
    out.push_str("</svg>\n");
    out
}

/// Polylines sharing one x axis, with a legend.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    series: &[(String, Vec<f64>)],
) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (y_lo, y_hi) = padded_range(series.iter().flat_map(|s| s.1.iter().copied()), false);
    let frame = Frame { y_lo, y_hi };
    frame.axes(&mut out, y_label);
    let (x_lo, x_hi) = padded_range(x.iter().copied(), false);
    let px = |v: f64| LEFT + (WIDTH - LEFT - RIGHT) * (v - x_lo) / (x_hi - x_lo);
    for t in ticks(x_lo, x_hi) {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            px(t),
            HEIGHT - BOTTOM + 16.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><text x="{2}" y="{3}" text-anchor="middle">{4}</text>"#,
        HEIGHT - BOTTOM,
        WIDTH - RIGHT,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    for (i, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(ys)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), frame.y(b)))
            .collect();
        let width = if i == 0 { 2.0 } else { 1.2 };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 14.0 * i as f64 + 6.0;
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{2}" y="{3}">{4}</text>"#,
            WIDTH - RIGHT - 110.0,
            WIDTH - RIGHT - 90.0,
            WIDTH - RIGHT - 85.0,
            ly + 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps_are_round() {
        let t = ticks(0.0, 1.0);
        assert_eq!(t.len(), 6);
        assert!(t
            .iter()
            .enumerate()
            .all(|(i, v)| (v - 0.2 * i as f64).abs() < 1e-12));
        assert_eq!(ticks(-3.0, 7.0), vec![-2.0, 0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn bar_chart_is_well_formed() {
        let svg = bar_chart(
            "R² <by kernel>",
            "R²",
            &[
                ("a".into(), Some(0.9)),
                ("b".into(), Some(-0.4)),
                ("c".into(), None),
            ],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains("n/a") && svg.contains("&lt;by kernel&gt;"));
    }

    #[test]
    fn line_chart_has_one_polyline_per_series() {
        let x = [0.0, 1.0, 2.0];
        let svg = line_chart(
            "t",
            "E",
            "T",
            &x,
            &[
                ("true".into(), vec![0.0, 1.0, 0.5]),
                ("fit".into(), vec![0.1, 0.9, f64::NAN]),
            ],
        );
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
