//! Minimal static SVG line charts for density and error curves.

use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Renders the series on shared axes. `log_y` plots `log10(y)` and drops
/// non-positive values.
pub fn line_chart(title: &str, x_label: &str, series: &[Series], log_y: bool) -> Result<String> {
    let mut points: Vec<Vec<(f64, f64)>> = Vec::with_capacity(series.len());
    for s in series {
        if s.x.len() != s.y.len() {
            return Err(Error::invalid("series", format!("`{}` has {} x and {} y values", s.label, s.x.len(), s.y.len())));
        }
        points.push(
            s.x.iter()
                .zip(&s.y)
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || **y > 0.0))
                .map(|(x, y)| (*x, if log_y { y.log10() } else { *y }))
                .collect(),
        );
    }
    let all = points.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Err(Error::invalid("series", "nothing to plot"));
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    for (v, anchor, x) in [(x0, "start", MARGIN), (x1, "end", WIDTH - MARGIN)] {
        let _ = writeln!(out, r#"<text x="{x}" y="{}" text-anchor="{anchor}">{v:.3}</text>"#, HEIGHT - MARGIN + 15.0);
    }
    let fmt_y = |v: f64| if log_y { format!("1e{v:.1}") } else { format!("{v:.3}") };
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, HEIGHT - MARGIN, fmt_y(y0));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + 4.0, fmt_y(y1));
    for (i, (s, pts)) in series.iter().zip(&points).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (k, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if k == 0 { "M" } else { "L" }, sx(x), sy(y));
        }
        let _ = writeln!(out, r#"<path d="{}" stroke="{color}" fill="none" stroke-width="1.5"/>"#, d.trim_end());
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_path_per_series() {
        let s = |label: &str, k: f64| Series {
            label: label.into(),
            x: vec![0.0, 1.0, 2.0],
            y: vec![k, 2.0 * k, 0.5 * k],
        };
        let svg = line_chart("pdf <y3>", "y", &[s("fom", 1.0), s("rom", 2.0)], false).unwrap();
        assert_eq!(svg.matches("<path").count(), 3);
        assert!(svg.contains("pdf &lt;y3&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn log_axis_skips_nonpositive() {
        let s = Series {
            label: "mse".into(),
            x: vec![2.0, 4.0, 5.0],
            y: vec![1e-2, 0.0, 1e-6],
        };
        assert!(line_chart("mse", "r", &[s], true).is_ok());
        let empty = Series {
            label: "none".into(),
            x: vec![1.0],
            y: vec![-1.0],
        };
        assert!(line_chart("x", "x", &[empty], true).is_err());
    }
}
