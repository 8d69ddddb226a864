//! Minimal deterministic SVG line charts of search traces.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::experiment::AveragedTrace;
use crate::output::write_file;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn nice(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Renders `y` against `x` as a single polyline with labelled axes.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, x: &[f64], y: &[f64]) -> String {
    let (x0, x1) = bounds(x);
    let (mut y0, mut y1) = bounds(y);
    if y1 - y0 < 1e-12 {
        let pad = if y0 == 0.0 { 1.0 } else { y0.abs() * 0.1 };
        y0 -= pad;
        y1 += pad;
    }
    let x1 = if x1 > x0 { x1 } else { x0 + 1.0 };
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |v: f64| LEFT + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + (1.0 - (v - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT} {TOP} L{LEFT} {} L{} {}" fill="none" stroke="black" stroke-width="1"/>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            sx(xv),
            TOP + ph + 18.0,
            nice(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(yv) + 4.0,
            nice(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
    let mut d = String::new();
    for (i, (xv, yv)) in x.iter().zip(y).enumerate() {
        let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, sx(*xv), sy(*yv));
    }
    let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#);
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<stem>_deviance.svg`, `<stem>_mcr.svg` (when test MCR was
/// traced) and `<stem>_xi.svg`.
pub fn emit_plots(trace: &AveragedTrace, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let x: Vec<f64> = trace.iteration.iter().map(|&i| i as f64).collect();
    let mut charts = vec![(
        "deviance",
        line_chart(&format!("{stem}: training deviance"), "iteration", "deviance", &x, &trace.deviance),
    )];
    if let Some(m) = &trace.test_mcr {
        charts.push(("mcr", line_chart(&format!("{stem}: test MCR"), "iteration", "MCR", &x, m)));
    }
    charts.push((
        "xi",
        line_chart(&format!("{stem}: mean sparsity"), "iteration", "sparsity", &x, &trace.xi_bar),
    ));
    let mut out = Vec::new();
    for (name, svg) in charts {
        let path = dir.join(format!("{stem}_{name}.svg"));
        write_file(&path, &svg)?;
        out.push(path);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_still_draws_a_line() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let svg = line_chart("t", "x", "y", &x, &[0.5; 10]);
        assert!(svg.matches("<path").count() >= 2);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn axis_spans_first_to_last_iteration() {
        let x: Vec<f64> = (1..=500).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 / v).collect();
        let svg = line_chart("t", "iteration", "y", &x, &y);
        assert!(svg.contains(">1</text>"));
        assert!(svg.contains(">500</text>"));
        assert_eq!(svg, line_chart("t", "iteration", "y", &x, &y));
    }
}
