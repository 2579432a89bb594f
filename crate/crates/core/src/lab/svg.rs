//! Self-contained SVG line plots of coefficient traces.

use std::fmt::Write;

use crate::dynamics::CoefficientTrace;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 200.0;
const MARGIN: f64 = 56.0;
const COLOURS: [&str; 2] = ["#1f77b4", "#d62728"];

/// One panel per trace column, real part and imaginary part as two lines.
pub fn trace_plot(trace: &CoefficientTrace) -> String {
    let panels = trace.columns.len().max(1);
    let total_h = HEIGHT * panels as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{total_h}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (t0, t1) = match (trace.times.first(), trace.times.last()) {
        (Some(a), Some(b)) if b > a => (*a, *b),
        (Some(a), _) => (*a, *a + 1.0),
        _ => (0.0, 1.0),
    };
    for (p, col) in trace.columns.iter().enumerate() {
        let top = HEIGHT * p as f64;
        let series: [Vec<f64>; 2] =
            [col.values.iter().map(|v| v.re).collect(), col.values.iter().map(|v| v.im).collect()];
        let (mut lo, mut hi) = series
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        if !lo.is_finite() || !hi.is_finite() {
            lo = -1.0;
            hi = 1.0;
        }
        if hi - lo <= 1e-300_f64.max(1e-12 * hi.abs().max(lo.abs())) {
            let pad = if hi == 0.0 { 1.0 } else { 0.5 * hi.abs() };
            lo -= pad;
            hi += pad;
        }
        let x = |t: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * (t - t0) / (t1 - t0);
        let y = |v: f64| top + HEIGHT - MARGIN / 2.0 - (HEIGHT - MARGIN) * (v - lo) / (hi - lo);
        let _ = writeln!(
            out,
            r#"<rect x="{MARGIN}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="grey"/>"#,
            top + MARGIN / 2.0,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - MARGIN
        );
        let _ = writeln!(out, r#"<text x="{MARGIN}" y="{:.1}">{} ({:?})</text>"#, top + MARGIN / 2.0 - 6.0, col.name(), col.provenance);
        let _ = writeln!(out, r#"<text x="4" y="{:.1}">{hi:.3e}</text>"#, top + MARGIN / 2.0 + 10.0);
        let _ = writeln!(out, r#"<text x="4" y="{:.1}">{lo:.3e}</text>"#, top + HEIGHT - MARGIN / 2.0);
        for (s, colour) in series.iter().zip(COLOURS) {
            let pts: Vec<String> =
                trace.times.iter().zip(s).map(|(t, v)| format!("{:.2},{:.2}", x(*t), y(*v))).collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">t in [{t0}, {t1}]; blue Re, red Im</text>"#, WIDTH / 2.0 - 100.0, total_h - 4.0);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Provenance, TraceColumn};
    use num_complex::Complex64;

    #[test]
    fn plot_has_two_lines_per_column() {
        let trace = CoefficientTrace {
            times: vec![0.0, 0.5, 1.0],
            columns: vec![
                TraceColumn { k: 0, l: 0, provenance: Provenance::Background, values: vec![Complex64::new(1.0, 0.0); 3] },
                TraceColumn {
                    k: 0,
                    l: 2,
                    provenance: Provenance::ParticleMoment,
                    values: vec![Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.1), Complex64::new(1.0, 0.2)],
                },
            ],
        };
        let svg = trace_plot(&trace);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(!svg.contains("NaN"));
    }
}
