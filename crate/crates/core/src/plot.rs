//! Minimal self-contained SVG line plots of regret curves.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Renders each `(label, curve)` as a polyline against the step index.
/// Curves longer than 2000 points are subsampled.
pub fn regret_curves_svg(curves: &[(String, Vec<f64>)]) -> String {
    let max_len = curves.iter().map(|c| c.1.len()).max().unwrap_or(0).max(1);
    let max_y = curves
        .iter()
        .flat_map(|c| c.1.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let sx = (WIDTH - 2.0 * MARGIN) / max_len as f64;
    let sy = (HEIGHT - 2.0 * MARGIN) / max_y;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, y0) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0} {m} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        x1 = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12">step (T = {max_len})</text>"#,
        WIDTH / 2.0 - 40.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="5" y="{}" font-size="12">{max_y:.4}</text>"#,
        MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="5" y="{}" font-size="12">cumulative regret</text>"#,
        MARGIN - 20.0
    );

    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let stride = (curve.len() / 2000).max(1);
        let mut points = String::new();
        for (t, v) in curve.iter().enumerate().step_by(stride) {
            let _ = write!(
                points,
                "{:.2},{:.2} ",
                x0 + (t + 1) as f64 * sx,
                y0 - v * sy
            );
        }
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{color}" fill="none"/>"#,
            points.trim_end()
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            MARGIN + 10.0,
            MARGIN + 15.0 * (i + 1) as f64,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
