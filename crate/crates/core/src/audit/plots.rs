//! Static SVG renderings of per-example results. Output depends only on the
//! inputs, so repeated runs produce identical files.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const RANGE_COLOR: &str = "#4c72b0";
const BASELINE_COLOR: &str = "#dd8452";
const SHADE_COLOR: &str = "#c44e52";

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2.0, MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{v}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn px(i: usize, n: usize) -> f64 {
    let span = WIDTH - 1.5 * MARGIN;
    MARGIN + span * (i as f64 + 0.5) / n.max(1) as f64
}

fn py(v: f64) -> f64 {
    HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * v.clamp(0.0, 1.0)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Viable prediction ranges as vertical bars, examples sorted by baseline
/// prediction, baseline predictions drawn as a second series.
pub fn viable_range_svg(lo: &[f64], hi: &[f64], baseline: &[f64], title: &str) -> String {
    let n = baseline.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| baseline[a].total_cmp(&baseline[b]).then(a.cmp(&b)));
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, "examples sorted by baseline prediction", "predicted probability");
    let bar = ((WIDTH - 1.5 * MARGIN) / n.max(1) as f64).clamp(0.5, 6.0);
    for (k, &i) in order.iter().enumerate() {
        let x = px(k, n);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{RANGE_COLOR}" stroke-width="{bar:.2}"/>"#,
            py(lo[i]),
            py(hi[i])
        );
    }
    for (k, &i) in order.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="{BASELINE_COLOR}"/>"#,
            px(k, n),
            py(baseline[i])
        );
    }
    legend(&mut out, &[(RANGE_COLOR, "viable range"), (BASELINE_COLOR, "baseline")]);
    out.push_str("</svg>\n");
    out
}

/// Sorted per-example maximum deviations with the region at or above
/// `delta` shaded.
pub fn max_deviation_svg(deviations: &[f64], delta: f64, title: &str) -> String {
    let n = deviations.len();
    let mut sorted = deviations.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{SHADE_COLOR}" fill-opacity="0.12"/>"#,
        py(1.0),
        WIDTH - 1.5 * MARGIN,
        py(delta) - py(1.0)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{SHADE_COLOR}" stroke-dasharray="4 3"/>"#,
        WIDTH - MARGIN / 2.0,
        y = py(delta)
    );
    axes(&mut out, "examples sorted by maximum deviation", "maximum deviation from baseline");
    let mut path = String::new();
    for (k, v) in sorted.iter().enumerate() {
        let _ = write!(path, "{}{:.2} {:.2} ", if k == 0 { "M" } else { "L" }, px(k, n), py(*v));
    }
    let _ = writeln!(
        out,
        r#"<path d="{}" fill="none" stroke="{RANGE_COLOR}" stroke-width="1.5"/>"#,
        path.trim_end()
    );
    legend(&mut out, &[(RANGE_COLOR, "max deviation"), (SHADE_COLOR, &format!("delta = {delta}"))]);
    out.push_str("</svg>\n");
    out
}

fn legend(out: &mut String, entries: &[(&str, &str)]) {
    for (k, (color, label)) in entries.iter().enumerate() {
        let y = MARGIN + 4.0 + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            MARGIN + 10.0,
            y,
            MARGIN + 24.0,
            y + 9.0,
            escape(label)
        );
    }
}
