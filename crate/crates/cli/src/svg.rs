//! Region diagram of an atlas as a standalone SVG document.

use std::fmt::Write;

use zeromass::atlas::Atlas;
use zeromass::exponent_plane::{sobolev_critical, Sign};

const SIZE: f64 = 600.0;
const MARGIN: f64 = 50.0;

fn fill(existence: bool, sign: Sign) -> &'static str {
    match (existence, sign) {
        (false, _) => "#e8e8e8",
        (true, Sign::Positive) => "#9ecae1",
        (true, Sign::Negative) => "#fdae6b",
        (true, Sign::Zero) => "#756bb1",
        (true, Sign::Indeterminate) => "#c7e9c0",
    }
}

/// Cells coloured by `(existence_possible, sign)`, with the `d* = 0`
/// contour and the lines `p = 2`, `q = 2`, `p = 2*`, `q = 2*`, `p = q`.
///
/// Output depends only on the atlas. An atlas without rows renders as an
/// empty frame.
pub fn render_atlas_svg(atlas: &Atlas) -> String {
    let total = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#);
    let (p0, p1) = atlas.p_range;
    let (q0, q1) = atlas.q_range;
    let span_ok = p1 > p0 && q1 > q0 && p0.is_finite() && q1.is_finite();
    if atlas.rows.is_empty() || !span_ok {
        let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#);
        s.push_str("</svg>\n");
        return s;
    }
    let x = |p: f64| MARGIN + (p - p0) / (p1 - p0) * SIZE;
    let y = |q: f64| MARGIN + SIZE - (q - q0) / (q1 - q0) * SIZE;
    let n = atlas.steps.max(1) as f64;
    let (w, h) = (SIZE / n, SIZE / n);

    s.push_str("<g id=\"regions\" stroke=\"none\">\n");
    for row in &atlas.rows {
        let cx = x(row.p);
        let cy = y(row.q);
        let _ = writeln!(
            s,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}"/>"#,
            cx - w / 2.0,
            cy - h / 2.0,
            w,
            h,
            fill(row.report.existence_possible, row.report.predicted_second_derivative_sign)
        );
    }
    s.push_str("</g>\n");

    let line = |s: &mut String, id: &str, a: (f64, f64), b: (f64, f64), style: &str| {
        let _ = writeln!(
            s,
            r#"<line id="{id}" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" {style}/>"#,
            x(a.0),
            y(a.1),
            x(b.0),
            y(b.1)
        );
    };
    let dashed = r#"stroke="black" stroke-width="1" stroke-dasharray="4 3""#;
    if (p0..=p1).contains(&2.0) {
        line(&mut s, "p-eq-2", (2.0, q0), (2.0, q1), dashed);
    }
    if (q0..=q1).contains(&2.0) {
        line(&mut s, "q-eq-2", (p0, 2.0), (p1, 2.0), dashed);
    }
    let s2 = sobolev_critical(atlas.dim).exponent.value();
    if s2.is_finite() {
        let dotted = r##"stroke="#444" stroke-width="1" stroke-dasharray="1 3""##;
        if (p0..=p1).contains(&s2) {
            line(&mut s, "p-eq-2star", (s2, q0), (s2, q1), dotted);
        }
        if (q0..=q1).contains(&s2) {
            line(&mut s, "q-eq-2star", (p0, s2), (p1, s2), dotted);
        }
    }
    let lo = p0.max(q0);
    let hi = p1.min(q1);
    if hi > lo {
        line(&mut s, "p-eq-q", (lo, lo), (hi, hi), r#"stroke="gray" stroke-width="1""#);
    }

    s.push_str("<g id=\"critical-curve\" stroke=\"#b30000\" stroke-width=\"2\">\n");
    for seg in &atlas.curve_segments {
        line(&mut s, "d-star-zero", seg[0], seg[1], "");
    }
    s.push_str("</g>\n");

    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">p</text>"#,
        MARGIN + SIZE / 2.0,
        total - 15.0
    );
    let _ = writeln!(s, r#"<text x="15" y="{:.1}" font-size="14" text-anchor="middle">q</text>"#, MARGIN + SIZE / 2.0);
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="30" font-size="13">N = {}, {} ({p0}..{p1}) x ({q0}..{q1})</text>"#,
        atlas.dim, atlas.domain
    );
    s.push_str("</svg>\n");
    s
}
