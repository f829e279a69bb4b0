//! Static SVG rendering of aggregate curves.

use std::fmt::Write as _;
use std::path::Path;

use crate::aggregate::AggregateRow;
use crate::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 160.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Renders one mean line and standard-error band per method, in order of
/// first appearance.
pub fn render_svg(rows: &[AggregateRow]) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Parse("aggregate has no rows".into()));
    }
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        x0 = x0.min(r.cost);
        x1 = x1.max(r.cost);
        y0 = y0.min(r.mean - r.stderr);
        y1 = y1.max(r.mean + r.stderr);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-3);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |c: f64| MARGIN_L + (c - x0) / (x1 - x0) * pw;
    let sy = |v: f64| MARGIN_T + (y1 - v) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (cx, vy) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(cx),
            HEIGHT - MARGIN_B + 18.0,
            tick(cx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            sy(vy) + 4.0,
            tick(vy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">cost</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">incumbent value</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0
    );

    for (k, m) in methods.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<&AggregateRow> = rows.iter().filter(|r| r.method == *m).collect();
        let upper = pts.iter().map(|r| format!("{:.2},{:.2}", sx(r.cost), sy(r.mean + r.stderr)));
        let lower = pts.iter().rev().map(|r| format!("{:.2},{:.2}", sx(r.cost), sy(r.mean - r.stderr)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(
            s,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", sx(r.cost), sy(r.mean))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="mean" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = MARGIN_T + 16.0 + 20.0 * k as f64;
        let lx = WIDTH - MARGIN_R + 14.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(m)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `rows` to `path`. Nothing is written on error.
pub fn emit_plot(rows: &[AggregateRow], path: &Path) -> Result<(), CliError> {
    let svg = render_svg(rows)?;
    std::fs::write(path, svg).map_err(CliError::runtime)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(m: &str, c: f64, y: f64) -> AggregateRow {
        AggregateRow { method: m.into(), cost: c, mean: y, stderr: 0.05, n: 3 }
    }

    #[test]
    fn one_method_one_line_one_band() {
        let svg = render_svg(&[row("bapi", 0.0, 0.1), row("bapi", 1.0, 0.5)]).unwrap();
        assert_eq!(svg.matches("class=\"mean\"").count(), 1);
        assert_eq!(svg.matches("class=\"band\"").count(), 1);
        assert!(svg.contains(">cost<") && svg.contains(">incumbent value<"));
    }

    #[test]
    fn legend_follows_input_order() {
        let rows = [row("ei_tmax", 0.0, 0.1), row("ei_tmax", 1.0, 0.2), row("bapi", 0.0, 0.2), row("bapi", 1.0, 0.6)];
        let svg = render_svg(&rows).unwrap();
        assert_eq!(svg.matches("class=\"legend\"").count(), 2);
        assert!(svg.find(">ei_tmax<").unwrap() < svg.find(">bapi<").unwrap());
    }

    #[test]
    fn empty_aggregate_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.svg");
        assert!(emit_plot(&[], &path).is_err());
        assert!(!path.exists());
    }
}
