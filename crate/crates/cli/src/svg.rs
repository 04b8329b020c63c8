//! A dependency-free SVG line chart of `var_over_n` against `n`.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::Value;
use trigroots::mcstats::SlopeRow;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Log₂ axis in `n`, linear in `var_over_n`, one polyline per ensemble.
pub fn sweep_chart(rows: &[SlopeRow], provenance: &Value) -> String {
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        series.entry(&r.dist).or_default().push(((r.n as f64).log2(), r.var_over_n));
    }
    let pts = series.values().flatten();
    let (x0, x1) = pts.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = pts.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 1.0, x0 + 1.0) };
    let pad_y = ((y1 - y0) * 0.1).max(1e-3);
    let (y0, y1) = (y0 - pad_y, y1 + pad_y);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, "<desc>{}</desc>", esc(&provenance.to_string())).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{PAD},{} V{} H{}" fill="none" stroke="black"/>"#,
        PAD,
        H - PAD,
        W - PAD
    )
    .unwrap();
    let mut seen = Vec::new();
    for p in series.values().flatten() {
        if !seen.contains(&p.0.to_bits()) {
            seen.push(p.0.to_bits());
            let x = sx(p.0);
            writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, H - PAD + 18.0, p.0.exp2().round()).unwrap();
        }
    }
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.3}</text>"#, PAD - 6.0, sy(y) + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n</text>"#, W / 2.0, H - 12.0).unwrap();
    writeln!(s, r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">Var(N)/n</text>"#, H / 2.0, H / 2.0).unwrap();
    for (i, (name, pts)) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, path.join(" ")).unwrap();
        for p in pts {
            writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, sx(p.0), sy(p.1)).unwrap();
        }
        let ly = PAD + 16.0 * i as f64;
        writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{c}">{}</text>"#, W - PAD - 120.0, esc(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
