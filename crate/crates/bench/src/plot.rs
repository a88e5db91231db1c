//! Static SVG line charts: one file per metric, one panel per source kind,
//! methods along x, one line per region (mean over seeds). Noisy series are
//! dashed and carry a `*` after the region name.

use std::fmt::Write;

use crate::results::ResultRow;

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;
const LEGEND_H: f64 = 80.0;

fn distinct<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in it {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `metric` (0 = le, 1 = vis, 2 = sr) as an SVG document.
pub fn render(rows: &[ResultRow], metric: usize, title: &str) -> String {
    let methods = distinct(rows.iter().map(|r| r.method.as_str()));
    let kinds = distinct(rows.iter().map(|r| r.kind.as_str()));
    let regions = distinct(rows.iter().map(|r| r.region.as_str()));
    let mut snrs: Vec<f64> = Vec::new();
    for r in rows {
        if !snrs.contains(&r.snr) {
            snrs.push(r.snr);
        }
    }
    snrs.sort_by(f64::total_cmp);

    let width = MARGIN + kinds.len().max(1) as f64 * (PANEL_W + MARGIN);
    let height = 2.0 * MARGIN + PANEL_H + LEGEND_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));

    let x_of = |i: usize, x0: f64| {
        if methods.len() <= 1 {
            x0 + PANEL_W / 2.0
        } else {
            x0 + 20.0 + i as f64 * (PANEL_W - 40.0) / (methods.len() - 1) as f64
        }
    };
    let y_of = |v: f64| MARGIN + PANEL_H * (1.0 - v.clamp(0.0, 1.0));

    for (ki, kind) in kinds.iter().enumerate() {
        let x0 = MARGIN + ki as f64 * (PANEL_W + MARGIN);
        let _ = writeln!(s, r#"<g class="panel" data-kind="{}">"#, escape(kind));
        let _ = writeln!(s, r##"<rect x="{x0}" y="{MARGIN}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, x0 + PANEL_W / 2.0, MARGIN - 8.0, escape(kind));
        for t in 0..=4 {
            let v = t as f64 / 4.0;
            let y = y_of(v);
            let _ = writeln!(s, r##"<line x1="{x0}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##, x0 + PANEL_W);
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#, x0 - 4.0, y + 4.0);
        }
        for (mi, m) in methods.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                x_of(mi, x0),
                MARGIN + PANEL_H + 16.0,
                escape(m)
            );
        }
        for (ri, region) in regions.iter().enumerate() {
            for &snr in &snrs {
                let mut pts = Vec::new();
                for (mi, m) in methods.iter().enumerate() {
                    let vals: Vec<f64> = rows
                        .iter()
                        .filter(|r| &r.method == m && &r.kind == kind && &r.region == region && r.snr == snr)
                        .filter_map(|r| r.scores().map(|sc| sc[metric]))
                        .collect();
                    if !vals.is_empty() {
                        let v = vals.iter().sum::<f64>() / vals.len() as f64;
                        pts.push(format!("{:.2},{:.2}", x_of(mi, x0), y_of(v)));
                    }
                }
                if pts.is_empty() {
                    continue;
                }
                let color = COLORS[ri % COLORS.len()];
                let dash = if snr > 0.0 { r#" stroke-dasharray="5,3""# } else { "" };
                let name = if snr > 0.0 { format!("{region}*") } else { region.clone() };
                let _ = writeln!(
                    s,
                    r#"<polyline data-series="{}" data-snr="{snr}" fill="none" stroke="{color}" stroke-width="1.6"{dash} points="{}"/>"#,
                    escape(&name),
                    pts.join(" ")
                );
            }
        }
        s.push_str("</g>\n");
    }

    // legend: one entry per region × snr
    let mut lx = MARGIN;
    let mut ly = MARGIN + PANEL_H + 40.0;
    for (ri, region) in regions.iter().enumerate() {
        for &snr in &snrs {
            let color = COLORS[ri % COLORS.len()];
            let dash = if snr > 0.0 { r#" stroke-dasharray="5,3""# } else { "" };
            let name = if snr > 0.0 { format!("{region}* (snr {snr})") } else { format!("{region} (noiseless)") };
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 24.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, escape(&name));
            lx += 170.0;
            if lx + 170.0 > width {
                lx = MARGIN;
                ly += 18.0;
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
