use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ExperimentOutput;
use crate::error::{Error, Result};

/// One CSV line of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub scenario: String,
    pub case: String,
    pub omega_or_p: String,
    pub method: String,
    pub risk: f64,
    pub se: f64,
    pub reps: usize,
    pub seed: u64,
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Resource(format!("write failed: {e}"))
}

/// Writes `# <config json>` followed by the CSV header and rows.
pub fn write_csv<W: Write>(mut out: W, result: &ExperimentOutput) -> Result<()> {
    writeln!(out, "# {}", result.config_json).map_err(io)?;
    let mut w = csv::Writer::from_writer(out);
    for row in &result.rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(io)
}

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 4] = ["#000000", "#d62728", "#1f77b4", "#2ca02c"];

/// Line chart of risk against the grid label, one panel per case and one line
/// per method. Labels that do not parse as numbers are placed at their index.
pub fn write_svg<W: Write>(mut out: W, result: &ExperimentOutput) -> Result<()> {
    let mut cases: Vec<&str> = Vec::new();
    let mut series: BTreeMap<(&str, &str), Vec<(f64, f64)>> = BTreeMap::new();
    let mut methods: Vec<&str> = Vec::new();
    for row in &result.rows {
        if !cases.contains(&row.case.as_str()) {
            cases.push(&row.case);
        }
        if !methods.contains(&row.method.as_str()) {
            methods.push(&row.method);
        }
        let pts = series.entry((row.case.as_str(), row.method.as_str())).or_default();
        let x = row.omega_or_p.parse::<f64>().unwrap_or(pts.len() as f64);
        pts.push((x, row.risk));
    }
    let cols = cases.len().clamp(1, 2);
    let rows = cases.len().div_ceil(cols).max(1);
    let (width, height) = (cols as f64 * PANEL_W, rows as f64 * PANEL_H + 24.0);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#);
    for (ci, case) in cases.iter().enumerate() {
        let (ox, oy) = ((ci % cols) as f64 * PANEL_W, (ci / cols) as f64 * PANEL_H);
        let pts: Vec<(f64, f64)> = methods.iter().flat_map(|m| series.get(&(*case, *m)).cloned().unwrap_or_default()).collect();
        let (x0, x1) = bounds(pts.iter().map(|p| p.0));
        let (y0, y1) = bounds(pts.iter().map(|p| p.1).chain(std::iter::once(0.0)));
        let sx = |x: f64| ox + MARGIN + (x - x0) / (x1 - x0) * (PANEL_W - 1.5 * MARGIN);
        let sy = |y: f64| oy + PANEL_H - MARGIN - (y - y0) / (y1 - y0) * (PANEL_H - 1.5 * MARGIN);
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#999"/>"##,
            ox + MARGIN,
            oy + MARGIN / 2.0,
            PANEL_W - 1.5 * MARGIN,
            PANEL_H - 1.5 * MARGIN
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">case {case}</text>"#, ox + MARGIN + 4.0, oy + MARGIN / 2.0 + 14.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{y1:.3}</text>"#, ox + 2.0, sy(y1) + 4.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{y0:.3}</text>"#, ox + 2.0, sy(y0));
        for (mi, m) in methods.iter().enumerate() {
            let Some(pts) = series.get(&(*case, *m)) else { continue };
            let color = COLORS[mi % COLORS.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" points="{}"/>"#, path.join(" "));
            for &(x, y) in pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
            }
        }
    }
    for (mi, m) in methods.iter().enumerate() {
        let color = COLORS[mi % COLORS.len()];
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{color}">{m}</text>"#, MARGIN + 90.0 * mi as f64, height - 8.0);
    }
    s.push_str("</svg>\n");
    out.write_all(s.as_bytes()).map_err(io)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentOutput {
        let row = |case: &str, x: &str, m: &str, r: f64| RiskRow {
            scenario: "s".into(),
            case: case.into(),
            omega_or_p: x.into(),
            method: m.into(),
            risk: r,
            se: 0.01,
            reps: 10,
            seed: 3,
        };
        ExperimentOutput {
            config_json: "{\"schema\":1}".into(),
            rows: vec![row("i", "0", "UMVU", 0.5), row("i", "0", "EB", 0.4), row("i", "1", "UMVU", 0.6), row("i", "1", "EB", 0.45)],
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# {\"schema\":1}");
        assert_eq!(lines[1], "scenario,case,omega_or_p,method,risk,se,reps,seed");
        assert_eq!(lines[2], "s,i,0,UMVU,0.5,0.01,10,3");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn svg_has_one_line_per_method_and_case() {
        let mut buf = Vec::new();
        write_svg(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg"));
        assert_eq!(text.matches("<polyline").count(), 2);
    }
}
