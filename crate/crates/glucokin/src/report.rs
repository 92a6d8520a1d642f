//! CSV and SVG outputs.

use std::fmt::Write as _;

use glucokin_core::kinetics::Stage;
use glucokin_core::metrics::Zone;
use glucokin_core::pipeline::MeasurementResult;

use crate::evaluate::CegRow;
use crate::Result;

/// `g_true,g_est,zone`, one row per estimate.
pub fn ceg_csv(rows: &[CegRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["g_true", "g_est", "zone"])?;
    for r in rows {
        w.write_record([
            r.g_true.to_string(),
            r.g_est.to_string(),
            r.zone.to_string(),
        ])?;
    }
    finish(w)
}

/// `n,r_hat,stage,r_C_hat,P`; filter columns stay empty where the filter
/// has no state.
pub fn trace_csv(result: &MeasurementResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "r_hat", "stage", "r_C_hat", "P"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for row in &result.trace {
        let stage = match row.stage {
            Stage::PreDrop => "pre-drop",
            Stage::Decay => "decay",
            Stage::Converged => "converged",
        };
        w.write_record([
            row.n.to_string(),
            row.r_hat.to_string(),
            stage.to_string(),
            opt(row.r_c_hat),
            opt(row.p),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| crate::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV of ASCII fields"))
}

/// Zone boundaries of the Clarke grid as polylines, mg/dl.
const BOUNDARIES: &[&[(f64, f64)]] = &[
    &[(0.0, 70.0), (175.0 / 3.0, 70.0), (500.0, 600.0)],
    &[(70.0, 0.0), (70.0, 56.0), (600.0, 480.0)],
    &[(70.0, 84.0), (70.0, 600.0)],
    &[(0.0, 180.0), (70.0, 180.0), (490.0, 600.0)],
    &[(130.0, 0.0), (180.0, 70.0), (600.0, 70.0)],
    &[(180.0, 0.0), (180.0, 70.0)],
    &[(240.0, 70.0), (240.0, 180.0), (600.0, 180.0)],
];

const ZONE_COLOURS: [&str; 5] = ["#1a9850", "#91cf60", "#fee08b", "#fc8d59", "#d73027"];

/// Scatter of estimates over the Clarke grid on a 0–600 mg/dl square.
pub fn ceg_svg(rows: &[CegRow]) -> String {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 50.0;
    let x = |g: f64| PAD + g.clamp(0.0, SIZE);
    let y = |g: f64| PAD + SIZE - g.clamp(0.0, SIZE);
    let mut s = String::new();
    let total = SIZE + 2.0 * PAD;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="grey" stroke-dasharray="4 4"/>"#,
        x(0.0),
        y(0.0),
        x(SIZE),
        y(SIZE)
    );
    for line in BOUNDARIES {
        let pts: Vec<String> = line
            .iter()
            .map(|&(a, b)| format!("{},{}", x(a), y(b)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black"/>"#,
            pts.join(" ")
        );
    }
    for (label, gx, gy) in [
        ("A", 40.0, 20.0),
        ("B", 400.0, 250.0),
        ("B", 250.0, 400.0),
        ("C", 150.0, 500.0),
        ("C", 160.0, 15.0),
        ("D", 30.0, 120.0),
        ("D", 500.0, 120.0),
        ("E", 30.0, 400.0),
        ("E", 400.0, 30.0),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="16">{label}</text>"#,
            x(gx),
            y(gy)
        );
    }
    for r in rows {
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="3" fill="{}" stroke="black" stroke-width="0.5"/>"#,
            x(r.g_true),
            y(r.g_est),
            ZONE_COLOURS[r.zone.index()]
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">reference glucose (mg/dl)</text>"#,
        PAD + SIZE / 2.0,
        total - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">estimated glucose (mg/dl)</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Zone counts in A..E order as a compact label, e.g. `A=48 B=2`.
pub fn zone_summary(rows: &[CegRow]) -> String {
    Zone::ALL
        .iter()
        .map(|z| {
            let n = rows.iter().filter(|r| r.zone == *z).count();
            format!("{z}={n}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}
