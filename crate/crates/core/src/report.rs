//! SVG and CSV renderings of diagrams and sweep results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ph::PersistenceDiagram;
use crate::sweep::{
    expressivity_frequencies, read_curves_csv, read_records_csv, CurvePoint, SweepRecord,
};

pub const RECORDS_FILE: &str = "records.csv";
pub const CURVES_FILE: &str = "curves.csv";

const WIDTH: f64 = 640.0;
const MARGIN: f64 = 48.0;
const BAR_GAP: f64 = 6.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn svg_open(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    );
}

/// Horizontal bars grouped by dimension, on an axis from 0 to `eps_max`.
/// Each bar carries its exact endpoints as data attributes; infinite bars
/// run to the right edge and have `data-death="inf"`.
pub fn barcode_svg(diagram: &PersistenceDiagram) -> String {
    let mut by_dim: BTreeMap<usize, Vec<(f64, Option<f64>)>> = BTreeMap::new();
    for p in diagram.pairs() {
        by_dim.entry(p.dim).or_default().push((p.birth, p.death));
    }
    for bars in by_dim.values_mut() {
        bars.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.unwrap_or(f64::INFINITY).total_cmp(&b.1.unwrap_or(f64::INFINITY)))
        });
    }
    let n_bars: usize = by_dim.values().map(Vec::len).sum();
    let height = 2.0 * MARGIN + n_bars as f64 * BAR_GAP + by_dim.len() as f64 * 24.0;
    let top = diagram
        .pairs()
        .map(|p| p.death.unwrap_or(p.birth))
        .fold(diagram.eps_max, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    let x = |v: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * v / top;
    let mut out = String::new();
    svg_open(&mut out, WIDTH, height);
    let axis_y = height - MARGIN + 8.0;
    let _ = writeln!(
        out,
        r#"<line x1="{}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#,
        x(0.0),
        x(top)
    );
    for i in 0..=4 {
        let v = top * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.3}</text>"#,
            x(v),
            axis_y + 14.0
        );
    }
    let mut y = MARGIN;
    for (dim, bars) in &by_dim {
        let color = COLORS[dim % COLORS.len()];
        let _ = writeln!(out, r#"<text x="4" y="{:.2}">H{dim}</text>"#, y + 4.0);
        y += 12.0;
        for (b, d) in bars {
            let end = d.unwrap_or(top);
            let death = d.map_or("inf".to_string(), |v| v.to_string());
            let _ = writeln!(
                out,
                r#"<line class="bar" data-dim="{dim}" data-birth="{b}" data-death="{death}" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="3"/>"#,
                x(*b),
                x(end)
            );
            y += BAR_GAP;
        }
        y += 12.0;
    }
    out.push_str("</svg>\n");
    out
}

/// Held-out error against minibatch step, one polyline per trial.
pub fn error_curve_svg(title: &str, curves: &[Vec<(usize, f64)>]) -> String {
    let height = 360.0;
    let max_step = curves
        .iter()
        .flat_map(|c| c.iter().map(|p| p.0))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let max_err = curves
        .iter()
        .flat_map(|c| c.iter().map(|p| p.1))
        .fold(0.5, f64::max);
    let x = |s: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * s / max_step;
    let y = |e: f64| height - MARGIN - (height - 2.0 * MARGIN) * e / max_err;
    let mut out = String::new();
    svg_open(&mut out, WIDTH, height);
    let _ = writeln!(out, r#"<text x="{MARGIN}" y="20">{title}</text>"#);
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="black"/>
<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{0:.2}" stroke="black"/>
<text x="{1:.2}" y="{2:.2}" text-anchor="end">minibatch {max_step}</text>
<text x="4" y="{MARGIN}">{max_err:.2}</text>"#,
        y(0.0),
        x(max_step),
        y(0.0) + 16.0
    );
    for (i, c) in curves.iter().enumerate() {
        let pts: Vec<String> = c
            .iter()
            .map(|&(s, e)| format!("{:.2},{:.2}", x(s as f64), y(e)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="trial" fill="none" stroke="{}" stroke-opacity="0.6" points="{}"/>"#,
            COLORS[i % COLORS.len()],
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Rows `ell,h0,spec_index,target_b0,target_b1,trial,converged_at` for
/// every converged trial.
pub fn convergence_csv(records: &[SweepRecord]) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["ell", "h0", "spec_index", "target_b0", "target_b1", "trial", "converged_at"])?;
    for r in records {
        if let Some(c) = r.converged_at {
            wtr.write_record(
                [r.ell, r.h0, r.spec_index, r.target_b0, r.target_b1, r.trial, c].map(|v| v.to_string()),
            )?;
        }
    }
    finish_csv(wtr)
}

/// Empirical `P(β_0(f) >= k)` per architecture, one column per k.
pub fn expressivity_csv(records: &[SweepRecord]) -> Result<String> {
    let k_max = records.iter().map(|r| r.target_b0).max().unwrap_or(1).max(1);
    let table = expressivity_frequencies(records, k_max);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["ell".to_string(), "h0".to_string()];
    header.extend((1..=k_max).map(|k| format!("p_b0_ge_{k}")));
    wtr.write_record(&header)?;
    for ((ell, h0), probs) in table {
        let mut row = vec![ell.to_string(), h0.to_string()];
        row.extend(probs.iter().map(|p| p.to_string()));
        wtr.write_record(&row)?;
    }
    finish_csv(wtr)
}

fn finish_csv(wtr: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportSummary {
    pub barcodes: Vec<PathBuf>,
    pub error_curves: Vec<PathBuf>,
    pub convergence: Option<PathBuf>,
    pub expressivity: Option<PathBuf>,
}

impl ReportSummary {
    pub fn files(&self) -> Vec<&Path> {
        self.barcodes
            .iter()
            .chain(&self.error_curves)
            .chain(&self.convergence)
            .chain(&self.expressivity)
            .map(PathBuf::as_path)
            .collect()
    }
}

/// Every `*.json` file in `dir` that parses as a persistence diagram, with
/// its stem (minus any `.diagram` suffix), in file-name order.
fn diagram_files(dir: &Path) -> Result<Vec<(String, PersistenceDiagram)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let Ok(d) = PersistenceDiagram::from_json(&std::fs::read_to_string(&p)?) else {
            continue;
        };
        let name = p.file_stem().and_then(|n| n.to_str()).unwrap_or("diagram");
        out.push((name.trim_end_matches(".diagram").to_string(), d));
    }
    Ok(out)
}

/// Renders every artifact found in `dir` into `out_dir`: barcodes from
/// diagram JSON files, error curves from `curves.csv`, and convergence and
/// expressivity tables from `records.csv`. Fails if none are present.
pub fn render_report(dir: &Path, out_dir: &Path) -> Result<ReportSummary> {
    if !dir.is_dir() {
        return Err(Error::MissingArtifacts(vec![dir.display().to_string()]));
    }
    let diagrams = diagram_files(dir)?;
    let records_path = dir.join(RECORDS_FILE);
    let curves_path = dir.join(CURVES_FILE);
    if diagrams.is_empty() && !records_path.exists() && !curves_path.exists() {
        return Err(Error::MissingArtifacts(vec![
            "*.json (persistence diagram)".into(),
            RECORDS_FILE.into(),
            CURVES_FILE.into(),
        ]));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut summary = ReportSummary::default();
    for (stem, diagram) in diagrams {
        let target = out_dir.join(format!("barcode-{stem}.svg"));
        std::fs::write(&target, barcode_svg(&diagram))?;
        summary.barcodes.push(target);
    }
    if curves_path.exists() {
        let curves = read_curves_csv(std::fs::File::open(&curves_path)?)?;
        let mut grouped: BTreeMap<(usize, usize), BTreeMap<(usize, usize), Vec<(usize, f64)>>> = BTreeMap::new();
        for CurvePoint {
            ell,
            h0,
            spec_index,
            trial,
            step,
            error,
        } in curves
        {
            grouped
                .entry((ell, h0))
                .or_default()
                .entry((spec_index, trial))
                .or_default()
                .push((step, error));
        }
        for ((ell, h0), trials) in grouped {
            let lines: Vec<Vec<(usize, f64)>> = trials.into_values().collect();
            let target = out_dir.join(format!("errors-l{ell}-h{h0}.svg"));
            std::fs::write(&target, error_curve_svg(&format!("({ell}, {h0})"), &lines))?;
            summary.error_curves.push(target);
        }
    }
    if records_path.exists() {
        let records = read_records_csv(std::fs::File::open(&records_path)?)?;
        let conv = out_dir.join("convergence.csv");
        std::fs::write(&conv, convergence_csv(&records)?)?;
        summary.convergence = Some(conv);
        let expr = out_dir.join("expressivity.csv");
        std::fs::write(&expr, expressivity_csv(&records)?)?;
        summary.expressivity = Some(expr);
    }
    Ok(summary)
}
