use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::fit::RateFit;
use super::study::ConvergenceReport;
use crate::error::{Error, Result};

/// JSON of the report without the timestamp header; byte-reproducible.
pub fn json_body(report: &ConvergenceReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Header line with the generation time followed by the JSON body.
pub fn write_json(report: &ConvergenceReport, mut out: impl Write) -> Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    writeln!(out, "{{\"generated_unix\": {secs}}}")?;
    writeln!(out, "{}", json_body(report)?)?;
    Ok(())
}

/// Parses the output of [`write_json`], or a bare body.
pub fn parse_report(text: &str) -> Result<ConvergenceReport> {
    let body = match text.split_once('\n') {
        Some((first, rest)) if first.contains("generated_unix") => rest,
        _ => text,
    };
    Ok(serde_json::from_str(body)?)
}

#[derive(Serialize)]
struct CsvRow {
    eps: f64,
    j: usize,
    lambda_eps: f64,
    lambda_hom: f64,
    abs_err: f64,
    heps_err: Option<f64>,
    l2_err: Option<f64>,
    gap: Option<f64>,
    visik_alpha: Option<f64>,
}

pub fn write_csv(report: &ConvergenceReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &report.rows {
        w.serialize(CsvRow {
            eps: r.eps,
            j: r.j,
            lambda_eps: r.lambda_eps,
            lambda_hom: r.lambda_hom,
            abs_err: r.abs_err,
            heps_err: r.heps_err,
            l2_err: r.l2_err,
            gap: r.gap,
            visik_alpha: r.visik_alpha,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct LabCsvRow<'a> {
    check: &'a str,
    eps: f64,
    ratio: f64,
    samples: usize,
    skipped: usize,
    seed: u64,
    pass: bool,
}

pub fn write_lab_csv(report: &ConvergenceReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &report.lab.rows {
        w.serialize(LabCsvRow {
            check: &r.check,
            eps: r.param,
            ratio: r.ratio,
            samples: r.samples,
            skipped: r.skipped,
            seed: r.seed,
            pass: r.pass,
        })?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// Log-log chart of every fitted error series with its fitted line dashed.
pub fn render_svg(report: &ConvergenceReport) -> String {
    let (w, h, pad) = (720.0, 480.0, 60.0);
    type Curve<'a> = (String, Vec<(f64, f64)>, &'a RateFit);
    let series: Vec<Curve> = report
        .fits
        .iter()
        .map(|f| {
            let pts: Vec<(f64, f64)> = report
                .series(f.series, f.j)
                .into_iter()
                .filter(|&(_, v)| v > 0.0 && v.is_finite())
                .collect();
            (format!("{} j={}", f.series.name(), f.j), pts, &f.fit)
        })
        .filter(|(_, p, _)| !p.is_empty())
        .collect();
    let all = || series.iter().flat_map(|(_, p, _)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(e, v) in all() {
        x0 = x0.min(e.log10());
        x1 = x1.max(e.log10());
        y0 = y0.min(v.log10());
        y1 = y1.max(v.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 0.0, -1.0, 0.0);
    }
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        y1 = y0 + 1.0;
    }
    let px = |e: f64| pad + (e.log10() - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |v: f64| h - pad - (v.log10() - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">eps (log)</text>"#,
        w / 2.0,
        h - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" transform="rotate(-90 20 {})" text-anchor="middle">error (log)</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, (label, pts, fit)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(e, v)| format!("{:.2},{:.2}", px(e), py(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            coords.join(" ")
        );
        let (emin, emax) = pts
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(e, _)| (lo.min(e), hi.max(e)));
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
            px(emin),
            py(fit.predict(emin)),
            px(emax),
            py(fit.predict(emax))
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{label}: slope {:.3}</text>"#,
            w - pad - 190.0,
            pad + 16.0 * i as f64,
            fit.slope
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `study.json`, and `study.csv`, `lab.csv`, `study.svg` on request.
pub fn emit(report: &ConvergenceReport, dir: &Path, csv: bool, svg: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut open = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        let path = dir.join(name);
        let f =
            std::fs::File::create(&path).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
        Ok(std::io::BufWriter::new(f))
    };
    write_json(report, open("study.json")?)?;
    if csv {
        write_csv(report, open("study.csv")?)?;
        write_lab_csv(report, open("lab.csv")?)?;
    }
    if svg {
        open("study.svg")?.write_all(render_svg(report).as_bytes())?;
    }
    Ok(written)
}
