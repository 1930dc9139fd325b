//! Final tabular artifacts built from the stage files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use wai_core::econpanel::{RegressionResult, RegressionTable};
use wai_core::indicator::{IndustryShare, TagShare};
use wai_core::jsonl;
use wai_core::validate::{CorrelationRow, PairedPoint};

use crate::config::ReportFormat;
use crate::pipeline::files;

const CORRELATION_HEADER: &[&str] = &["region", "n_firms", "n_snapshots", "r"];
const PAIRED_HEADER: &[&str] = &["region", "snapshot", "n_firms", "wai", "stringency"];
const INDUSTRY_HEADER: &[&str] = &["group", "n_firms", "n_severe", "employees", "employees_severe", "share_severe"];
const TAG_HEADER: &[&str] = &["country", "umbrella", "n_firms", "n_tagged", "share"];

/// Everything the report draws on.
#[derive(Debug, Default)]
pub struct ReportInputs {
    pub correlation: Vec<CorrelationRow>,
    pub paired: Vec<PairedPoint>,
    pub industry: Vec<IndustryShare>,
    pub tags: Vec<TagShare>,
    pub regressions: Vec<RegressionResult>,
}

impl ReportInputs {
    /// Read the stage files from `dir`. Every file must exist; an empty file
    /// is an empty result set.
    pub fn load(dir: &Path) -> Result<Self> {
        fn read<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>> {
            let p = dir.join(name);
            if !p.is_file() {
                bail!("report input {} is missing", p.display());
            }
            jsonl::read(&p).with_context(|| format!("reading {}", p.display()))
        }
        Ok(Self {
            correlation: read(dir, files::CORRELATION)?,
            paired: read(dir, files::PAIRED_SERIES)?,
            industry: read(dir, files::INDUSTRY_SHARES)?,
            tags: read(dir, files::TAG_SHARES)?,
            regressions: read(dir, files::REGRESSIONS)?,
        })
    }

    fn table(&self) -> RegressionTable {
        let named: Vec<(String, RegressionResult)> = self
            .regressions
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("({})", i + 1), r.clone()))
            .collect();
        RegressionTable::new(&named)
    }
}

fn csv_text<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json<T: Serialize>(rows: &[T]) -> Result<String> {
    Ok(serde_json::to_string_pretty(rows)? + "\n")
}

fn write(out: &mut Vec<(PathBuf, usize)>, path: PathBuf, text: &str, rows: usize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    out.push((path, rows));
    Ok(())
}

/// Two polylines over the snapshots of one region: WAI scaled to its own
/// maximum and stringency on its 0..100 scale.
pub fn svg_lines(region: &str, points: &[&PairedPoint]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 320.0;
    const PAD: f64 = 40.0;
    let n = points.len();
    let x = |i: usize| {
        if n <= 1 {
            W / 2.0
        } else {
            PAD + (W - 2.0 * PAD) * i as f64 / (n - 1) as f64
        }
    };
    let y = |v: f64, top: f64| {
        let frac = if top > 0.0 { (v / top).clamp(0.0, 1.0) } else { 0.0 };
        H - PAD - (H - 2.0 * PAD) * frac
    };
    let wai_top = points.iter().map(|p| p.wai).fold(0.0, f64::max);
    let line = |f: &dyn Fn(&PairedPoint) -> f64| -> String {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{:.2},{:.2}", x(i), f(p)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let wai = line(&|p| y(p.wai, wai_top));
    let stringency = line(&|p| y(p.stringency, 100.0));
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    s.push_str(&format!("<title>{}</title>\n", escape(region)));
    s.push_str(&format!(
        "<line x1=\"{PAD}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#888\"/>\n",
        H - PAD,
        W - PAD
    ));
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"{wai}\"><title>WAI (max {wai_top:.4})</title></polyline>\n"
    ));
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#2c3e50\" stroke-width=\"2\" stroke-dasharray=\"6 4\" points=\"{stringency}\"><title>stringency (0-100)</title></polyline>\n"
    ));
    for (i, p) in points.iter().enumerate() {
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            x(i),
            H - PAD / 2.0,
            escape(&p.snapshot)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// File-name-safe form of a region code.
fn slug(region: &str) -> String {
    region
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Render `inputs` into `out_dir` in each format. Returns written files with
/// their row counts.
pub fn render(inputs: &ReportInputs, out_dir: &Path, formats: &[ReportFormat]) -> Result<Vec<(PathBuf, usize)>> {
    let mut out = Vec::new();
    let table = inputs.table();
    let n_reg_rows = table.rows.len();
    for format in formats {
        match format {
            ReportFormat::Csv => {
                write(
                    &mut out,
                    out_dir.join("correlation.csv"),
                    &csv_text(CORRELATION_HEADER, &inputs.correlation)?,
                    inputs.correlation.len(),
                )?;
                write(
                    &mut out,
                    out_dir.join("paired_series.csv"),
                    &csv_text(PAIRED_HEADER, &inputs.paired)?,
                    inputs.paired.len(),
                )?;
                write(
                    &mut out,
                    out_dir.join("industry_shares.csv"),
                    &csv_text(INDUSTRY_HEADER, &inputs.industry)?,
                    inputs.industry.len(),
                )?;
                write(
                    &mut out,
                    out_dir.join("tag_shares.csv"),
                    &csv_text(TAG_HEADER, &inputs.tags)?,
                    inputs.tags.len(),
                )?;
                let text = table.to_csv();
                let rows = text.lines().count() - 1;
                write(&mut out, out_dir.join("regression_table.csv"), &text, rows)?;
                write(&mut out, out_dir.join("regression_table.txt"), &table.to_text(), n_reg_rows)?;
            }
            ReportFormat::Json => {
                write(
                    &mut out,
                    out_dir.join("correlation.json"),
                    &json(&inputs.correlation)?,
                    inputs.correlation.len(),
                )?;
                write(
                    &mut out,
                    out_dir.join("paired_series.json"),
                    &json(&inputs.paired)?,
                    inputs.paired.len(),
                )?;
                write(
                    &mut out,
                    out_dir.join("industry_shares.json"),
                    &json(&inputs.industry)?,
                    inputs.industry.len(),
                )?;
                write(&mut out, out_dir.join("tag_shares.json"), &json(&inputs.tags)?, inputs.tags.len())?;
                write(
                    &mut out,
                    out_dir.join("regression_table.json"),
                    &(table.to_json() + "\n"),
                    n_reg_rows,
                )?;
            }
            ReportFormat::SvgLines => {
                let mut by_region: BTreeMap<&str, Vec<&PairedPoint>> = BTreeMap::new();
                for p in &inputs.paired {
                    by_region.entry(&p.region).or_default().push(p);
                }
                let dir = out_dir.join("svg");
                std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                for (region, pts) in by_region {
                    let n = pts.len();
                    write(&mut out, dir.join(format!("{}.svg", slug(region))), &svg_lines(region, &pts), n)?;
                }
            }
        }
    }
    Ok(out)
}

/// Load the stage files in `src_dir` and render them into `out_dir`.
pub fn emit_report(src_dir: &Path, out_dir: &Path, formats: &[ReportFormat]) -> Result<Vec<(PathBuf, usize)>> {
    let inputs = ReportInputs::load(src_dir)?;
    render(&inputs, out_dir, formats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(region: &str, r: f64) -> CorrelationRow {
        CorrelationRow {
            region: region.into(),
            n_firms: 10,
            n_snapshots: 5,
            r,
        }
    }

    #[test]
    fn correlation_csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let inputs = ReportInputs {
            correlation: vec![corr("DE", 0.5), corr("US", -0.25)],
            ..Default::default()
        };
        render(&inputs, dir.path(), &[ReportFormat::Csv]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("correlation.csv")).unwrap();
        assert_eq!(text, "region,n_firms,n_snapshots,r\nDE,10,5,0.5\nUS,10,5,-0.25\n");
    }

    #[test]
    fn empty_results_give_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let written = render(&ReportInputs::default(), dir.path(), &[ReportFormat::Csv, ReportFormat::Json]).unwrap();
        assert!(written.iter().all(|(_, n)| *n == 0));
        let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(read("correlation.csv"), "region,n_firms,n_snapshots,r\n");
        assert_eq!(read("paired_series.csv"), "region,snapshot,n_firms,wai,stringency\n");
        assert_eq!(read("tag_shares.csv").lines().count(), 1);
        assert_eq!(read("industry_shares.csv").lines().count(), 1);
        assert_eq!(read("regression_table.csv").lines().count(), 1);
        assert_eq!(read("correlation.json"), "[]\n");
    }

    #[test]
    fn svg_per_region() {
        let dir = tempfile::tempdir().unwrap();
        let p = |region: &str, snapshot: &str, wai, stringency| PairedPoint {
            region: region.into(),
            snapshot: snapshot.into(),
            n_firms: 3,
            wai,
            stringency,
        };
        let inputs = ReportInputs {
            paired: vec![p("DE", "a", 0.1, 20.0), p("DE", "b", 0.2, 60.0), p("US/CA", "a", 0.0, 0.0)],
            ..Default::default()
        };
        let written = render(&inputs, dir.path(), &[ReportFormat::SvgLines]).unwrap();
        assert_eq!(written.len(), 2);
        let de = std::fs::read_to_string(dir.path().join("svg/DE.svg")).unwrap();
        assert_eq!(de.matches("<polyline").count(), 2);
        assert!(de.contains("points=\"40.00,160.00 600.00,40.00\""));
        assert!(de.contains("points=\"40.00,232.00 600.00,136.00\""));
        assert!(dir.path().join("svg/US_CA.svg").is_file());
    }

    #[test]
    fn missing_input_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_report(dir.path(), &dir.path().join("out"), &[ReportFormat::Csv]).unwrap_err();
        assert!(err.to_string().contains(files::CORRELATION));
    }
}
