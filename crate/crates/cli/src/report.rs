//! CSV output for metrics tables.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;
use octd_core::MetricsReport;

pub const HEADER: [&str; 6] = ["image", "snr_db", "cnr", "epi", "ssim", "roi_count"];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn record(r: &MetricsReport) -> [String; 6] {
    [
        r.image.clone(),
        cell(r.snr_db),
        cell(r.cnr),
        cell(r.epi),
        cell(r.ssim),
        r.roi_count.to_string(),
    ]
}

/// `after - before` per metric; missing on either side stays missing.
pub fn delta(name: &str, after: &MetricsReport, before: &MetricsReport) -> MetricsReport {
    let d = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
    MetricsReport {
        image: name.to_string(),
        snr_db: d(after.snr_db, before.snr_db),
        cnr: d(after.cnr, before.cnr),
        epi: d(after.epi, before.epi),
        ssim: d(after.ssim, before.ssim),
        roi_count: after.roi_count,
        roi_contributions: Vec::new(),
        ssim_scale: None,
    }
}

fn write_rows(out: impl Write, header: bool, rows: &[MetricsReport]) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    if header {
        w.write_record(HEADER)?;
    }
    for r in rows {
        w.write_record(record(r))?;
    }
    w.flush()?;
    Ok(())
}

fn write_table(
    mut out: impl Write,
    comments: &[String],
    rows: &[MetricsReport],
) -> anyhow::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    write_rows(out, true, rows)
}

/// Write a fresh table to `path`, or to stdout when `path` is `None`.
pub fn create(
    path: Option<&Path>,
    comments: &[String],
    rows: &[MetricsReport],
) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_table(io::BufWriter::new(f), comments, rows)
        }
        None => write_table(io::stdout().lock(), comments, rows),
    }
}

/// Append rows to `path`; a missing or empty file gets comments and a header
/// first.
pub fn append(
    path: Option<&Path>,
    comments: &[String],
    rows: &[MetricsReport],
) -> anyhow::Result<()> {
    let Some(p) = path else {
        return create(None, comments, rows);
    };
    let fresh = std::fs::metadata(p).map(|m| m.len() == 0).unwrap_or(true);
    let f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(p)
        .with_context(|| format!("opening {}", p.display()))?;
    let out = io::BufWriter::new(f);
    if fresh {
        write_table(out, comments, rows)
    } else {
        write_rows(out, false, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(name: &str, snr: f64) -> MetricsReport {
        MetricsReport {
            image: name.into(),
            snr_db: Some(snr),
            cnr: Some(1.5),
            epi: None,
            ssim: Some(0.25),
            roi_count: 10,
            roi_contributions: vec![],
            ssim_scale: Some(1.0),
        }
    }

    #[test]
    fn table_layout() {
        let mut buf = Vec::new();
        write_table(&mut buf, &["config {}".into()], &[report("a.raw", 12.5)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "# config {}\nimage,snr_db,cnr,epi,ssim,roi_count\na.raw,12.5,1.5,,0.25,10\n"
        );
    }

    #[test]
    fn delta_of_identical_is_zero() {
        let a = report("x", 3.0);
        let d = delta("d", &a, &a);
        assert_eq!(
            (d.snr_db, d.cnr, d.epi, d.ssim),
            (Some(0.0), Some(0.0), None, Some(0.0))
        );
    }
}
