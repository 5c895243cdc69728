//! CSV and JSON output with atomic file replacement.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use crate::args::Format;
use crate::error::CliError;

/// Rows for CSV output alongside the full JSON document.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
    /// Every certificate and acceptance flag in the results holds.
    pub pass: bool,
}

/// Shortest round-trip form, always in exponent notation.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

pub fn render(report: &Report, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let fail = |e: csv::Error| CliError::numeric(format!("csv: {e}"));
            w.write_record(&report.header).map_err(fail)?;
            for row in &report.rows {
                w.write_record(row).map_err(fail)?;
            }
            w.into_inner().map_err(|e| CliError::numeric(format!("csv: {e}")))
        }
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(&report.json).map_err(|e| CliError::numeric(format!("json: {e}")))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

/// Writes `report` to `path` through a temporary file in the same
/// directory, or to stdout when there is no path.
pub fn emit(report: &Report, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let bytes = render(report, format)?;
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(&bytes)?;
        out.flush()?;
        return Ok(());
    };
    let name = path
        .file_name()
        .ok_or_else(|| CliError::input(format!("output path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::numeric(format!("cannot write {}: {e}", path.display()))
    })
}
