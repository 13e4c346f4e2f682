use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::engine::RoundRecord;
use crate::error::{Error, Result};

pub const JSONL_FILE: &str = "metrics.jsonl";
pub const CSV_FILE: &str = "metrics.csv";
pub const TIMINGS_FILE: &str = "timings.csv";

/// Decimal text with 17 significant digits, enough to round-trip any f64.
/// Non-finite values have no JSON form and render as `None`.
pub fn format_real(x: f64) -> Option<String> {
    x.is_finite().then(|| format!("{x:.16e}"))
}

fn json_real(x: Option<f64>) -> String {
    x.and_then(format_real).unwrap_or_else(|| "null".into())
}

pub(super) fn csv_real(x: Option<f64>) -> String {
    x.and_then(format_real).unwrap_or_default()
}

fn json_line(r: &RoundRecord) -> String {
    let selected: Vec<String> = r.selected.iter().map(|s| s.to_string()).collect();
    format!(
        "{{\"round\":{},\"loss\":{},\"accuracy\":{},\"delta_norm\":{},\"lambda_mean\":{},\"lambda_max\":{},\
         \"x\":{},\"y\":{},\"rho\":{},\"w\":{},\"selected\":[{}]}}",
        r.round,
        json_real(r.loss),
        json_real(r.accuracy),
        json_real(Some(r.delta_norm)),
        json_real(r.lambda_mean),
        json_real(r.lambda_max),
        json_real(r.x),
        json_real(r.y),
        json_real(r.rho),
        json_real(Some(r.w)),
        selected.join(",")
    )
}

fn csv_row(r: &RoundRecord) -> [String; 11] {
    let selected: Vec<String> = r.selected.iter().map(|s| s.to_string()).collect();
    [
        r.round.to_string(),
        csv_real(r.loss),
        csv_real(r.accuracy),
        csv_real(Some(r.delta_norm)),
        csv_real(r.lambda_mean),
        csv_real(r.lambda_max),
        csv_real(r.x),
        csv_real(r.y),
        csv_real(r.rho),
        csv_real(Some(r.w)),
        selected.join(";"),
    ]
}

/// Streams round records to JSONL, the companion CSV and a timing CSV.
/// Every record is flushed so an aborted run leaves readable prefixes.
pub struct MetricsWriter {
    jsonl_path: PathBuf,
    csv_path: PathBuf,
    jsonl: BufWriter<File>,
    csv: csv::Writer<File>,
    timings: Option<csv::Writer<File>>,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

impl MetricsWriter {
    pub fn create(jsonl_path: &Path, csv_path: &Path, timings_path: Option<&Path>) -> Result<Self> {
        let jsonl = File::create(jsonl_path).map_err(|e| Error::io(jsonl_path, e))?;
        let mut csv = csv::Writer::from_path(csv_path).map_err(|e| csv_err(csv_path, e))?;
        csv.write_record(RoundRecord::FIELDS).map_err(|e| csv_err(csv_path, e))?;
        csv.flush().map_err(|e| Error::io(csv_path, e))?;
        let timings = match timings_path {
            Some(p) => {
                let mut w = csv::Writer::from_path(p).map_err(|e| csv_err(p, e))?;
                w.write_record(["round", "wall_ms"]).map_err(|e| csv_err(p, e))?;
                Some(w)
            }
            None => None,
        };
        Ok(MetricsWriter {
            jsonl_path: jsonl_path.to_path_buf(),
            csv_path: csv_path.to_path_buf(),
            jsonl: BufWriter::new(jsonl),
            csv,
            timings,
        })
    }

    pub fn write(&mut self, r: &RoundRecord) -> Result<()> {
        writeln!(self.jsonl, "{}", json_line(r)).map_err(|e| Error::io(&self.jsonl_path, e))?;
        self.jsonl.flush().map_err(|e| Error::io(&self.jsonl_path, e))?;
        self.csv.write_record(csv_row(r)).map_err(|e| csv_err(&self.csv_path, e))?;
        self.csv.flush().map_err(|e| Error::io(&self.csv_path, e))?;
        if let Some(t) = &mut self.timings {
            t.write_record([r.round.to_string(), format!("{:.3}", r.wall_ms)])
                .and_then(|_| t.flush().map_err(csv::Error::from))
                .map_err(|e| Error::Data(format!("timings: {e}")))?;
        }
        Ok(())
    }
}

/// Write records as JSON Lines at `path` and as CSV next to it.
pub fn write_metrics(records: &[RoundRecord], path: &Path) -> Result<()> {
    let mut w = MetricsWriter::create(path, &path.with_extension("csv"), None)?;
    for r in records {
        w.write(r)?;
    }
    Ok(())
}
