use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};

/// Load a CSV with a header row and the integer label in the last column.
/// The class count is `max(label) + 1` unless `classes` is given.
pub fn load_csv(path: &Path, classes: Option<usize>) -> Result<LabeledDataset> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let width = reader.headers().map_err(|e| parse_err(e.to_string()))?.len();
    if width < 2 {
        return Err(parse_err("need at least one feature column and a label column".into()));
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| parse_err(format!("line {line}: {e}")))?;
        if record.len() != width {
            return Err(parse_err(format!("line {line}: expected {width} columns, found {}", record.len())));
        }
        for field in record.iter().take(width - 1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(format!("line {line}: `{field}` is not a number")))?;
            features.push(v);
        }
        let label = &record[width - 1];
        let label: usize = label
            .parse()
            .map_err(|_| parse_err(format!("line {line}: label `{label}` is not a non-negative integer")))?;
        labels.push(label);
    }
    let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    LabeledDataset::new(features, labels, width - 1, classes)
}
