//! Logits interchange CSV: header `label,z0,...,z{K-1}`, one row per sample,
//! logits written in the shortest form that parses back to the same `f64`.

use std::path::Path;

use ndarray::Array2;

use super::write_atomic;
use crate::calibration::LogitSet;
use crate::error::{Error, Result};

/// Serialise a logit set to CSV text.
pub fn logits_to_csv(set: &LogitSet) -> String {
    let k = set.class_count();
    let mut out = String::from("label");
    for j in 0..k {
        out.push_str(&format!(",z{j}"));
    }
    out.push('\n');
    for (row, &y) in set.logits().rows().into_iter().zip(set.labels()) {
        out.push_str(&y.to_string());
        for v in row {
            out.push_str(&format!(",{v:e}"));
        }
        out.push('\n');
    }
    out
}

/// Parse CSV text produced by [`logits_to_csv`] (or written by hand).
pub fn logits_from_csv(text: &str) -> Result<LogitSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::format("header", e.to_string()))?.clone();
    if header.get(0) != Some("label") {
        return Err(Error::format("header", "first column must be `label`"));
    }
    let k = header.len() - 1;
    if k < 2 {
        return Err(Error::format("header", format!("need at least 2 logit columns, found {k}")));
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("z{j}") {
            return Err(Error::format(
                "header",
                format!("column {} must be `z{j}`, found `{name}`", j + 1),
            ));
        }
    }

    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::format(format!("row {row}"), e.to_string()))?;
        if record.len() != k + 1 {
            return Err(Error::format(
                format!("row {row}"),
                format!("expected {} columns, found {}", k + 1, record.len()),
            ));
        }
        let label: usize = record[0].parse().map_err(|_| {
            Error::format(format!("row {row}"), format!("bad label `{}`", &record[0]))
        })?;
        if label >= k {
            return Err(Error::Validation(format!(
                "row {row}: label {label} is not below class count {k}"
            )));
        }
        labels.push(label);
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format(format!("row {row}"), format!("bad logit `{field}`")))?;
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::format("body", "no samples"));
    }
    let logits = Array2::from_shape_vec((labels.len(), k), values).expect("row arity checked");
    LogitSet::new(logits, labels)
}

pub fn write_logits(path: &Path, set: &LogitSet) -> Result<()> {
    write_atomic(path, logits_to_csv(set).as_bytes())
}

pub fn read_logits(path: &Path) -> Result<LogitSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    logits_from_csv(&text)
}
