//! CSV and text artefacts written into the output directory.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mmgnn_core::tensor::Matrix;

/// Shortest round-trip decimal, with `inf`/`-inf` for infinities and
/// `nan` for missing values.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// A matrix with a leading label column.
pub fn write_labelled_matrix(
    path: &Path,
    corner: &str,
    row_labels: &[String],
    col_labels: &[String],
    m: &Matrix,
) -> Result<()> {
    let mut header = vec![corner.to_string()];
    header.extend(col_labels.iter().cloned());
    let rows: Vec<Vec<String>> = row_labels
        .iter()
        .enumerate()
        .map(|(r, label)| {
            let mut row = vec![label.clone()];
            row.extend(m.row(r).iter().map(|&v| fmt_value(v)));
            row
        })
        .collect();
    write_csv(path, &header, &rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
