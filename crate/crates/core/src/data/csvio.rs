use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, FeatureSchema, MISSING_LABEL};
use crate::error::{Error, Result};

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Reads a headered CSV whose columns are the schema's features plus the label
/// column, in any order. Empty or unparsable cells become missing values.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();

    let expected: HashSet<&str> = schema
        .feature_names()
        .iter()
        .map(String::as_str)
        .chain(std::iter::once(schema.label_column()))
        .collect();
    let present: HashSet<&str> = header.iter().map(String::as_str).collect();
    let mut missing: Vec<String> = expected
        .difference(&present)
        .map(|s| s.to_string())
        .collect();
    let mut unexpected: Vec<String> = present
        .difference(&expected)
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() || !unexpected.is_empty() || header.len() != expected.len() {
        missing.sort();
        unexpected.sort();
        return Err(Error::HeaderMismatch {
            missing,
            unexpected,
        });
    }

    let col_of = |name: &str| header.iter().position(|h| h == name).expect("checked");
    let feature_cols: Vec<usize> = schema.feature_names().iter().map(|n| col_of(n)).collect();
    let label_col = col_of(schema.label_column());

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        rows.push(
            feature_cols
                .iter()
                .map(|&c| parse_cell(&record[c]))
                .collect::<Vec<f64>>(),
        );
        labels.push(parse_label(&record[label_col]));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset("csv has no data rows".into()));
    }
    Dataset::new(schema.clone(), rows, labels)
}

fn parse_cell(cell: &str) -> f64 {
    cell.parse::<f64>().unwrap_or(f64::NAN)
}

fn parse_label(cell: &str) -> u32 {
    if let Ok(v) = cell.parse::<u32>() {
        return v;
    }
    // Exports sometimes write integral labels as floats ("4.0").
    match cell.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < f64::from(u32::MAX) => v as u32,
        _ => MISSING_LABEL,
    }
}

/// Writes features in schema order followed by the label column. Missing
/// values are written as empty cells.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.schema().feature_names().iter().map(String::as_str).collect();
    header.push(d.schema().label_column());
    w.write_record(&header)?;
    for (row, &label) in d.rows().iter().zip(d.labels()) {
        let mut record: Vec<String> = row
            .iter()
            .map(|v| if v.is_nan() { String::new() } else { v.to_string() })
            .collect();
        record.push(if label == MISSING_LABEL {
            String::new()
        } else {
            label.to_string()
        });
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
