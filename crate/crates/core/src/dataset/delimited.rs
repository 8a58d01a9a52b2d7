//! Comma-separated datasets with a header row.

use std::io::{Read, Write};
use std::path::Path;

use super::arff::impute;
use super::{Attribute, AttributeKind, Dataset, Imputation, LabelMatrix};
use crate::error::{Error, MissingCell, Result};

/// Which CSV columns are labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CsvLabels {
    /// The last `n` columns.
    Trailing(usize),
    /// Columns whose header starts with this prefix.
    Prefix(String),
}

pub fn load_csv(
    path: impl AsRef<Path>,
    labels: &CsvLabels,
    imputation: Imputation,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dataset = parse_csv(file, labels, imputation)?;
    dataset.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(dataset)
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, e.to_string())
}

/// Parses CSV text. Feature columns whose non-missing cells all parse as
/// numbers are numerical; any other column becomes nominal with categories in
/// order of first appearance. Label cells must be `0` or `1`.
pub fn parse_csv(reader: impl Read, labels: &CsvLabels, imputation: Imputation) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::parse(1, "missing header row"));
    }
    let width = header.len();
    let is_label: Vec<bool> = match labels {
        CsvLabels::Trailing(n) => {
            if *n == 0 || *n >= width {
                return Err(Error::parse(
                    1,
                    format!("label count {n} invalid for {width} columns"),
                ));
            }
            (0..width).map(|i| i >= width - n).collect()
        }
        CsvLabels::Prefix(p) => {
            let flags: Vec<bool> = header.iter().map(|h| h.starts_with(p.as_str())).collect();
            let count = flags.iter().filter(|&&f| f).count();
            if count == 0 || count == width {
                return Err(Error::parse(
                    1,
                    format!("label prefix {p:?} selects {count} of {width} columns"),
                ));
            }
            flags
        }
    };

    let mut lines = Vec::new();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); width];
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::parse(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (column, cell) in cells.iter_mut().zip(record.iter()) {
            column.push(cell.to_string());
        }
        lines.push(line);
    }
    if lines.is_empty() {
        return Err(Error::parse(1, "no data rows"));
    }
    let n = lines.len();

    let mut label_names = Vec::new();
    let mut label_columns = Vec::new();
    let mut attributes = Vec::new();
    let mut columns = Vec::new();
    let mut missing = Vec::new();
    for (c, column) in cells.iter().enumerate() {
        if is_label[c] {
            let values = column
                .iter()
                .zip(&lines)
                .map(|(cell, &line)| match cell.as_str() {
                    "1" => Ok(1.0),
                    "0" => Ok(-1.0),
                    other => Err(Error::parse(
                        line,
                        format!("label cell {other:?} is not 0 or 1"),
                    )),
                })
                .collect::<Result<Vec<f64>>>()?;
            label_names.push(header[c].clone());
            label_columns.push(values);
            continue;
        }
        for (cell, &line) in column.iter().zip(&lines) {
            if is_missing(cell) {
                missing.push(MissingCell { line, column: c });
            }
        }
        let numeric = column
            .iter()
            .filter(|cell| !is_missing(cell))
            .all(|cell| cell.parse::<f64>().is_ok_and(f64::is_finite));
        if numeric {
            let mut values: Vec<f64> = column
                .iter()
                .map(|cell| {
                    if is_missing(cell) {
                        f64::NAN
                    } else {
                        cell.parse().unwrap()
                    }
                })
                .collect();
            impute(&mut values, None, imputation);
            attributes.push(Attribute::numerical(&header[c]));
            columns.push(values);
        } else {
            let mut categories: Vec<String> = Vec::new();
            let mut values: Vec<f64> = column
                .iter()
                .map(|cell| {
                    if is_missing(cell) {
                        return f64::NAN;
                    }
                    let idx = categories
                        .iter()
                        .position(|k| k == cell)
                        .unwrap_or_else(|| {
                            categories.push(cell.clone());
                            categories.len() - 1
                        });
                    idx as f64
                })
                .collect();
            impute(&mut values, Some(categories.len()), imputation);
            attributes.push(Attribute::nominal(&header[c], categories));
            columns.push(values);
        }
    }
    if !missing.is_empty() && imputation == Imputation::None {
        return Err(Error::MissingValues { cells: missing });
    }

    let mut label_data = Vec::with_capacity(n * label_columns.len());
    for i in 0..n {
        label_data.extend(label_columns.iter().map(|col| col[i]));
    }
    let labels = LabelMatrix::new(n, label_columns.len(), label_data)?;
    Dataset::new("", attributes, columns, labels, label_names)
}

/// Writes features followed by labels (`0`/`1`). Numbers use the shortest
/// representation that parses back to the same value.
pub fn write_csv(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let io = |e: csv::Error| Error::io("<csv>", std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(writer);
    let header = dataset
        .attributes()
        .iter()
        .map(|a| a.name.as_str())
        .chain(dataset.label_names().iter().map(String::as_str));
    w.write_record(header).map_err(io)?;
    let mut record = Vec::with_capacity(dataset.attribute_count() + dataset.label_count());
    for i in 0..dataset.example_count() {
        record.clear();
        for (a, attribute) in dataset.attributes().iter().enumerate() {
            let v = dataset.value(i, a);
            record.push(match &attribute.kind {
                AttributeKind::Numerical => format!("{v}"),
                AttributeKind::Nominal { categories } => categories[v as usize].clone(),
            });
        }
        for &y in dataset.labels().row(i) {
            record.push(if y > 0.0 { "1".into() } else { "0".into() });
        }
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
