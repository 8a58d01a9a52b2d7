//! ARFF reader (dense and sparse data sections) with Mulan-style label lists.

use std::path::Path;

use regex::Regex;

use super::{Attribute, Dataset, Imputation, LabelMatrix};
use crate::error::{Error, MissingCell, Result};

/// Which ARFF attributes are labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSpec {
    /// The last `n` attributes.
    Trailing(usize),
    /// Attributes with these names, e.g. from a Mulan XML label file.
    Names(Vec<String>),
}

pub fn load_arff(
    path: impl AsRef<Path>,
    labels: &LabelSpec,
    imputation: Imputation,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dataset = parse_arff(&text, labels, imputation)?;
    if dataset.name.is_empty() {
        dataset.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(dataset)
}

/// Extracts label names from a Mulan label XML document.
pub fn parse_label_xml(text: &str) -> Result<Vec<String>> {
    let re = Regex::new(r#"<label\s+name\s*=\s*(?:"([^"]*)"|'([^']*)')"#).expect("valid regex");
    let names: Vec<String> = re
        .captures_iter(text)
        .map(|c| {
            c.get(1)
                .or_else(|| c.get(2))
                .map_or("", |m| m.as_str())
                .to_string()
        })
        .collect();
    if names.is_empty() {
        return Err(Error::parse(
            1,
            "no <label name=...> elements in label file",
        ));
    }
    Ok(names)
}

#[derive(Debug)]
struct RawAttribute {
    name: String,
    categories: Option<Vec<String>>,
}

pub fn parse_arff(text: &str, labels: &LabelSpec, imputation: Imputation) -> Result<Dataset> {
    let mut relation = String::new();
    let mut attributes: Vec<RawAttribute> = Vec::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    // header
    let mut data_line = None;
    for (no, line) in lines.by_ref() {
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            relation = unquote(line["@relation".len()..].trim()).to_string();
        } else if lower.starts_with("@attribute") {
            attributes.push(parse_attribute(line["@attribute".len()..].trim(), no)?);
        } else if lower.starts_with("@data") {
            data_line = Some(no);
            break;
        } else {
            return Err(Error::parse(no, format!("unexpected header line {line:?}")));
        }
    }
    let data_line = data_line
        .ok_or_else(|| Error::parse(text.lines().count().max(1), "missing @data section"))?;
    if attributes.is_empty() {
        return Err(Error::parse(data_line, "no attributes declared"));
    }

    let label_indices = resolve_labels(&attributes, labels, data_line)?;
    let is_label: Vec<bool> = (0..attributes.len())
        .map(|i| label_indices.contains(&i))
        .collect();

    let a = attributes.len();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (no, line) in lines {
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut values = vec![0.0; a];
        if let Some(inner) = line.strip_prefix('{') {
            let inner = inner
                .strip_suffix('}')
                .ok_or_else(|| Error::parse(no, "unterminated sparse row"))?;
            for entry in split_values(inner) {
                let entry = entry.trim();
                if entry.is_empty() {
                    continue;
                }
                let (idx, value) = entry
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| Error::parse(no, format!("malformed sparse entry {entry:?}")))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::parse(no, format!("bad sparse index {idx:?}")))?;
                if idx >= a {
                    return Err(Error::parse(no, format!("sparse index {idx} out of range")));
                }
                values[idx] = parse_value(&attributes[idx], value.trim(), no)?;
            }
        } else {
            let fields = split_values(line);
            if fields.len() != a {
                return Err(Error::parse(
                    no,
                    format!("expected {a} values, found {}", fields.len()),
                ));
            }
            for (i, field) in fields.iter().enumerate() {
                values[i] = parse_value(&attributes[i], field.trim(), no)?;
            }
        }
        rows.push((no, values));
    }
    if rows.is_empty() {
        return Err(Error::parse(data_line, "empty @data section"));
    }

    // labels
    let mut label_data = Vec::with_capacity(rows.len() * label_indices.len());
    for (no, values) in &rows {
        for &li in &label_indices {
            let v = values[li];
            let encoded = match (&attributes[li].categories, v) {
                (_, v) if v.is_nan() => None,
                (Some(cats), v) => match cats[v as usize].as_str() {
                    "1" => Some(true),
                    "0" => Some(false),
                    _ => None,
                },
                (None, 1.0) => Some(true),
                (None, 0.0) => Some(false),
                (None, _) => None,
            };
            let Some(encoded) = encoded else {
                return Err(Error::parse(
                    *no,
                    format!("label {:?} must be 0 or 1", attributes[li].name),
                ));
            };
            label_data.push(if encoded { 1.0 } else { -1.0 });
        }
    }
    let labels = LabelMatrix::new(rows.len(), label_indices.len(), label_data)?;

    // features
    let mut missing = Vec::new();
    let mut feature_attributes = Vec::new();
    let mut columns = Vec::new();
    for (i, raw) in attributes.iter().enumerate() {
        if is_label[i] {
            continue;
        }
        let mut column: Vec<f64> = rows.iter().map(|(_, v)| v[i]).collect();
        for ((no, _), v) in rows.iter().zip(&column) {
            if v.is_nan() {
                missing.push(MissingCell {
                    line: *no,
                    column: i,
                });
            }
        }
        impute(
            &mut column,
            raw.categories.as_ref().map(Vec::len),
            imputation,
        );
        feature_attributes.push(match &raw.categories {
            Some(c) => Attribute::nominal(&raw.name, c.clone()),
            None => Attribute::numerical(&raw.name),
        });
        columns.push(column);
    }
    if !missing.is_empty() && imputation == Imputation::None {
        return Err(Error::MissingValues { cells: missing });
    }
    let label_names = label_indices
        .iter()
        .map(|&i| attributes[i].name.clone())
        .collect();
    Dataset::new(relation, feature_attributes, columns, labels, label_names)
}

/// Fills NaN cells in place: mean for numerical, mode (lowest index on ties)
/// for nominal columns with `categories` values.
pub(crate) fn impute(column: &mut [f64], categories: Option<usize>, imputation: Imputation) {
    if imputation == Imputation::None || !column.iter().any(|v| v.is_nan()) {
        return;
    }
    let present = column.iter().copied().filter(|v| !v.is_nan());
    let fill = match categories {
        None => {
            let (sum, count) = present.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if count == 0 {
                0.0
            } else {
                sum / count as f64
            }
        }
        Some(k) => {
            let mut counts = vec![0usize; k.max(1)];
            for v in present {
                counts[v as usize] += 1;
            }
            let best = counts
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map_or(0, |(i, _)| i);
            best as f64
        }
    };
    for v in column.iter_mut().filter(|v| v.is_nan()) {
        *v = fill;
    }
}

fn resolve_labels(
    attributes: &[RawAttribute],
    spec: &LabelSpec,
    line: usize,
) -> Result<Vec<usize>> {
    match spec {
        LabelSpec::Trailing(n) => {
            if *n == 0 || *n >= attributes.len() {
                return Err(Error::parse(
                    line,
                    format!(
                        "label count {n} invalid for {} attributes",
                        attributes.len()
                    ),
                ));
            }
            Ok((attributes.len() - n..attributes.len()).collect())
        }
        LabelSpec::Names(names) => {
            if names.is_empty() {
                return Err(Error::parse(line, "empty label list"));
            }
            let mut indices: Vec<usize> = names
                .iter()
                .map(|name| {
                    attributes
                        .iter()
                        .position(|a| &a.name == name)
                        .ok_or_else(|| {
                            Error::parse(line, format!("label attribute {name:?} not declared"))
                        })
                })
                .collect::<Result<_>>()?;
            indices.sort_unstable();
            indices.dedup();
            if indices.len() == attributes.len() {
                return Err(Error::parse(line, "every attribute is a label"));
            }
            Ok(indices)
        }
    }
}

fn parse_attribute(rest: &str, line: usize) -> Result<RawAttribute> {
    let (name, kind) =
        split_name(rest).ok_or_else(|| Error::parse(line, "malformed @attribute"))?;
    let kind = kind.trim();
    if let Some(inner) = kind.strip_prefix('{') {
        let inner = inner
            .strip_suffix('}')
            .ok_or_else(|| Error::parse(line, "unterminated nominal specification"))?;
        let categories = split_values(inner)
            .iter()
            .map(|v| unquote(v.trim()).to_string())
            .collect();
        return Ok(RawAttribute {
            name,
            categories: Some(categories),
        });
    }
    match kind.to_ascii_lowercase().as_str() {
        "numeric" | "real" | "integer" => Ok(RawAttribute {
            name,
            categories: None,
        }),
        other => Err(Error::parse(
            line,
            format!("unsupported attribute type {other:?}"),
        )),
    }
}

fn split_name(rest: &str) -> Option<(String, &str)> {
    let first = rest.chars().next()?;
    if first == '\'' || first == '"' {
        let end = rest[1..].find(first)? + 1;
        Some((rest[1..end].to_string(), &rest[end + 1..]))
    } else {
        let end = rest.find(char::is_whitespace)?;
        Some((rest[..end].to_string(), &rest[end..]))
    }
}

fn unquote(s: &str) -> &str {
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'\'' || b[0] == b'"') && b[b.len() - 1] == b[0] {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

/// Splits on commas outside single or double quotes.
fn split_values(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut quote = None;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match (quote, ch) {
            (None, '\'' | '"') => quote = Some(ch),
            (Some(q), c) if c == q => quote = None,
            (None, ',') => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

fn parse_value(attribute: &RawAttribute, field: &str, line: usize) -> Result<f64> {
    if field == "?" {
        return Ok(f64::NAN);
    }
    match &attribute.categories {
        Some(categories) => {
            let v = unquote(field);
            categories
                .iter()
                .position(|c| c == v)
                .map(|i| i as f64)
                .ok_or_else(|| {
                    Error::parse(
                        line,
                        format!("{v:?} is not a category of {:?}", attribute.name),
                    )
                })
        }
        None => field.parse::<f64>().map_err(|_| {
            Error::parse(
                line,
                format!("{field:?} is not numeric ({:?})", attribute.name),
            )
        }),
    }
}
