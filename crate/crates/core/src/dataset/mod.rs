//! Multi-label datasets: features, label matrix, loaders and cross-validation views.

mod arff;
mod delimited;
mod synth;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use arff::{load_arff, parse_arff, parse_label_xml, LabelSpec};
pub use delimited::{load_csv, parse_csv, write_csv, CsvLabels};
pub use synth::synth_dataset;

/// Label matrix with entries in `{-1.0, +1.0}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl LabelMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidConfig(format!(
                "label value {bad} is not -1 or +1"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// From `{0, 1}` relevance indicators.
    pub fn from_binary(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend(row.iter().map(|&v| if v != 0 { 1.0 } else { -1.0 }));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn select_rows(&self, rows: &[usize]) -> LabelMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        LabelMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidConfig("ragged label rows".into()));
        }
        LabelMatrix::new(rows.len(), cols, data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Numerical,
    Nominal { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numerical(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numerical,
        }
    }

    pub fn nominal(name: impl Into<String>, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Nominal { categories },
        }
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self.kind, AttributeKind::Nominal { .. })
    }
}

/// How missing feature values are treated at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    /// Missing cells are an error.
    #[default]
    None,
    /// Mean for numerical, most frequent category for nominal attributes.
    MeanMode,
}

/// A fully loaded multi-label dataset. Features are stored column-major with
/// nominal values encoded as category indices; no cell is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    attributes: Vec<Attribute>,
    features: Vec<f64>,
    labels: LabelMatrix,
    label_names: Vec<String>,
}

impl Dataset {
    /// `columns[a][i]` is the value of attribute `a` for example `i`.
    pub fn new(
        name: impl Into<String>,
        attributes: Vec<Attribute>,
        columns: Vec<Vec<f64>>,
        labels: LabelMatrix,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n = labels.rows();
        if columns.len() != attributes.len() {
            return Err(Error::DimensionMismatch {
                expected: attributes.len(),
                found: columns.len(),
            });
        }
        if label_names.len() != labels.cols() {
            return Err(Error::DimensionMismatch {
                expected: labels.cols(),
                found: label_names.len(),
            });
        }
        for (attribute, column) in attributes.iter().zip(&columns) {
            if column.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: column.len(),
                });
            }
            if column.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "attribute {:?} has missing or non-finite values",
                    attribute.name
                )));
            }
            if let AttributeKind::Nominal { categories } = &attribute.kind {
                if column
                    .iter()
                    .any(|&v| v < 0.0 || v.fract() != 0.0 || v as usize >= categories.len())
                {
                    return Err(Error::InvalidConfig(format!(
                        "attribute {:?} has an out-of-range category index",
                        attribute.name
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            attributes,
            features: columns.concat(),
            labels,
            label_names,
        })
    }

    pub fn example_count(&self) -> usize {
        self.labels.rows()
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    pub fn label_count(&self) -> usize {
        self.labels.cols()
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn labels(&self) -> &LabelMatrix {
        &self.labels
    }

    #[inline]
    pub fn column(&self, attribute: usize) -> &[f64] {
        let n = self.example_count();
        &self.features[attribute * n..(attribute + 1) * n]
    }

    #[inline]
    pub fn value(&self, example: usize, attribute: usize) -> f64 {
        self.features[attribute * self.example_count() + example]
    }

    pub fn example(&self, example: usize) -> Vec<f64> {
        (0..self.attribute_count())
            .map(|a| self.value(example, a))
            .collect()
    }

    pub fn view(&self) -> DatasetView<'_> {
        DatasetView {
            dataset: self,
            rows: (0..self.example_count()).collect(),
        }
    }

    pub fn view_of(&self, rows: Vec<usize>) -> DatasetView<'_> {
        DatasetView {
            dataset: self,
            rows,
        }
    }
}

/// A subset of a dataset's examples, by index. Does not copy feature data.
#[derive(Debug, Clone)]
pub struct DatasetView<'a> {
    dataset: &'a Dataset,
    rows: Vec<usize>,
}

impl<'a> DatasetView<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label_count(&self) -> usize {
        self.dataset.label_count()
    }

    pub fn attribute_count(&self) -> usize {
        self.dataset.attribute_count()
    }

    /// Value of `attribute` for the `local`-th example of the view.
    #[inline]
    pub fn value(&self, local: usize, attribute: usize) -> f64 {
        self.dataset.value(self.rows[local], attribute)
    }

    #[inline]
    pub fn truth(&self, local: usize) -> &'a [f64] {
        self.dataset.labels.row(self.rows[local])
    }

    pub fn example(&self, local: usize) -> Vec<f64> {
        self.dataset.example(self.rows[local])
    }

    pub fn labels(&self) -> LabelMatrix {
        self.dataset.labels.select_rows(&self.rows)
    }
}

/// A train/test split of one cross-validation fold.
#[derive(Debug, Clone)]
pub struct Fold<'a> {
    pub index: usize,
    pub train: DatasetView<'a>,
    pub test: DatasetView<'a>,
}

/// Shuffles the examples with `seed` and cuts them into `k` contiguous test
/// folds whose sizes differ by at most one.
pub fn kfold_split(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold<'_>>> {
    let n = dataset.example_count();
    if k < 2 || k > n {
        return Err(Error::InvalidFoldCount { k, examples: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[start..start + size] {
            fold_of[i] = f;
        }
        start += size;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
            Fold {
                index: f,
                train: dataset.view_of(train),
                test: dataset.view_of(test),
            }
        })
        .collect())
}
