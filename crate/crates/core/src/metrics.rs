//! Subset 0/1 and Hamming loss, in percent.

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetView, LabelMatrix};
use crate::error::{Error, Result};
use crate::rules::Ensemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub subset_zero_one: f64,
    pub hamming: f64,
    pub example_count: usize,
}

impl EvalResult {
    pub fn compute(truth: &LabelMatrix, predicted: &LabelMatrix) -> Result<Self> {
        Ok(Self {
            subset_zero_one: subset_zero_one(truth, predicted)?,
            hamming: hamming(truth, predicted)?,
            example_count: truth.rows(),
        })
    }
}

/// Predicts every example of `view` and scores the predictions.
pub fn evaluate(ensemble: &Ensemble, view: &DatasetView<'_>) -> Result<EvalResult> {
    let predicted = (0..view.len())
        .map(|i| ensemble.predict(&view.example(i)))
        .collect::<Result<Vec<_>>>()?;
    EvalResult::compute(&view.labels(), &LabelMatrix::from_rows(&predicted)?)
}

fn check_shapes(truth: &LabelMatrix, predicted: &LabelMatrix) -> Result<()> {
    if truth.rows() != predicted.rows() || truth.cols() != predicted.cols() || truth.rows() == 0 {
        return Err(Error::ShapeMismatch {
            left_rows: truth.rows(),
            left_cols: truth.cols(),
            right_rows: predicted.rows(),
            right_cols: predicted.cols(),
        });
    }
    Ok(())
}

/// Percentage of examples whose predicted label vector differs in any position.
pub fn subset_zero_one(truth: &LabelMatrix, predicted: &LabelMatrix) -> Result<f64> {
    check_shapes(truth, predicted)?;
    let wrong = (0..truth.rows())
        .filter(|&r| truth.row(r) != predicted.row(r))
        .count();
    Ok(100.0 * wrong as f64 / truth.rows() as f64)
}

/// Percentage of mismatching label cells.
pub fn hamming(truth: &LabelMatrix, predicted: &LabelMatrix) -> Result<f64> {
    check_shapes(truth, predicted)?;
    let wrong: usize = (0..truth.rows())
        .map(|r| {
            truth
                .row(r)
                .iter()
                .zip(predicted.row(r))
                .filter(|(a, b)| a != b)
                .count()
        })
        .sum();
    Ok(100.0 * wrong as f64 / (truth.rows() * truth.cols()) as f64)
}
