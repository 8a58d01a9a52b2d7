//! Gradient-boosted multi-label rule ensembles with gradient-based label binning.
//!
//! Each rule's head is the Newton step of a second-order approximation of a
//! (possibly non-decomposable) multi-label loss. Label binning groups labels
//! with similar per-label optimal scores so that each candidate requires a
//! linear solve in the number of bins instead of the number of labels.

pub mod binning;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod induction;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod rules;
pub mod statistics;

pub use binning::{
    aggregate, criteria, expand_head, map_to_bins, AggregatedStats, BinConfig, BinMapping,
};
pub use dataset::{Dataset, DatasetView, LabelMatrix};
pub use error::{Error, Result};
pub use experiment::{compare_runs, run_experiment, Comparison, ExperimentConfig, RunReport};
pub use induction::{evaluate_candidate, train, TrainConfig, TrainTiming};
pub use linalg::{solve_symmetric, PackedSymmetric};
pub use loss::{ExampleStats, LossFunction};
pub use metrics::{hamming, subset_zero_one, EvalResult};
pub use rules::{Condition, Ensemble, Operator, Rule};
pub use statistics::StatSum;
