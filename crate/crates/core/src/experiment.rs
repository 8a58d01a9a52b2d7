//! Cross-validated experiments, JSON reports and run comparisons.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{kfold_split, Dataset};
use crate::error::{Error, Result};
use crate::induction::{train, TrainConfig};
use crate::loss::LossFunction;
use crate::metrics::{evaluate, EvalResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// `1` trains and evaluates on the whole dataset.
    pub folds: usize,
    /// Worker threads across folds; `0` lets the pool decide.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub examples: usize,
    pub attributes: usize,
    pub labels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub loss: LossFunction,
    pub rules: usize,
    pub shrinkage: f64,
    pub l2_weight: f64,
    /// `"none"` or the bin budget as given.
    pub bins: String,
    /// Bin budget resolved against the label count; absent without binning
    /// or with one bin per label.
    pub resolved_bins: Option<usize>,
    pub feature_sample_fraction: Option<f64>,
    pub sampled_attributes: usize,
    pub instance_sampling: bool,
    pub folds: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub subset_zero_one: f64,
    pub hamming: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSection {
    pub per_fold: Vec<EvalResult>,
    pub mean: MeanMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldTiming {
    pub total_train_seconds: f64,
    pub candidate_eval_seconds: f64,
    pub candidate_evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSection {
    pub per_fold: Vec<FoldTiming>,
    pub mean_total_train_seconds: f64,
    pub mean_candidate_eval_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: DatasetInfo,
    pub config: ConfigEcho,
    pub metrics: MetricsSection,
    pub timing: TimingSection,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n as f64
}

/// Runs k-fold cross-validation, training one model per fold.
///
/// Fold `i` trains with seed `seed + i`, so results do not depend on the
/// number of threads.
pub fn run_experiment(dataset: &Dataset, config: &ExperimentConfig) -> Result<RunReport> {
    config.train.validate()?;
    let splits: Vec<_> = if config.folds == 1 {
        vec![(dataset.view(), dataset.view())]
    } else {
        kfold_split(dataset, config.folds, config.train.seed)?
            .into_iter()
            .map(|f| (f.train, f.test))
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let outcomes = pool.install(|| {
        splits
            .par_iter()
            .enumerate()
            .map(|(i, (train_view, test_view))| {
                let fold_config = TrainConfig {
                    seed: config.train.seed.wrapping_add(i as u64),
                    ..config.train.clone()
                };
                let (ensemble, timing) = train(train_view, &fold_config)?;
                let result = evaluate(&ensemble, test_view)?;
                Ok((
                    result,
                    FoldTiming {
                        total_train_seconds: timing.total_seconds,
                        candidate_eval_seconds: timing.candidate_eval_seconds,
                        candidate_evaluations: timing.candidate_evaluations,
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (results, timings): (Vec<EvalResult>, Vec<FoldTiming>) = outcomes.into_iter().unzip();

    let t = &config.train;
    Ok(RunReport {
        dataset: DatasetInfo {
            name: dataset.name.clone(),
            examples: dataset.example_count(),
            attributes: dataset.attribute_count(),
            labels: dataset.label_count(),
        },
        config: ConfigEcho {
            loss: t.loss,
            rules: t.rule_count,
            shrinkage: t.shrinkage,
            l2_weight: t.l2_weight,
            bins: t
                .bin_config
                .as_ref()
                .map_or_else(|| "none".to_string(), ToString::to_string),
            resolved_bins: t
                .bin_config
                .as_ref()
                .and_then(|b| b.resolve(dataset.label_count())),
            feature_sample_fraction: t.feature_sample_fraction,
            sampled_attributes: t.sampled_attribute_count(dataset.attribute_count()),
            instance_sampling: t.instance_sampling,
            folds: config.folds,
            seed: t.seed,
        },
        metrics: MetricsSection {
            mean: MeanMetrics {
                subset_zero_one: mean(results.iter().map(|r| r.subset_zero_one)),
                hamming: mean(results.iter().map(|r| r.hamming)),
            },
            per_fold: results,
        },
        timing: TimingSection {
            mean_total_train_seconds: mean(timings.iter().map(|t| t.total_train_seconds)),
            mean_candidate_eval_seconds: mean(timings.iter().map(|t| t.candidate_eval_seconds)),
            per_fold: timings,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldComparison {
    /// Training time of the first run divided by that of the second.
    pub speedup: Option<f64>,
    pub candidate_eval_speedup: Option<f64>,
    /// Second run minus first run, in percentage points.
    pub subset_zero_one_delta: f64,
    pub hamming_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub per_fold: Vec<FoldComparison>,
    /// Ratio of the mean training times.
    pub average_speedup: Option<f64>,
    pub average_candidate_eval_speedup: Option<f64>,
    pub subset_zero_one_delta: f64,
    pub hamming_delta: f64,
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

/// Compares two runs over the same dataset and folds.
pub fn compare_runs(a: &RunReport, b: &RunReport) -> Result<Comparison> {
    if a.dataset != b.dataset {
        return Err(Error::IncompatibleReports(format!(
            "datasets differ: {} ({}x{}) vs {} ({}x{})",
            a.dataset.name,
            a.dataset.examples,
            a.dataset.labels,
            b.dataset.name,
            b.dataset.examples,
            b.dataset.labels
        )));
    }
    if a.config.folds != b.config.folds
        || a.metrics.per_fold.len() != b.metrics.per_fold.len()
        || a.timing.per_fold.len() != a.metrics.per_fold.len()
        || b.timing.per_fold.len() != b.metrics.per_fold.len()
    {
        return Err(Error::IncompatibleReports(format!(
            "fold counts differ: {} vs {}",
            a.metrics.per_fold.len(),
            b.metrics.per_fold.len()
        )));
    }
    if a.config.seed != b.config.seed {
        return Err(Error::IncompatibleReports(format!(
            "fold seeds differ: {} vs {}",
            a.config.seed, b.config.seed
        )));
    }
    let per_fold = (0..a.metrics.per_fold.len())
        .map(|i| {
            let (ta, tb) = (&a.timing.per_fold[i], &b.timing.per_fold[i]);
            let (ma, mb) = (&a.metrics.per_fold[i], &b.metrics.per_fold[i]);
            FoldComparison {
                speedup: ratio(ta.total_train_seconds, tb.total_train_seconds),
                candidate_eval_speedup: ratio(ta.candidate_eval_seconds, tb.candidate_eval_seconds),
                subset_zero_one_delta: mb.subset_zero_one - ma.subset_zero_one,
                hamming_delta: mb.hamming - ma.hamming,
            }
        })
        .collect();
    Ok(Comparison {
        per_fold,
        average_speedup: ratio(
            a.timing.mean_total_train_seconds,
            b.timing.mean_total_train_seconds,
        ),
        average_candidate_eval_speedup: ratio(
            a.timing.mean_candidate_eval_seconds,
            b.timing.mean_candidate_eval_seconds,
        ),
        subset_zero_one_delta: b.metrics.mean.subset_zero_one - a.metrics.mean.subset_zero_one,
        hamming_delta: b.metrics.mean.hamming - a.metrics.mean.hamming,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Plain-text per-fold table of a run.
pub fn format_report(report: &RunReport) -> String {
    let mut out = String::new();
    let c = &report.config;
    let _ = writeln!(
        out,
        "dataset {} (N={}, A={}, L={}), rules {}, bins {}{}, folds {}, seed {}",
        report.dataset.name,
        report.dataset.examples,
        report.dataset.attributes,
        report.dataset.labels,
        c.rules,
        c.bins,
        c.resolved_bins
            .map_or(String::new(), |m| format!(" (m={m})")),
        c.folds,
        c.seed
    );
    let _ = writeln!(
        out,
        "{:>6} {:>10} {:>10} {:>12} {:>12} {:>8}",
        "fold", "subset0/1", "hamming", "train[s]", "eval[s]", "eval%"
    );
    for (i, (m, t)) in report
        .metrics
        .per_fold
        .iter()
        .zip(&report.timing.per_fold)
        .enumerate()
    {
        let share = ratio(100.0 * t.candidate_eval_seconds, t.total_train_seconds);
        let _ = writeln!(
            out,
            "{:>6} {:>10.2} {:>10.2} {:>12.2} {:>12.2} {:>8}",
            i + 1,
            m.subset_zero_one,
            m.hamming,
            t.total_train_seconds,
            t.candidate_eval_seconds,
            opt(share)
        );
    }
    let tm = &report.timing;
    let _ = writeln!(
        out,
        "{:>6} {:>10.2} {:>10.2} {:>12.2} {:>12.2} {:>8}",
        "mean",
        report.metrics.mean.subset_zero_one,
        report.metrics.mean.hamming,
        tm.mean_total_train_seconds,
        tm.mean_candidate_eval_seconds,
        opt(ratio(
            100.0 * tm.mean_candidate_eval_seconds,
            tm.mean_total_train_seconds
        ))
    );
    out
}

/// Plain-text per-fold table of a comparison.
pub fn format_comparison(comparison: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>6} {:>9} {:>11} {:>12} {:>12}",
        "fold", "speedup", "eval-speedup", "d subset0/1", "d hamming"
    );
    for (i, f) in comparison.per_fold.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>6} {:>9} {:>11} {:>12.2} {:>12.2}",
            i + 1,
            opt(f.speedup),
            opt(f.candidate_eval_speedup),
            f.subset_zero_one_delta,
            f.hamming_delta
        );
    }
    let _ = writeln!(
        out,
        "{:>6} {:>9} {:>11} {:>12.2} {:>12.2}",
        "mean",
        opt(comparison.average_speedup),
        opt(comparison.average_candidate_eval_speedup),
        comparison.subset_zero_one_delta,
        comparison.hamming_delta
    );
    out
}
