use gblb_core::binning::BinConfig;
use gblb_core::dataset::synth_dataset;
use gblb_core::experiment::{
    compare_runs, format_report, run_experiment, ExperimentConfig, RunReport,
};
use gblb_core::induction::TrainConfig;

fn config(bins: Option<BinConfig>, folds: usize) -> ExperimentConfig {
    ExperimentConfig {
        train: TrainConfig {
            rule_count: 30,
            bin_config: bins,
            seed: 5,
            ..TrainConfig::default()
        },
        folds,
        threads: 2,
    }
}

#[test]
fn report_has_one_entry_per_fold() {
    let data = synth_dataset(150, 6, 14, 0.5, 3).unwrap();
    let report = run_experiment(&data, &config(Some(BinConfig::Fraction(0.04)), 3)).unwrap();
    assert_eq!(report.metrics.per_fold.len(), 3);
    assert_eq!(report.timing.per_fold.len(), 3);
    assert_eq!(report.config.bins, "0.04");
    assert_eq!(report.config.resolved_bins, Some(1));
    assert_eq!(
        report
            .metrics
            .per_fold
            .iter()
            .map(|r| r.example_count)
            .sum::<usize>(),
        150
    );
    for t in &report.timing.per_fold {
        assert!(t.candidate_eval_seconds <= t.total_train_seconds);
        assert!(t.candidate_evaluations > 0);
    }
    let mean = report
        .metrics
        .per_fold
        .iter()
        .map(|r| r.subset_zero_one)
        .sum::<f64>()
        / 3.0;
    assert!((report.metrics.mean.subset_zero_one - mean).abs() < 1e-12);
    assert!(format_report(&report).lines().count() >= 5);
}

#[test]
fn reports_round_trip_and_compare() {
    let data = synth_dataset(90, 4, 6, 0.5, 4).unwrap();
    let exact = run_experiment(&data, &config(None, 3)).unwrap();
    let binned = run_experiment(&data, &config(Some(BinConfig::Count(2)), 3)).unwrap();
    let back = RunReport::from_json(&exact.to_json().unwrap()).unwrap();
    assert_eq!(back, exact);
    let c = compare_runs(&exact, &binned).unwrap();
    assert_eq!(c.per_fold.len(), 3);
    let expected = exact.timing.mean_total_train_seconds / binned.timing.mean_total_train_seconds;
    assert_eq!(c.average_speedup, Some(expected));
    assert_eq!(
        c.subset_zero_one_delta,
        binned.metrics.mean.subset_zero_one - exact.metrics.mean.subset_zero_one
    );

    let other = run_experiment(&data, &config(None, 2)).unwrap();
    assert!(compare_runs(&exact, &other).is_err());
}

#[test]
fn single_fold_uses_all_examples() {
    let data = synth_dataset(60, 3, 2, 0.5, 6).unwrap();
    let report = run_experiment(&data, &config(None, 1)).unwrap();
    assert_eq!(report.metrics.per_fold.len(), 1);
    assert_eq!(report.metrics.per_fold[0].example_count, 60);
}
