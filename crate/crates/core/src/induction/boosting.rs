use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::evaluation::CandidateEvaluator;
use super::refinement::{degenerate, Candidate, RuleSearch, SortedAttributes};
use crate::binning::BinConfig;
use crate::dataset::DatasetView;
use crate::error::{Error, Result};
use crate::loss::LossFunction;
use crate::rules::{Ensemble, Rule};
use crate::statistics::StatisticsTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossFunction,
    pub rule_count: usize,
    pub shrinkage: f64,
    pub l2_weight: f64,
    /// `None` solves every candidate exactly.
    pub bin_config: Option<BinConfig>,
    /// Fraction of attributes drawn per rule; `None` draws `ceil(sqrt(A))`.
    pub feature_sample_fraction: Option<f64>,
    pub instance_sampling: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossFunction::default(),
            rule_count: 5000,
            shrinkage: 0.3,
            l2_weight: 1.0,
            bin_config: None,
            feature_sample_fraction: None,
            instance_sampling: true,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rule_count == 0 {
            return Err(Error::InvalidConfig("rule count must be positive".into()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "shrinkage must be in (0, 1], got {}",
                self.shrinkage
            )));
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "L2 weight must be a finite non-negative number, got {}",
                self.l2_weight
            )));
        }
        if let Some(f) = self.feature_sample_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "feature sample fraction must be in (0, 1], got {f}"
                )));
            }
        }
        if let Some(bins) = &self.bin_config {
            bins.validate()?;
        }
        Ok(())
    }

    /// Attributes drawn per rule out of `attribute_count`.
    pub fn sampled_attribute_count(&self, attribute_count: usize) -> usize {
        let n = attribute_count as f64;
        let k = match self.feature_sample_fraction {
            Some(f) => (f * n).ceil(),
            None => n.sqrt().ceil(),
        };
        (k as usize).clamp(1, attribute_count.max(1))
    }
}

/// Wall-clock time of one training run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTiming {
    pub total_seconds: f64,
    /// Time spent inside candidate evaluation only.
    pub candidate_eval_seconds: f64,
    pub candidate_evaluations: u64,
}

/// Boosting state over one training view.
struct Booster<'a> {
    view: &'a DatasetView<'a>,
    config: &'a TrainConfig,
    label_count: usize,
    scores: Vec<f64>,
    table: StatisticsTable,
}

impl<'a> Booster<'a> {
    fn new(view: &'a DatasetView<'a>, config: &'a TrainConfig) -> Self {
        let l = view.label_count();
        let mut booster = Self {
            view,
            config,
            label_count: l,
            scores: vec![0.0; view.len() * l],
            table: StatisticsTable::new(view.len(), l),
        };
        for i in 0..view.len() {
            booster.refresh(i);
        }
        booster
    }

    fn refresh(&mut self, i: usize) {
        let l = self.label_count;
        self.table.update(
            i,
            self.config.loss,
            self.view.truth(i),
            &self.scores[i * l..(i + 1) * l],
        );
    }

    /// Adds `head` to every covered example and recomputes its statistics.
    fn apply(&mut self, head: &[f64], covered: &[bool]) {
        let l = self.label_count;
        for i in 0..self.view.len() {
            if covered[i] {
                for (s, h) in self.scores[i * l..(i + 1) * l].iter_mut().zip(head) {
                    *s += h;
                }
                self.refresh(i);
            }
        }
    }
}

fn shrink(head: Vec<f64>, shrinkage: f64) -> Vec<f64> {
    head.into_iter().map(|x| x * shrinkage).collect()
}

fn bootstrap(rng: &mut ChaCha8Rng, n: usize, weights: &mut [f64]) {
    weights.iter_mut().for_each(|w| *w = 0.0);
    for _ in 0..n {
        weights[rng.random_range(0..n)] += 1.0;
    }
}

/// Learns an ensemble of `rule_count` rules, the first being the default rule.
pub fn train(view: &DatasetView<'_>, config: &TrainConfig) -> Result<(Ensemble, TrainTiming)> {
    config.validate()?;
    if view.is_empty() || view.label_count() == 0 {
        return Err(Error::DegenerateData);
    }
    let start = Instant::now();
    let n = view.len();
    let l = view.label_count();
    let diagonal = config.loss.is_decomposable();
    let mut booster = Booster::new(view, config);
    let sorted = SortedAttributes::new(view);
    let mut ensemble = Ensemble::new(l);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // the default rule is solved once and exactly
    let mut exact = CandidateEvaluator::new(config.l2_weight, None, diagonal);
    let everything = vec![true; n];
    let ones = vec![1.0; n];
    let default_rule = RuleSearch {
        view,
        sorted: &sorted,
        table: &booster.table,
        weights: &ones,
        attributes: &[],
    }
    .grow(&mut exact)?;
    let head = shrink(default_rule.evaluation.head()?, config.shrinkage);
    booster.apply(&head, &everything);
    ensemble.push(Rule::new(Vec::new(), head))?;

    let mut evaluator =
        CandidateEvaluator::new(config.l2_weight, config.bin_config, diagonal);
    let mut weights = vec![1.0; n];
    let sample_size = config.sampled_attribute_count(view.attribute_count());
    let mut attributes = Vec::with_capacity(sample_size);
    for _ in 1..config.rule_count {
        if config.instance_sampling {
            bootstrap(&mut rng, n, &mut weights);
        }
        attributes.clear();
        attributes.extend(sample(&mut rng, view.attribute_count(), sample_size).iter());
        attributes.sort_unstable();
        let grown = RuleSearch {
            view,
            sorted: &sorted,
            table: &booster.table,
            weights: &weights,
            attributes: &attributes,
        }
        .grow(&mut evaluator)?;
        let head = shrink(grown.evaluation.head()?, config.shrinkage);
        booster.apply(&head, &grown.covered);
        ensemble.push(Rule::new(grown.body, head))?;
    }

    let timing = TrainTiming {
        total_seconds: start.elapsed().as_secs_f64(),
        candidate_eval_seconds: (exact.elapsed() + evaluator.elapsed()).as_secs_f64(),
        candidate_evaluations: exact.evaluations() + evaluator.evaluations(),
    };
    Ok((ensemble, timing))
}

/// Runs `f` on a rule search over `view` with statistics computed from the
/// given scores (row-major, one row per view example), unit weights and the
/// attribute sample drawn from `config.seed`.
fn with_search<T>(
    view: &DatasetView<'_>,
    scores: &[f64],
    config: &TrainConfig,
    f: impl FnOnce(&RuleSearch<'_>, &mut CandidateEvaluator) -> Result<T>,
) -> Result<T> {
    config.validate()?;
    let l = view.label_count();
    if view.is_empty() || scores.len() != view.len() * l {
        return Err(Error::DimensionMismatch {
            expected: view.len() * l,
            found: scores.len(),
        });
    }
    let mut table = StatisticsTable::new(view.len(), l);
    for i in 0..view.len() {
        table.update(i, config.loss, view.truth(i), &scores[i * l..(i + 1) * l]);
    }
    let sorted = SortedAttributes::new(view);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut attributes: Vec<usize> = sample(
        &mut rng,
        view.attribute_count(),
        config.sampled_attribute_count(view.attribute_count()),
    )
    .into_vec();
    attributes.sort_unstable();
    let weights = vec![1.0; view.len()];
    let mut evaluator = CandidateEvaluator::new(
        config.l2_weight,
        config.bin_config,
        config.loss.is_decomposable(),
    );
    let search = RuleSearch {
        view,
        sorted: &sorted,
        table: &table,
        weights: &weights,
        attributes: &attributes,
    };
    f(&search, &mut evaluator)
}

/// Grows a single rule for the given scores. The head is shrunk.
///
/// Returns [`Error::DegenerateData`] if no sampled attribute offers any
/// condition.
pub fn refine_rule(view: &DatasetView<'_>, scores: &[f64], config: &TrainConfig) -> Result<Rule> {
    with_search(view, scores, config, |search, evaluator| {
        let grown = search.grow(evaluator)?;
        degenerate(&grown)?;
        Ok(Rule::new(
            grown.body,
            shrink(grown.evaluation.head()?, config.shrinkage),
        ))
    })
}

/// The best single condition for the given scores, with its unshrunk scores.
pub fn best_refinement(
    view: &DatasetView<'_>,
    scores: &[f64],
    config: &TrainConfig,
) -> Result<Option<Candidate>> {
    with_search(view, scores, config, |search, evaluator| {
        search.best_candidate(evaluator)
    })
}
