//! Top-down greedy search for a rule body.

use std::cmp::Ordering;

use super::evaluation::{CandidateEvaluator, Evaluation};
use crate::binning::BinMapping;
use crate::dataset::DatasetView;
use crate::error::{Error, Result};
use crate::rules::{Condition, Operator};
use crate::statistics::{StatSum, StatisticsTable};

/// Quality differences at or below this are ties.
pub const TIE_EPSILON: f64 = 1e-12;

/// A refinement of the current rule, evaluated on the statistics it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub condition: Condition,
    pub stats: StatSum,
    pub scores: Vec<f64>,
    pub quality: f64,
    pub mapping: Option<BinMapping>,
}

/// Local example indices of a view sorted by each attribute's value.
#[derive(Debug, Clone)]
pub struct SortedAttributes {
    orders: Vec<Vec<u32>>,
}

impl SortedAttributes {
    pub fn new(view: &DatasetView<'_>) -> Self {
        let orders = (0..view.attribute_count())
            .map(|a| {
                let mut order: Vec<u32> = (0..view.len() as u32).collect();
                order.sort_by(|&i, &j| {
                    view.value(i as usize, a)
                        .total_cmp(&view.value(j as usize, a))
                });
                order
            })
            .collect();
        Self { orders }
    }

    pub fn order(&self, attribute: usize) -> &[u32] {
        &self.orders[attribute]
    }
}

/// Result of growing one rule body.
#[derive(Debug, Clone)]
pub(crate) struct Grown {
    pub body: Vec<Condition>,
    pub evaluation: Evaluation,
    /// Local examples covered by `body`, regardless of weight.
    pub covered: Vec<bool>,
    /// Whether the first step found any candidate condition at all.
    pub had_candidates: bool,
}

/// Immutable inputs of one rule search.
pub(crate) struct RuleSearch<'a> {
    pub view: &'a DatasetView<'a>,
    pub sorted: &'a SortedAttributes,
    pub table: &'a StatisticsTable,
    pub weights: &'a [f64],
    pub attributes: &'a [usize],
}

fn candidate_order(a: &Condition, b: &Condition) -> Ordering {
    a.attribute
        .cmp(&b.attribute)
        .then(a.operator.cmp(&b.operator))
        .then(a.value.total_cmp(&b.value))
}

struct Best {
    condition: Condition,
    stats: StatSum,
    quality: f64,
}

impl RuleSearch<'_> {
    fn weighted_total(&self, covered: &[bool]) -> StatSum {
        let mut total = StatSum::new(self.table.label_count());
        for (i, (&w, &c)) in self.weights.iter().zip(covered).enumerate() {
            if c {
                self.table.add_to(&mut total, i, w);
            }
        }
        total
    }

    /// Calls `visit` with every candidate condition on `attribute` and the
    /// statistics of the examples it keeps, given the current coverage.
    pub fn scan_attribute(
        &self,
        attribute: usize,
        covered: &[bool],
        total: &StatSum,
        partial: &mut StatSum,
        complement: &mut StatSum,
        mut visit: impl FnMut(Condition, &StatSum) -> Result<()>,
    ) -> Result<()> {
        let nominal = self.view.dataset().attributes()[attribute].is_nominal();
        let active = self
            .sorted
            .order(attribute)
            .iter()
            .map(|&i| i as usize)
            .filter(|&i| covered[i] && self.weights[i] > 0.0);
        partial.clear();
        let mut previous: Option<f64> = None;
        if nominal {
            let mut groups = 0;
            let mut flush =
                |value: f64, partial: &StatSum, complement: &mut StatSum| -> Result<()> {
                    complement.assign_difference(total, partial)?;
                    if complement.covered_weight > 0.0 {
                        visit(Condition::new(attribute, Operator::Eq, value), partial)?;
                        visit(Condition::new(attribute, Operator::Neq, value), complement)?;
                    }
                    Ok(())
                };
            for i in active {
                let v = self.view.value(i, attribute);
                if let Some(p) = previous {
                    if v != p {
                        flush(p, partial, complement)?;
                        partial.clear();
                        groups += 1;
                    }
                }
                self.table.add_to(partial, i, self.weights[i]);
                previous = Some(v);
            }
            // a single group covers everything and refines nothing
            if let (Some(p), true) = (previous, groups > 0) {
                flush(p, partial, complement)?;
            }
        } else {
            for i in active {
                let v = self.view.value(i, attribute);
                if let Some(p) = previous {
                    if v > p {
                        let threshold = midpoint(p, v);
                        complement.assign_difference(total, partial)?;
                        visit(Condition::new(attribute, Operator::Leq, threshold), partial)?;
                        visit(
                            Condition::new(attribute, Operator::Gt, threshold),
                            complement,
                        )?;
                    }
                }
                self.table.add_to(partial, i, self.weights[i]);
                previous = Some(v);
            }
        }
        Ok(())
    }

    /// Lowest-quality condition over the sampled attributes, ties broken by
    /// attribute, operator and threshold.
    fn best_refinement(
        &self,
        covered: &[bool],
        total: &StatSum,
        buffers: &mut (StatSum, StatSum),
        evaluator: &mut CandidateEvaluator,
        had_candidates: &mut bool,
    ) -> Result<Option<Best>> {
        let mut best: Option<Best> = None;
        let (partial, complement) = buffers;
        for &attribute in self.attributes {
            self.scan_attribute(
                attribute,
                covered,
                total,
                partial,
                complement,
                |condition, stats| {
                    *had_candidates = true;
                    let q = evaluator.quality(stats)?;
                    match &mut best {
                        None => {
                            best = Some(Best {
                                condition,
                                stats: stats.clone(),
                                quality: q,
                            })
                        }
                        Some(b) => {
                            let better = q < b.quality - TIE_EPSILON
                                || (q <= b.quality + TIE_EPSILON
                                    && candidate_order(&condition, &b.condition) == Ordering::Less);
                            if better {
                                b.condition = condition;
                                b.stats.clone_from(stats);
                                b.quality = q;
                            }
                        }
                    }
                    Ok(())
                },
            )?;
        }
        Ok(best)
    }

    /// Greedily adds the best condition while it improves quality by more
    /// than [`TIE_EPSILON`].
    pub fn grow(&self, evaluator: &mut CandidateEvaluator) -> Result<Grown> {
        let l = self.table.label_count();
        let mut covered = vec![true; self.view.len()];
        let mut body = Vec::new();
        let mut total = self.weighted_total(&covered);
        let initial = evaluator.evaluate(&total)?;
        let mut quality = initial.quality;
        let mut buffers = (StatSum::new(l), StatSum::new(l));
        let mut had_candidates = false;

        while let Some(b) = self.best_refinement(
            &covered,
            &total,
            &mut buffers,
            evaluator,
            &mut had_candidates,
        )? {
            if b.quality >= quality - TIE_EPSILON {
                break;
            }
            let column = b.condition.attribute;
            for (i, c) in covered.iter_mut().enumerate() {
                *c = *c && b.condition.holds(self.view.value(i, column));
            }
            body.push(b.condition);
            total = b.stats;
            quality = b.quality;
        }

        let evaluation = if body.is_empty() {
            initial
        } else {
            evaluator.evaluate(&total)?
        };
        Ok(Grown {
            body,
            evaluation,
            covered,
            had_candidates,
        })
    }

    /// The best single condition for the empty body, whether or not it improves on it.
    pub fn best_candidate(&self, evaluator: &mut CandidateEvaluator) -> Result<Option<Candidate>> {
        let l = self.table.label_count();
        let covered = vec![true; self.view.len()];
        let total = self.weighted_total(&covered);
        let mut buffers = (StatSum::new(l), StatSum::new(l));
        let Some(best) =
            self.best_refinement(&covered, &total, &mut buffers, evaluator, &mut false)?
        else {
            return Ok(None);
        };
        let evaluation = evaluator.evaluate(&best.stats)?;
        Ok(Some(Candidate {
            condition: best.condition,
            stats: best.stats,
            scores: evaluation.scores,
            quality: evaluation.quality,
            mapping: evaluation.mapping,
        }))
    }
}

/// Threshold strictly between `low` and `high` (`low < high`) that keeps
/// `low` on the `<=` side and `high` on the `>` side.
fn midpoint(low: f64, high: f64) -> f64 {
    let span = high - low;
    let mid = if span.is_finite() {
        low + span / 2.0
    } else {
        low / 2.0 + high / 2.0
    };
    if mid >= high {
        low
    } else {
        mid
    }
}

/// Degenerate-data check used by the public entry point.
pub(crate) fn degenerate(grown: &Grown) -> Result<()> {
    if grown.had_candidates {
        Ok(())
    } else {
        Err(Error::DegenerateData)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_dataset, Attribute, Dataset, LabelMatrix};
    use crate::loss::LossFunction;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table_for(view: &DatasetView<'_>, scores: &[f64]) -> StatisticsTable {
        let l = view.label_count();
        let mut t = StatisticsTable::new(view.len(), l);
        for i in 0..view.len() {
            t.update(
                i,
                LossFunction::ExampleWiseLogistic,
                view.truth(i),
                &scores[i * l..(i + 1) * l],
            );
        }
        t
    }

    #[test]
    fn midpoint_stays_between_neighbours() {
        assert_eq!(midpoint(1.0, 2.0), 1.5);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = midpoint(a, b);
        assert!(a <= t && t < b);
        assert_eq!(midpoint(-f64::MAX, f64::MAX), 0.0);
    }

    #[test]
    fn incremental_sums_match_batch_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut d = synth_dataset(60, 3, 4, 0.4, 3).unwrap();
        // a nominal column with repeated values
        let cats: Vec<f64> = (0..60).map(|_| rng.random_range(0..3) as f64).collect();
        let mut attributes = d.attributes().to_vec();
        attributes.push(Attribute::nominal(
            "c",
            vec!["a".into(), "b".into(), "c".into()],
        ));
        let mut columns: Vec<Vec<f64>> = (0..3).map(|a| d.column(a).to_vec()).collect();
        columns.push(cats);
        d = Dataset::new(
            "t",
            attributes,
            columns,
            d.labels().clone(),
            d.label_names().to_vec(),
        )
        .unwrap();
        let view = d.view();
        let scores: Vec<f64> = (0..60 * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let table = table_for(&view, &scores);
        let weights: Vec<f64> = (0..60).map(|_| rng.random_range(0..3) as f64).collect();
        let covered: Vec<bool> = (0..60).map(|_| rng.random_bool(0.7)).collect();
        let sorted = SortedAttributes::new(&view);
        let attributes = [0, 1, 2, 3];
        let search = RuleSearch {
            view: &view,
            sorted: &sorted,
            table: &table,
            weights: &weights,
            attributes: &attributes,
        };
        let total = search.weighted_total(&covered);
        let (mut p, mut c) = (StatSum::new(4), StatSum::new(4));
        let mut checked = 0;
        for a in attributes {
            search
                .scan_attribute(a, &covered, &total, &mut p, &mut c, |condition, stats| {
                    let keep: Vec<bool> = (0..60)
                        .map(|i| covered[i] && condition.holds(view.value(i, a)))
                        .collect();
                    let batch = search.weighted_total(&keep);
                    for (x, y) in stats.sum_gradients.iter().zip(&batch.sum_gradients) {
                        assert_abs_diff_eq!(x, y, epsilon = 1e-9);
                    }
                    for (x, y) in stats
                        .sum_hessians
                        .entries()
                        .iter()
                        .zip(batch.sum_hessians.entries())
                    {
                        assert_abs_diff_eq!(x, y, epsilon = 1e-9);
                    }
                    assert_abs_diff_eq!(stats.covered_weight, batch.covered_weight, epsilon = 1e-9);
                    checked += 1;
                    Ok(())
                })
                .unwrap();
        }
        assert!(checked > 50);
    }

    #[test]
    fn constant_attributes_yield_no_candidates() {
        let labels = LabelMatrix::from_binary(&[vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let d = Dataset::new(
            "c",
            vec![Attribute::numerical("x")],
            vec![vec![2.0; 3]],
            labels,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let view = d.view();
        let table = table_for(&view, &[0.0; 6]);
        let sorted = SortedAttributes::new(&view);
        let search = RuleSearch {
            view: &view,
            sorted: &sorted,
            table: &table,
            weights: &[1.0; 3],
            attributes: &[0],
        };
        let mut evaluator = CandidateEvaluator::new(1.0, None, false);
        let grown = search.grow(&mut evaluator).unwrap();
        assert!(grown.body.is_empty());
        assert!(matches!(degenerate(&grown), Err(Error::DegenerateData)));
        assert!(search.best_candidate(&mut evaluator).unwrap().is_none());
    }

    #[test]
    fn tie_order() {
        let c = |a, op, v| Condition::new(a, op, v);
        assert_eq!(
            candidate_order(&c(0, Operator::Gt, 0.0), &c(1, Operator::Leq, 0.0)),
            Ordering::Less
        );
        assert_eq!(
            candidate_order(&c(0, Operator::Leq, 5.0), &c(0, Operator::Gt, 1.0)),
            Ordering::Less
        );
        assert_eq!(
            candidate_order(&c(0, Operator::Leq, 1.0), &c(0, Operator::Leq, 5.0)),
            Ordering::Less
        );
    }
}
