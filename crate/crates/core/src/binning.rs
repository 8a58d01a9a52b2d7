//! Gradient-based label binning.
//!
//! Each label gets a criterion `c_l = -g_l / (h_ll + lambda)`, the optimal
//! score for that label taken in isolation. Labels with negative and positive
//! criteria are distributed over separate groups of equal-width bins, and all
//! labels sharing a bin are constrained to receive the same score. Summing the
//! gradients, Hessian blocks and regularization over bins shrinks the linear
//! system from `L` unknowns to at most the number of bins.
//!
//! Labels with a zero criterion are left out of every bin and predicted as 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{packed_len, PackedSymmetric};
use crate::statistics::StatSum;

/// How many bins to use per candidate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinConfig {
    /// A fraction of the label count, rounded up, at least 1.
    Fraction(f64),
    /// An absolute number of bins.
    Count(usize),
    /// Every label with a non-zero criterion gets a bin of its own. Solves the
    /// unconstrained system through the binned code path.
    PerLabel,
}

impl BinConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BinConfig::Fraction(f) if !(f > 0.0 && f <= 1.0) => Err(Error::InvalidConfig(format!(
                "bin fraction must be in (0, 1], got {f}"
            ))),
            BinConfig::Count(0) => Err(Error::InvalidConfig("bin count must be at least 1".into())),
            _ => Ok(()),
        }
    }

    /// Total bin budget for `label_count` labels, or `None` for [`BinConfig::PerLabel`].
    pub fn resolve(&self, label_count: usize) -> Option<usize> {
        match *self {
            BinConfig::Fraction(f) => Some(((f * label_count as f64).ceil() as usize).max(1)),
            BinConfig::Count(n) => Some(n.max(1)),
            BinConfig::PerLabel => None,
        }
    }
}

impl fmt::Display for BinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinConfig::Fraction(x) => write!(f, "{x}"),
            BinConfig::Count(n) => write!(f, "{n}"),
            BinConfig::PerLabel => f.write_str("per-label"),
        }
    }
}

impl FromStr for BinConfig {
    type Err = Error;

    /// Accepts `per-label`, an integer count (`2`) or a fraction (`0.04`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let config = if s.eq_ignore_ascii_case("per-label") || s.eq_ignore_ascii_case("singleton") {
            BinConfig::PerLabel
        } else if let Ok(n) = s.parse::<usize>() {
            BinConfig::Count(n)
        } else if let Ok(f) = s.parse::<f64>() {
            BinConfig::Fraction(f)
        } else {
            return Err(Error::InvalidConfig(format!(
                "cannot parse bin setting {s:?}"
            )));
        };
        config.validate()?;
        Ok(config)
    }
}

/// Assignment of labels to bins.
///
/// Bins `0..negative_bins` hold labels with negative criteria, bins
/// `negative_bins..negative_bins + positive_bins` those with positive ones.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMapping {
    assignment: Vec<Option<usize>>,
    bins: Vec<Vec<usize>>,
    negative_bins: usize,
    positive_bins: usize,
}

impl BinMapping {
    fn from_assignment(
        assignment: Vec<Option<usize>>,
        negative_bins: usize,
        positive_bins: usize,
    ) -> Self {
        let mut bins = vec![Vec::new(); negative_bins + positive_bins];
        for (label, bin) in assignment.iter().enumerate() {
            if let Some(b) = bin {
                bins[*b].push(label);
            }
        }
        Self {
            assignment,
            bins,
            negative_bins,
            positive_bins,
        }
    }

    pub fn label_count(&self) -> usize {
        self.assignment.len()
    }

    /// 0-based bin of each label; `None` marks a label with zero criterion.
    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    /// All bins, including empty ones.
    pub fn bins(&self) -> &[Vec<usize>] {
        &self.bins
    }

    pub fn negative_bins(&self) -> usize {
        self.negative_bins
    }

    pub fn positive_bins(&self) -> usize {
        self.positive_bins
    }

    pub fn non_empty_bins(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.bins.iter().filter(|b| !b.is_empty())
    }

    pub fn non_empty_count(&self) -> usize {
        self.non_empty_bins().count()
    }

    /// Builds a mapping from explicit bins. Used to construct arbitrary
    /// groupings, e.g. in tests. Bins must be disjoint and in range.
    pub fn from_bins(
        label_count: usize,
        bins: Vec<Vec<usize>>,
        negative_bins: usize,
    ) -> Result<Self> {
        if negative_bins > bins.len() {
            return Err(Error::InvalidConfig("more negative bins than bins".into()));
        }
        let mut assignment = vec![None; label_count];
        for (b, labels) in bins.iter().enumerate() {
            for &l in labels {
                if l >= label_count {
                    return Err(Error::DimensionMismatch {
                        expected: label_count,
                        found: l + 1,
                    });
                }
                if assignment[l].replace(b).is_some() {
                    return Err(Error::InvalidConfig(format!("label {l} assigned twice")));
                }
            }
        }
        let positive_bins = bins.len() - negative_bins;
        Ok(Self {
            assignment,
            bins,
            negative_bins,
            positive_bins,
        })
    }
}

/// Per-label criteria `-g_l / (h_ll + lambda)` of a summed statistic.
pub fn criteria(sum: &StatSum, l2_weight: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; sum.label_count()];
    criteria_into(sum, l2_weight, &mut out)?;
    Ok(out)
}

pub(crate) fn criteria_into(sum: &StatSum, l2_weight: f64, out: &mut [f64]) -> Result<()> {
    for (l, c) in out.iter_mut().enumerate() {
        let g = sum.sum_gradients[l];
        if g == 0.0 {
            *c = 0.0;
            continue;
        }
        let denominator = sum.sum_hessians.diagonal(l) + l2_weight;
        if denominator == 0.0 {
            return Err(Error::DivisionByZero { label: l });
        }
        *c = -g / denominator;
    }
    Ok(())
}

/// Maps labels to equal-width bins under the given budget.
///
/// With both signs present the budget `m` (at least 2, since signs never share
/// a bin) is split proportionally: `m_neg = round(m * n_neg / (n_neg + n_pos))`
/// clamped to `[1, m - 1]`. Each side is further capped by its number of
/// distinct criterion values.
pub fn map_to_bins(criteria: &[f64], config: &BinConfig) -> BinMapping {
    let Some(budget) = config.resolve(criteria.len()) else {
        return map_to_singletons(criteria);
    };
    let n_neg = criteria.iter().filter(|&&c| c < 0.0).count();
    let n_pos = criteria.iter().filter(|&&c| c > 0.0).count();
    let (mut m_neg, mut m_pos) = match (n_neg, n_pos) {
        (0, 0) => (0, 0),
        (_, 0) => (budget, 0),
        (0, _) => (0, budget),
        _ => {
            let m = budget.max(2);
            let share = (m as f64 * n_neg as f64 / (n_neg + n_pos) as f64).round() as usize;
            let m_neg = share.clamp(1, m - 1);
            (m_neg, m - m_neg)
        }
    };
    m_neg = m_neg.min(distinct_up_to(
        criteria.iter().copied().filter(|&c| c < 0.0),
        m_neg,
    ));
    m_pos = m_pos.min(distinct_up_to(
        criteria.iter().copied().filter(|&c| c > 0.0),
        m_pos,
    ));
    map_to_bins_split(criteria, m_neg, m_pos)
}

/// Number of distinct values, counting stops at `limit`.
fn distinct_up_to(values: impl Iterator<Item = f64>, limit: usize) -> usize {
    let mut seen: Vec<f64> = Vec::with_capacity(limit);
    for v in values {
        if seen.len() >= limit {
            break;
        }
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    seen.len()
}

/// Equal-width mapping with explicit negative and positive bin counts.
///
/// A label with criterion `c < 0` goes to bin
/// `min(floor((c - min_neg) / w_neg) + 1, m_neg)` (1-based), a label with
/// `c > 0` to `min(floor((c - min_pos) / w_pos) + 1, m_pos) + m_neg`, where
/// `w = (max - min) / m` per sign. A zero width puts every label of that sign
/// in its first bin.
pub fn map_to_bins_split(
    criteria: &[f64],
    negative_bins: usize,
    positive_bins: usize,
) -> BinMapping {
    let range = |keep: fn(f64) -> bool| {
        criteria
            .iter()
            .copied()
            .filter(|&c| keep(c))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c), hi.max(c))
            })
    };
    let (min_neg, max_neg) = range(|c| c < 0.0);
    let (min_pos, max_pos) = range(|c| c > 0.0);
    let width_neg = (max_neg - min_neg) / negative_bins as f64;
    let width_pos = (max_pos - min_pos) / positive_bins as f64;

    let bin = |c: f64, min: f64, width: f64, count: usize| -> usize {
        if width > 0.0 {
            let raw = ((c - min) / width).floor() as usize + 1;
            raw.min(count) - 1
        } else {
            0
        }
    };

    let assignment = criteria
        .iter()
        .map(|&c| {
            if c < 0.0 {
                assert!(
                    negative_bins > 0,
                    "negative criterion without negative bins"
                );
                Some(bin(c, min_neg, width_neg, negative_bins))
            } else if c > 0.0 {
                assert!(
                    positive_bins > 0,
                    "positive criterion without positive bins"
                );
                Some(negative_bins + bin(c, min_pos, width_pos, positive_bins))
            } else {
                None
            }
        })
        .collect();
    BinMapping::from_assignment(assignment, negative_bins, positive_bins)
}

fn map_to_singletons(criteria: &[f64]) -> BinMapping {
    let mut negative: Vec<usize> = (0..criteria.len()).filter(|&l| criteria[l] < 0.0).collect();
    let mut positive: Vec<usize> = (0..criteria.len()).filter(|&l| criteria[l] > 0.0).collect();
    negative.sort_by(|&a, &b| criteria[a].total_cmp(&criteria[b]));
    positive.sort_by(|&a, &b| criteria[a].total_cmp(&criteria[b]));
    let mut assignment = vec![None; criteria.len()];
    for (bin, &label) in negative.iter().chain(&positive).enumerate() {
        assignment[label] = Some(bin);
    }
    BinMapping::from_assignment(assignment, negative.len(), positive.len())
}

/// Gradient, Hessian and regularization summed over the non-empty bins.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedStats {
    pub gradients: Vec<f64>,
    pub hessians: PackedSymmetric,
    /// Diagonal of the aggregated regularization matrix, `lambda * |B_k|`.
    pub regularization: Vec<f64>,
    pub bin_sizes: Vec<usize>,
}

impl AggregatedStats {
    pub fn order(&self) -> usize {
        self.gradients.len()
    }
}

/// Sums the statistics of each non-empty bin.
///
/// The aggregated Hessian entry of bins `k` and `q` is the sum of the whole
/// block `{h_rc : r in B_k, c in B_q}`. On the diagonal (`k == q`) this counts
/// each within-bin off-diagonal pair twice, which makes the reduced quadratic
/// exactly the full one with all labels of a bin tied to one score.
pub fn aggregate(mapping: &BinMapping, sum: &StatSum, l2_weight: f64) -> Result<AggregatedStats> {
    let mut out = AggregatedStats {
        gradients: Vec::new(),
        hessians: PackedSymmetric::zeros(0),
        regularization: Vec::new(),
        bin_sizes: Vec::new(),
    };
    let mut compact = Vec::new();
    aggregate_into(mapping, sum, l2_weight, &mut compact, &mut out)?;
    Ok(out)
}

pub(crate) fn aggregate_into(
    mapping: &BinMapping,
    sum: &StatSum,
    l2_weight: f64,
    compact: &mut Vec<usize>,
    out: &mut AggregatedStats,
) -> Result<()> {
    let l = sum.label_count();
    if mapping.label_count() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            found: mapping.label_count(),
        });
    }
    // bin index -> position among non-empty bins
    compact.clear();
    compact.resize(mapping.bins.len(), usize::MAX);
    out.bin_sizes.clear();
    for (b, labels) in mapping.bins.iter().enumerate() {
        if !labels.is_empty() {
            compact[b] = out.bin_sizes.len();
            out.bin_sizes.push(labels.len());
        }
    }
    let m = out.bin_sizes.len();
    out.gradients.clear();
    out.gradients.resize(m, 0.0);
    out.regularization.clear();
    out.regularization
        .extend(out.bin_sizes.iter().map(|&n| l2_weight * n as f64));
    if out.hessians.order() != m {
        out.hessians = PackedSymmetric::zeros(m);
    } else {
        out.hessians.entries_mut().iter_mut().for_each(|x| *x = 0.0);
    }

    let h = sum.sum_hessians.entries();
    let agg = out.hessians.entries_mut();
    let mut offset = 0;
    for r in 0..l {
        if let Some(br) = mapping.assignment[r] {
            let kr = compact[br];
            out.gradients[kr] += sum.sum_gradients[r];
            let row = &h[offset..offset + r + 1];
            for (c, &value) in row[..r].iter().enumerate() {
                if let Some(bc) = mapping.assignment[c] {
                    let kc = compact[bc];
                    if kr == kc {
                        agg[kr * (kr + 1) / 2 + kr] += 2.0 * value;
                    } else {
                        let (hi, lo) = if kr > kc { (kr, kc) } else { (kc, kr) };
                        agg[hi * (hi + 1) / 2 + lo] += value;
                    }
                }
            }
            agg[kr * (kr + 1) / 2 + kr] += row[r];
        }
        offset += r + 1;
    }
    debug_assert_eq!(agg.len(), packed_len(m));
    Ok(())
}

/// Expands one score per non-empty bin to one score per label.
pub fn expand_head(mapping: &BinMapping, bin_scores: &[f64]) -> Result<Vec<f64>> {
    let non_empty = mapping.non_empty_count();
    if bin_scores.len() != non_empty {
        return Err(Error::DimensionMismatch {
            expected: non_empty,
            found: bin_scores.len(),
        });
    }
    let mut out = vec![0.0; mapping.label_count()];
    for (labels, &score) in mapping.non_empty_bins().zip(bin_scores) {
        for &l in labels {
            out[l] = score;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one_based(m: &BinMapping) -> Vec<Option<usize>> {
        m.assignment().iter().map(|b| b.map(|x| x + 1)).collect()
    }

    #[test]
    fn criteria_examples() {
        let mut sum = StatSum::new(2);
        sum.sum_gradients = vec![-1.0 / 3.0, 0.0];
        sum.sum_hessians = PackedSymmetric::from_diagonal(&[2.0 / 9.0, 0.5]);
        let c = criteria(&sum, 1.0).unwrap();
        assert_abs_diff_eq!(c[0], 3.0 / 11.0, epsilon = 1e-15);
        assert_eq!(c[1], 0.0);
        let c = criteria(&sum, 1e12).unwrap();
        assert!(c.iter().all(|x| x.abs() <= 1e-10));
    }

    #[test]
    fn criteria_division_by_zero() {
        let mut sum = StatSum::new(1);
        sum.sum_gradients = vec![0.5];
        assert!(matches!(
            criteria(&sum, 0.0),
            Err(Error::DivisionByZero { label: 0 })
        ));
    }

    #[test]
    fn equal_width_example() {
        let m = map_to_bins_split(&[-3.0, -1.0, 0.5, 2.0, -2.0], 2, 2);
        assert_eq!(
            one_based(&m),
            vec![Some(1), Some(2), Some(3), Some(4), Some(2)]
        );
        // the proportional split gives the same result
        let m = map_to_bins(&[-3.0, -1.0, 0.5, 2.0, -2.0], &BinConfig::Count(4));
        assert_eq!(
            one_based(&m),
            vec![Some(1), Some(2), Some(3), Some(4), Some(2)]
        );
    }

    #[test]
    fn all_zero_criteria() {
        let m = map_to_bins(&[0.0; 4], &BinConfig::Count(3));
        assert!(m.assignment().iter().all(Option::is_none));
        assert_eq!(m.non_empty_count(), 0);
    }

    #[test]
    fn two_bins_separate_signs() {
        let m = map_to_bins(&[-0.7, 0.2], &BinConfig::Count(2));
        assert_eq!(one_based(&m), vec![Some(1), Some(2)]);
        // budget of one still cannot mix signs
        let m = map_to_bins(&[-0.7, 0.2, 0.3], &BinConfig::Count(1));
        assert_eq!(one_based(&m), vec![Some(1), Some(2), Some(2)]);
    }

    #[test]
    fn degenerate_width() {
        let m = map_to_bins_split(&[-1.0, -1.0, -1.0], 3, 0);
        assert_eq!(one_based(&m), vec![Some(1); 3]);
        // the distinct-value cap reduces to a single bin
        let m = map_to_bins(&[-1.0, -1.0, -1.0], &BinConfig::Count(3));
        assert_eq!(m.negative_bins(), 1);
    }

    #[test]
    fn fraction_resolution() {
        assert_eq!(BinConfig::Fraction(0.04).resolve(14), Some(1));
        assert_eq!(BinConfig::Fraction(0.32).resolve(14), Some(5));
        assert_eq!(BinConfig::Fraction(0.04).resolve(128), Some(6));
        assert_eq!(BinConfig::Count(2).resolve(100), Some(2));
        assert_eq!(BinConfig::PerLabel.resolve(5), None);
    }

    #[test]
    fn parse_bin_config() {
        assert_eq!(
            "0.04".parse::<BinConfig>().unwrap(),
            BinConfig::Fraction(0.04)
        );
        assert_eq!("2".parse::<BinConfig>().unwrap(), BinConfig::Count(2));
        assert_eq!(
            "per-label".parse::<BinConfig>().unwrap(),
            BinConfig::PerLabel
        );
        assert!("0".parse::<BinConfig>().is_err());
        assert!("1.5".parse::<BinConfig>().is_err());
        assert!("abc".parse::<BinConfig>().is_err());
    }

    #[test]
    fn singleton_mapping_orders_by_criterion() {
        let m = map_to_bins(&[0.3, -0.1, 0.0, -0.5, 0.1], &BinConfig::PerLabel);
        assert_eq!(
            one_based(&m),
            vec![Some(4), Some(2), None, Some(1), Some(3)]
        );
        assert_eq!(m.negative_bins(), 2);
        assert_eq!(m.positive_bins(), 2);
    }

    fn figure_bins() -> BinMapping {
        // B1 = {1, 2, 4}, B2 = {3, 5} in 1-based labels
        BinMapping::from_bins(5, vec![vec![0, 1, 3], vec![2, 4]], 1).unwrap()
    }

    fn symbolic_sum() -> StatSum {
        // distinct powers of two so every aggregated entry identifies its terms
        let mut sum = StatSum::new(5);
        sum.sum_gradients = vec![1.0, 2.0, 4.0, 8.0, 16.0];
        let entries = (0..15).map(|k| 2f64.powi(k)).collect();
        sum.sum_hessians = PackedSymmetric::from_packed(5, entries).unwrap();
        sum
    }

    #[test]
    fn figure_example_regularization() {
        let agg = aggregate(&figure_bins(), &symbolic_sum(), 1.0).unwrap();
        assert_eq!(agg.regularization, vec![3.0, 2.0]);
        assert_eq!(agg.bin_sizes, vec![3, 2]);
    }

    #[test]
    fn figure_example_entries() {
        let sum = symbolic_sum();
        let agg = aggregate(&figure_bins(), &sum, 1.0).unwrap();
        let g = &sum.sum_gradients;
        let h = |r: usize, c: usize| sum.sum_hessians.get(r - 1, c - 1);
        assert_eq!(agg.gradients[0], g[0] + g[1] + g[3]);
        assert_eq!(agg.gradients[1], g[2] + g[4]);
        let h12 = h(1, 3) + h(1, 5) + h(2, 3) + h(2, 5) + h(4, 3) + h(4, 5);
        assert_eq!(agg.hessians.get(0, 1), h12);
        let mut h11 = 0.0;
        for r in [1, 2, 4] {
            for c in [1, 2, 4] {
                h11 += h(r, c);
            }
        }
        assert_eq!(agg.hessians.get(0, 0), h11);
    }

    #[test]
    fn singleton_aggregation_is_identity() {
        let sum = symbolic_sum();
        let mapping = BinMapping::from_bins(5, (0..5).map(|l| vec![l]).collect(), 5).unwrap();
        let agg = aggregate(&mapping, &sum, 0.5).unwrap();
        assert_eq!(agg.gradients, sum.sum_gradients);
        assert_eq!(agg.hessians, sum.sum_hessians);
        assert_eq!(agg.regularization, vec![0.5; 5]);
    }

    #[test]
    fn aggregate_dimension_mismatch() {
        let mapping = BinMapping::from_bins(3, vec![vec![0, 1, 2]], 1).unwrap();
        assert!(matches!(
            aggregate(&mapping, &StatSum::new(4), 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn expand_examples() {
        let head = expand_head(&figure_bins(), &[1.5, -2.0]).unwrap();
        assert_eq!(head, vec![1.5, 1.5, -2.0, 1.5, -2.0]);
        let zero = map_to_bins(&[0.0, 0.0], &BinConfig::Count(2));
        assert_eq!(expand_head(&zero, &[]).unwrap(), vec![0.0, 0.0]);
        let single = map_to_bins(&[-0.2, 0.0, 0.4], &BinConfig::PerLabel);
        assert_eq!(
            expand_head(&single, &[7.0, 9.0]).unwrap(),
            vec![7.0, 0.0, 9.0]
        );
        assert!(expand_head(&figure_bins(), &[1.0]).is_err());
    }

    #[test]
    fn empty_bins_are_dropped() {
        // -1 and -0.1 with 3 negative bins leaves the middle one empty
        let m = map_to_bins_split(&[-1.0, -0.1], 3, 0);
        assert_eq!(m.bins().len(), 3);
        assert_eq!(m.non_empty_count(), 2);
        let mut sum = StatSum::new(2);
        sum.sum_gradients = vec![1.0, 0.1];
        sum.sum_hessians = PackedSymmetric::identity(2);
        let agg = aggregate(&m, &sum, 1.0).unwrap();
        assert_eq!(agg.order(), 2);
    }

    proptest! {
        #[test]
        fn mapping_invariants(
            crit in prop::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 1..40),
            budget in 1usize..12,
        ) {
            let m = map_to_bins(&crit, &BinConfig::Count(budget));
            let m_neg = m.negative_bins();
            for (l, &c) in crit.iter().enumerate() {
                match m.assignment()[l] {
                    None => prop_assert_eq!(c, 0.0),
                    Some(b) => {
                        prop_assert!(b < m_neg + m.positive_bins());
                        if c < 0.0 { prop_assert!(b < m_neg); } else { prop_assert!(b >= m_neg); }
                    }
                }
            }
            for r in 0..crit.len() {
                for s in 0..crit.len() {
                    let same_sign = (crit[r] < 0.0 && crit[s] < 0.0) || (crit[r] > 0.0 && crit[s] > 0.0);
                    if same_sign && crit[r] <= crit[s] {
                        prop_assert!(m.assignment()[r] <= m.assignment()[s]);
                    }
                }
            }
            // bins partition the non-zero labels
            let total: usize = m.bins().iter().map(Vec::len).sum();
            prop_assert_eq!(total, crit.iter().filter(|&&c| c != 0.0).count());
        }
    }
}
