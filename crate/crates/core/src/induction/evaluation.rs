use std::time::{Duration, Instant};

use crate::binning::{
    aggregate_into, criteria_into, expand_head, map_to_bins, AggregatedStats, BinConfig, BinMapping,
};
use crate::error::{Error, Result};
use crate::linalg::{dot_unchecked, packed_index, spmv_into, PackedSymmetric, SymmetricSolver};
use crate::statistics::StatSum;

/// Optimal scores and quality of one candidate rule. Lower quality is better.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// One score per label, or one per non-empty bin when `mapping` is set.
    pub scores: Vec<f64>,
    pub quality: f64,
    pub mapping: Option<BinMapping>,
}

impl Evaluation {
    /// Scores expanded to one entry per label.
    pub fn head(&self) -> Result<Vec<f64>> {
        match &self.mapping {
            Some(mapping) => expand_head(mapping, &self.scores),
            None => Ok(self.scores.clone()),
        }
    }
}

/// Solves for the optimal scores of `stats` and scores the solution.
///
/// Without binning: `p = solve(H + lambda I, -g)` and quality
/// `p.g + p.Hp / 2`. With binning the same formulas apply to the aggregated
/// gradient and Hessian, regularized by `lambda * |B_k|` per bin.
pub fn evaluate_candidate(
    stats: &StatSum,
    l2_weight: f64,
    bin_config: Option<&BinConfig>,
) -> Result<Evaluation> {
    CandidateEvaluator::new(l2_weight, bin_config.cloned(), false).evaluate(stats)
}

/// Reusable candidate evaluation with scratch buffers and a timer around each call.
#[derive(Debug, Clone)]
pub struct CandidateEvaluator {
    l2_weight: f64,
    bin_config: Option<BinConfig>,
    diagonal: bool,
    solver: SymmetricSolver,
    criteria: Vec<f64>,
    compact: Vec<usize>,
    aggregated: AggregatedStats,
    solution: Vec<f64>,
    product: Vec<f64>,
    mapping: Option<BinMapping>,
    elapsed: Duration,
    evaluations: u64,
}

impl CandidateEvaluator {
    /// `diagonal` asserts every Hessian passed in is diagonal, which allows
    /// element-wise solves.
    pub fn new(l2_weight: f64, bin_config: Option<BinConfig>, diagonal: bool) -> Self {
        Self {
            l2_weight,
            bin_config,
            diagonal,
            solver: SymmetricSolver::new(),
            criteria: Vec::new(),
            compact: Vec::new(),
            aggregated: AggregatedStats {
                gradients: Vec::new(),
                hessians: PackedSymmetric::zeros(0),
                regularization: Vec::new(),
                bin_sizes: Vec::new(),
            },
            solution: Vec::new(),
            product: Vec::new(),
            mapping: None,
            elapsed: Duration::ZERO,
            evaluations: 0,
        }
    }

    pub fn bin_config(&self) -> Option<&BinConfig> {
        self.bin_config.as_ref()
    }

    /// Total time spent inside `quality` and `evaluate`.
    pub fn elapsed(&self) -> Duration {
        self.elapsed
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Quality of the optimal head for `stats`.
    pub fn quality(&mut self, stats: &StatSum) -> Result<f64> {
        let start = Instant::now();
        let result = self.compute(stats);
        self.elapsed += start.elapsed();
        self.evaluations += 1;
        result
    }

    pub fn evaluate(&mut self, stats: &StatSum) -> Result<Evaluation> {
        let quality = self.quality(stats)?;
        Ok(Evaluation {
            scores: self.solution.clone(),
            quality,
            mapping: self.mapping.clone(),
        })
    }

    fn compute(&mut self, stats: &StatSum) -> Result<f64> {
        let Some(config) = &self.bin_config else {
            self.mapping = None;
            let l2 = self.l2_weight;
            return solve_and_score(
                &mut self.solver,
                self.diagonal,
                &stats.sum_gradients,
                stats.sum_hessians.entries(),
                |_| l2,
                &mut self.solution,
                &mut self.product,
            );
        };
        let l = stats.label_count();
        self.criteria.resize(l, 0.0);
        criteria_into(stats, self.l2_weight, &mut self.criteria)?;
        let mapping = map_to_bins(&self.criteria, config);
        aggregate_into(
            &mapping,
            stats,
            self.l2_weight,
            &mut self.compact,
            &mut self.aggregated,
        )?;
        self.mapping = Some(mapping);
        let agg = &self.aggregated;
        solve_and_score(
            &mut self.solver,
            self.diagonal,
            &agg.gradients,
            agg.hessians.entries(),
            |k| agg.regularization[k],
            &mut self.solution,
            &mut self.product,
        )
    }
}

fn solve_and_score(
    solver: &mut SymmetricSolver,
    diagonal: bool,
    gradients: &[f64],
    hessians: &[f64],
    shift: impl Fn(usize) -> f64,
    solution: &mut Vec<f64>,
    product: &mut Vec<f64>,
) -> Result<f64> {
    let n = gradients.len();
    solution.clear();
    solution.extend(gradients.iter().map(|g| -g));
    product.clear();
    product.resize(n, 0.0);
    if diagonal {
        for k in 0..n {
            let h = hessians[packed_index(k, k)];
            let denominator = h + shift(k);
            if denominator == 0.0 || !denominator.is_finite() {
                return Err(Error::SingularSystem { pivot: k });
            }
            solution[k] /= denominator;
            product[k] = h * solution[k];
        }
    } else {
        solver.solve_shifted_in_place(n, hessians, shift, solution)?;
        spmv_into(n, hessians, solution, product);
    }
    Ok(dot_unchecked(solution, gradients) + 0.5 * dot_unchecked(solution, product))
}
