//! Weighted sums of gradient vectors and Hessian matrices over covered examples.

use crate::error::{Error, Result};
use crate::linalg::{packed_len, PackedSymmetric};
use crate::loss::{ExampleStats, LossFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct StatSum {
    pub sum_gradients: Vec<f64>,
    pub sum_hessians: PackedSymmetric,
    pub covered_weight: f64,
}

impl StatSum {
    pub fn new(label_count: usize) -> Self {
        Self {
            sum_gradients: vec![0.0; label_count],
            sum_hessians: PackedSymmetric::zeros(label_count),
            covered_weight: 0.0,
        }
    }

    pub fn label_count(&self) -> usize {
        self.sum_gradients.len()
    }

    pub fn add_example(&mut self, stats: &ExampleStats, weight: f64) -> Result<()> {
        if stats.label_count() != self.label_count() {
            return Err(Error::DimensionMismatch {
                expected: self.label_count(),
                found: stats.label_count(),
            });
        }
        self.add_raw(&stats.gradients, stats.hessians.entries(), weight);
        Ok(())
    }

    /// Accumulates raw gradient and packed Hessian slices. Lengths are not checked
    /// beyond debug assertions.
    #[inline]
    pub fn add_raw(&mut self, gradients: &[f64], hessians: &[f64], weight: f64) {
        debug_assert_eq!(gradients.len(), self.sum_gradients.len());
        if weight == 0.0 {
            return;
        }
        axpy(weight, gradients, &mut self.sum_gradients);
        axpy(weight, hessians, self.sum_hessians.entries_mut());
        self.covered_weight += weight;
    }

    pub fn clear(&mut self) {
        self.sum_gradients.iter_mut().for_each(|x| *x = 0.0);
        self.sum_hessians
            .entries_mut()
            .iter_mut()
            .for_each(|x| *x = 0.0);
        self.covered_weight = 0.0;
    }

    /// `total - partial`, element-wise.
    pub fn subtract_from_total(total: &StatSum, partial: &StatSum) -> Result<StatSum> {
        let mut out = StatSum::new(total.label_count());
        out.assign_difference(total, partial)?;
        Ok(out)
    }

    /// Overwrites `self` with `total - partial` without reallocating.
    pub fn assign_difference(&mut self, total: &StatSum, partial: &StatSum) -> Result<()> {
        let l = total.label_count();
        if partial.label_count() != l || self.label_count() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: if partial.label_count() != l {
                    partial.label_count()
                } else {
                    self.label_count()
                },
            });
        }
        if partial.covered_weight > total.covered_weight {
            return Err(Error::NegativeWeight {
                partial: partial.covered_weight,
                total: total.covered_weight,
            });
        }
        for ((o, t), p) in self
            .sum_gradients
            .iter_mut()
            .zip(&total.sum_gradients)
            .zip(&partial.sum_gradients)
        {
            *o = t - p;
        }
        for ((o, t), p) in self
            .sum_hessians
            .entries_mut()
            .iter_mut()
            .zip(total.sum_hessians.entries())
            .zip(partial.sum_hessians.entries())
        {
            *o = t - p;
        }
        self.covered_weight = total.covered_weight - partial.covered_weight;
        Ok(())
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if alpha == 1.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += xi;
        }
    } else {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }
}

/// Row-major table of per-example gradients and packed Hessians.
#[derive(Debug, Clone)]
pub struct StatisticsTable {
    label_count: usize,
    gradients: Vec<f64>,
    hessians: Vec<f64>,
}

impl StatisticsTable {
    pub fn new(example_count: usize, label_count: usize) -> Self {
        Self {
            label_count,
            gradients: vec![0.0; example_count * label_count],
            hessians: vec![0.0; example_count * packed_len(label_count)],
        }
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn example_count(&self) -> usize {
        self.gradients.len().checked_div(self.label_count).unwrap_or(0)
    }

    #[inline]
    pub fn gradients(&self, example: usize) -> &[f64] {
        let l = self.label_count;
        &self.gradients[example * l..(example + 1) * l]
    }

    #[inline]
    pub fn hessians(&self, example: usize) -> &[f64] {
        let p = packed_len(self.label_count);
        &self.hessians[example * p..(example + 1) * p]
    }

    /// Recomputes the statistics of one example from its truth and current scores.
    pub fn update(&mut self, example: usize, loss: LossFunction, truth: &[f64], scores: &[f64]) {
        let l = self.label_count;
        let p = packed_len(l);
        loss.write_stats(
            truth,
            scores,
            &mut self.gradients[example * l..(example + 1) * l],
            &mut self.hessians[example * p..(example + 1) * p],
        );
    }

    #[inline]
    pub fn add_to(&self, sum: &mut StatSum, example: usize, weight: f64) {
        sum.add_raw(self.gradients(example), self.hessians(example), weight);
    }

    pub fn example_stats(&self, example: usize) -> ExampleStats {
        ExampleStats {
            gradients: self.gradients(example).to_vec(),
            hessians: PackedSymmetric::from_packed(
                self.label_count,
                self.hessians(example).to_vec(),
            )
            .expect("table rows have packed length"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stats(rng: &mut ChaCha8Rng, l: usize) -> ExampleStats {
        let y: Vec<f64> = (0..l)
            .map(|_| if rng.random_bool(0.4) { 1.0 } else { -1.0 })
            .collect();
        let f: Vec<f64> = (0..l).map(|_| rng.random_range(-2.0..2.0)).collect();
        LossFunction::ExampleWiseLogistic.example_stats(&y, &f)
    }

    fn max_diff(a: &StatSum, b: &StatSum) -> f64 {
        let g = a
            .sum_gradients
            .iter()
            .zip(&b.sum_gradients)
            .map(|(x, y)| (x - y).abs());
        let h = a
            .sum_hessians
            .entries()
            .iter()
            .zip(b.sum_hessians.entries())
            .map(|(x, y)| (x - y).abs());
        g.chain(h)
            .chain(std::iter::once((a.covered_weight - b.covered_weight).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn add_to_empty_equals_stats() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = random_stats(&mut rng, 4);
        let mut sum = StatSum::new(4);
        sum.add_example(&s, 1.0).unwrap();
        assert_eq!(sum.sum_gradients, s.gradients);
        assert_eq!(sum.sum_hessians, s.hessians);
        assert_eq!(sum.covered_weight, 1.0);
    }

    #[test]
    fn zero_weight_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sum = StatSum::new(3);
        sum.add_example(&random_stats(&mut rng, 3), 2.0).unwrap();
        let before = sum.clone();
        sum.add_example(&random_stats(&mut rng, 3), 0.0).unwrap();
        assert_eq!(sum, before);
    }

    #[test]
    fn two_examples_sum_element_wise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (random_stats(&mut rng, 3), random_stats(&mut rng, 3));
        let mut sum = StatSum::new(3);
        sum.add_example(&a, 1.0).unwrap();
        sum.add_example(&b, 3.0).unwrap();
        for i in 0..3 {
            assert_eq!(sum.sum_gradients[i], a.gradients[i] + 3.0 * b.gradients[i]);
        }
        for (k, h) in sum.sum_hessians.entries().iter().enumerate() {
            assert_eq!(*h, a.hessians.entries()[k] + 3.0 * b.hessians.entries()[k]);
        }
        assert_eq!(sum.covered_weight, 4.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sum = StatSum::new(2);
        assert!(matches!(
            sum.add_example(&random_stats(&mut rng, 3), 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn subtraction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut total = StatSum::new(3);
        for _ in 0..5 {
            total.add_example(&random_stats(&mut rng, 3), 1.0).unwrap();
        }
        let zero = StatSum::subtract_from_total(&total, &total).unwrap();
        assert_eq!(zero, StatSum::new(3));
        let same = StatSum::subtract_from_total(&total, &StatSum::new(3)).unwrap();
        assert_eq!(same, total);
    }

    #[test]
    fn negative_weight_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut small = StatSum::new(2);
        small.add_example(&random_stats(&mut rng, 2), 1.0).unwrap();
        let mut big = small.clone();
        big.add_example(&random_stats(&mut rng, 2), 1.0).unwrap();
        assert!(matches!(
            StatSum::subtract_from_total(&small, &big),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn table_rows_match_loss() {
        let y = [1.0, -1.0, 1.0];
        let f = [0.2, 0.1, -0.3];
        let mut table = StatisticsTable::new(2, 3);
        table.update(1, LossFunction::ExampleWiseLogistic, &y, &f);
        let direct = LossFunction::ExampleWiseLogistic.example_stats(&y, &f);
        assert_eq!(table.example_stats(1), direct);
        assert!(table.gradients(0).iter().all(|&g| g == 0.0));
        assert_eq!(table.example_count(), 2);
    }

    proptest! {
        #[test]
        fn difference_of_sums(seed in 0u64..10_000, l in 1usize..6, n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stats: Vec<_> = (0..n).map(|_| random_stats(&mut rng, l)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
            let split = rng.random_range(0..=n);
            let mut a = StatSum::new(l);
            let mut b = StatSum::new(l);
            let mut total = StatSum::new(l);
            for (i, (s, w)) in stats.iter().zip(&weights).enumerate() {
                if i < split { a.add_example(s, *w).unwrap(); } else { b.add_example(s, *w).unwrap(); }
                total.add_example(s, *w).unwrap();
            }
            let rest = StatSum::subtract_from_total(&total, &a).unwrap();
            prop_assert!(max_diff(&rest, &b) <= 1e-12);
            let mut rebuilt = a.clone();
            rebuilt.add_raw(&rest.sum_gradients, rest.sum_hessians.entries(), 1.0);
            rebuilt.covered_weight = a.covered_weight + rest.covered_weight;
            prop_assert!(max_diff(&rebuilt, &total) <= 1e-12);
        }

        #[test]
        fn accumulation_is_order_independent(seed in 0u64..10_000, l in 1usize..6, n in 1usize..15) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stats: Vec<_> = (0..n).map(|_| random_stats(&mut rng, l)).collect();
            let mut forward = StatSum::new(l);
            for s in &stats { forward.add_example(s, 1.0).unwrap(); }
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() { order.swap(i, rng.random_range(0..=i)); }
            let mut shuffled = StatSum::new(l);
            for &i in &order { shuffled.add_example(&stats[i], 1.0).unwrap(); }
            prop_assert!(max_diff(&forward, &shuffled) <= 1e-12);
        }
    }
}
