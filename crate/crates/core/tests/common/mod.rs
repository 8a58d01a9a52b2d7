//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use gblb_core::{LossFunction, StatSum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `ln(1 + sum_l exp(-y_l f_l))`, evaluated directly.
pub fn example_wise_logistic(y: &[f64], f: &[f64]) -> f64 {
    (1.0 + y.iter().zip(f).map(|(y, f)| (-y * f).exp()).sum::<f64>()).ln()
}

/// `sum_l ln(1 + exp(-y_l f_l))`, evaluated directly.
pub fn label_wise_logistic(y: &[f64], f: &[f64]) -> f64 {
    y.iter()
        .zip(f)
        .map(|(y, f)| (1.0 + (-y * f).exp()).ln())
        .sum()
}

/// Central finite-difference gradient of `func` at `x`.
pub fn numeric_gradient(func: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += step;
            lo[i] -= step;
            (func(&hi) - func(&lo)) / (2.0 * step)
        })
        .collect()
}

/// Central finite-difference Jacobian of a vector function; row `i` holds the
/// derivatives of output `i`.
pub fn numeric_jacobian(func: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], step: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    for c in 0..n {
        let mut hi = x.to_vec();
        let mut lo = x.to_vec();
        hi[c] += step;
        lo[c] -= step;
        let (a, b) = (func(&hi), func(&lo));
        for r in 0..n {
            jac[r][c] = (a[r] - b[r]) / (2.0 * step);
        }
    }
    jac
}

/// Solves a dense linear system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        assert!(a[k][k] != 0.0, "singular oracle system");
        for i in k + 1..n {
            let factor = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= factor * a[k][j];
            }
            b[i] -= factor * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// Minimizes `g.p + p(H + lambda I)p / 2` over label scores `p` that are equal
/// within each bin and zero for labels outside every bin, by building the
/// label-to-bin indicator matrix explicitly. Returns label-level scores.
pub fn constrained_minimizer(
    g: &[f64],
    h: &[Vec<f64>],
    lambda: f64,
    bins: &[Vec<usize>],
) -> Vec<f64> {
    let l = g.len();
    let bins: Vec<&Vec<usize>> = bins.iter().filter(|b| !b.is_empty()).collect();
    let m = bins.len();
    let mut e = vec![vec![0.0; m]; l];
    for (k, bin) in bins.iter().enumerate() {
        for &label in bin.iter() {
            e[label][k] = 1.0;
        }
    }
    // reduced system E^T (H + lambda I) E q = -E^T g
    let mut a = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for p in 0..m {
        for r in 0..l {
            rhs[p] -= e[r][p] * g[r];
        }
        for q in 0..m {
            let mut s = 0.0;
            for r in 0..l {
                for c in 0..l {
                    let hv = h[r][c] + if r == c { lambda } else { 0.0 };
                    s += e[r][p] * hv * e[c][q];
                }
            }
            a[p][q] = s;
        }
    }
    let reduced = if m == 0 {
        Vec::new()
    } else {
        gauss_solve(a, rhs)
    };
    (0..l)
        .map(|r| (0..m).map(|k| e[r][k] * reduced[k]).sum())
        .collect()
}

/// Quality `p.g + p.Hp / 2` of label-level scores.
pub fn quality(g: &[f64], h: &[Vec<f64>], p: &[f64]) -> f64 {
    let l = g.len();
    let mut q: f64 = (0..l).map(|i| p[i] * g[i]).sum();
    for r in 0..l {
        for c in 0..l {
            q += 0.5 * p[r] * h[r][c] * p[c];
        }
    }
    q
}

/// Sum of example-wise logistic statistics at random scores.
pub fn random_statsum(rng: &mut ChaCha8Rng, labels: usize, examples: usize) -> StatSum {
    let mut sum = StatSum::new(labels);
    for _ in 0..examples {
        let y: Vec<f64> = (0..labels)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let f: Vec<f64> = (0..labels).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w = rng.random_range(1..4) as f64;
        sum.add_example(&LossFunction::ExampleWiseLogistic.example_stats(&y, &f), w)
            .unwrap();
    }
    sum
}

/// Budget split between negative and positive criteria: proportional,
/// at least one bin per present sign, at most the number of distinct values.
pub fn split_budget(criteria: &[f64], budget: usize) -> (usize, usize) {
    let neg: Vec<f64> = criteria.iter().copied().filter(|&c| c < 0.0).collect();
    let pos: Vec<f64> = criteria.iter().copied().filter(|&c| c > 0.0).collect();
    let distinct = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s.len()
    };
    let (m_neg, m_pos) = if neg.is_empty() && pos.is_empty() {
        (0, 0)
    } else if pos.is_empty() {
        (budget, 0)
    } else if neg.is_empty() {
        (0, budget)
    } else {
        let m = budget.max(2);
        let share = (m as f64 * neg.len() as f64 / (neg.len() + pos.len()) as f64).round() as usize;
        let m_neg = share.max(1).min(m - 1);
        (m_neg, m - m_neg)
    };
    (m_neg.min(distinct(&neg)), m_pos.min(distinct(&pos)))
}

/// Equal-width bin of every label (0-based), evaluated label by label from
/// the range of each sign. `None` for zero criteria.
pub fn equal_width_bins(criteria: &[f64], m_neg: usize, m_pos: usize) -> Vec<Option<usize>> {
    let mut min_neg = f64::INFINITY;
    let mut max_neg = f64::NEG_INFINITY;
    let mut min_pos = f64::INFINITY;
    let mut max_pos = f64::NEG_INFINITY;
    for &c in criteria {
        if c < 0.0 {
            min_neg = min_neg.min(c);
            max_neg = max_neg.max(c);
        } else if c > 0.0 {
            min_pos = min_pos.min(c);
            max_pos = max_pos.max(c);
        }
    }
    let w_neg = (max_neg - min_neg) / m_neg as f64;
    let w_pos = (max_pos - min_pos) / m_pos as f64;
    criteria
        .iter()
        .map(|&c| {
            if c < 0.0 {
                let k = if w_neg > 0.0 {
                    (((c - min_neg) / w_neg).floor() as usize + 1).min(m_neg)
                } else {
                    1
                };
                Some(k - 1)
            } else if c > 0.0 {
                let k = if w_pos > 0.0 {
                    (((c - min_pos) / w_pos).floor() as usize + 1).min(m_pos)
                } else {
                    1
                };
                Some(k - 1 + m_neg)
            } else {
                None
            }
        })
        .collect()
}

/// Relative difference with a floor on the magnitude.
pub fn relative_error(actual: f64, expected: f64, floor: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(actual.abs()).max(floor)
}
