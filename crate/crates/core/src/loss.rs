//! Logistic surrogate losses and their first and second derivatives.
//!
//! Labels are encoded as `-1.0` (irrelevant) and `+1.0` (relevant); scores are
//! the raw ensemble outputs for one example.

use serde::{Deserialize, Serialize};

use crate::linalg::{packed_index, packed_len, PackedSymmetric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFunction {
    /// `log(1 + sum_l exp(-y_l f_l))`, couples all labels of an example.
    #[default]
    ExampleWiseLogistic,
    /// `sum_l log(1 + exp(-y_l f_l))`, one independent term per label.
    LabelWiseLogistic,
}

impl LossFunction {
    pub fn is_decomposable(self) -> bool {
        matches!(self, LossFunction::LabelWiseLogistic)
    }

    pub fn value(self, truth: &[f64], scores: &[f64]) -> f64 {
        assert_eq!(truth.len(), scores.len());
        match self {
            LossFunction::ExampleWiseLogistic => {
                // log(1 + sum exp(z)) = m + log(exp(-m) + sum exp(z - m))
                let max = truth
                    .iter()
                    .zip(scores)
                    .map(|(y, f)| -y * f)
                    .fold(0.0f64, f64::max);
                let sum: f64 = truth
                    .iter()
                    .zip(scores)
                    .map(|(y, f)| (-y * f - max).exp())
                    .sum();
                max + ((-max).exp() + sum).ln()
            }
            LossFunction::LabelWiseLogistic => truth
                .iter()
                .zip(scores)
                .map(|(y, f)| softplus(-y * f))
                .sum(),
        }
    }

    /// Gradient and Hessian of [`value`](Self::value) at `scores`.
    pub fn example_stats(self, truth: &[f64], scores: &[f64]) -> ExampleStats {
        let l = truth.len();
        let mut stats = ExampleStats {
            gradients: vec![0.0; l],
            hessians: PackedSymmetric::zeros(l),
        };
        self.write_stats(
            truth,
            scores,
            &mut stats.gradients,
            stats.hessians.entries_mut(),
        );
        stats
    }

    /// Writes the gradient (length L) and packed Hessian (length L(L+1)/2)
    /// into caller-provided buffers.
    pub fn write_stats(
        self,
        truth: &[f64],
        scores: &[f64],
        gradients: &mut [f64],
        hessians: &mut [f64],
    ) {
        let l = truth.len();
        assert_eq!(scores.len(), l);
        assert_eq!(gradients.len(), l);
        assert_eq!(hessians.len(), packed_len(l));
        match self {
            LossFunction::ExampleWiseLogistic => {
                let max = truth
                    .iter()
                    .zip(scores)
                    .map(|(y, f)| -y * f)
                    .fold(0.0f64, f64::max);
                // p_l = exp(z_l) / (1 + sum exp(z)), z_l = -y_l f_l
                let mut total = (-max).exp();
                for ((g, y), f) in gradients.iter_mut().zip(truth).zip(scores) {
                    let e = (-y * f - max).exp();
                    *g = e;
                    total += e;
                }
                for g in gradients.iter_mut() {
                    *g /= total;
                }
                // h_rc = y_r y_c p_r (delta_rc - p_c), then g_r = -y_r p_r
                let mut offset = 0;
                for r in 0..l {
                    let pr = gradients[r];
                    for c in 0..r {
                        hessians[offset + c] = -truth[r] * truth[c] * pr * gradients[c];
                    }
                    hessians[offset + r] = pr * (1.0 - pr);
                    offset += r + 1;
                }
                for (g, y) in gradients.iter_mut().zip(truth) {
                    *g *= -y;
                }
            }
            LossFunction::LabelWiseLogistic => {
                hessians.iter_mut().for_each(|h| *h = 0.0);
                for r in 0..l {
                    let p = sigmoid(-truth[r] * scores[r]);
                    gradients[r] = -truth[r] * p;
                    hessians[packed_index(r, r)] = p * (1.0 - p);
                }
            }
        }
    }
}

/// Per-example gradient vector and Hessian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleStats {
    pub gradients: Vec<f64>,
    pub hessians: PackedSymmetric,
}

impl ExampleStats {
    pub fn label_count(&self) -> usize {
        self.gradients.len()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
