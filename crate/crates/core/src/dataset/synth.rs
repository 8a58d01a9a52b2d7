use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Attribute, Dataset, LabelMatrix};
use crate::error::{Error, Result};

/// Reproducible synthetic multi-label data.
///
/// Features are uniform on `[0, 1)`. Label `l` is relevant when
/// `corr * s(x) + (1 - corr) * s_l(x) > 0`, where `s` is a shared random
/// linear score and `s_l` a label-specific one, each centred by a random
/// offset. With `correlation = 1` all labels coincide.
pub fn synth_dataset(
    examples: usize,
    attributes: usize,
    labels: usize,
    correlation: f64,
    seed: u64,
) -> Result<Dataset> {
    if examples == 0 || attributes == 0 || labels == 0 {
        return Err(Error::InvalidConfig(format!(
            "synthetic dimensions must be positive, got n={examples} a={attributes} l={labels}"
        )));
    }
    if !(0.0..=1.0).contains(&correlation) {
        return Err(Error::InvalidConfig(format!(
            "label correlation must be in [0, 1], got {correlation}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let linear_score = |rng: &mut ChaCha8Rng| {
        let weights: Vec<f64> = (0..attributes)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let mean: f64 = weights.iter().sum::<f64>() / 2.0;
        let sd = (weights.iter().map(|w| w * w).sum::<f64>() / 12.0).sqrt();
        // offsets between -1 and +1.5 standard deviations keep labels mostly sparse
        let offset = mean + rng.random_range(-1.0..1.5) * sd;
        (weights, offset)
    };
    let shared = linear_score(&mut rng);
    let own: Vec<_> = (0..labels).map(|_| linear_score(&mut rng)).collect();

    let columns: Vec<Vec<f64>> = (0..attributes)
        .map(|_| (0..examples).map(|_| rng.random::<f64>()).collect())
        .collect();

    let score = |(w, b): &(Vec<f64>, f64), i: usize| -> f64 {
        w.iter()
            .zip(&columns)
            .map(|(w, col)| w * col[i])
            .sum::<f64>()
            - b
    };
    let mut data = Vec::with_capacity(examples * labels);
    for i in 0..examples {
        let s = score(&shared, i);
        for own_l in &own {
            let z = if correlation == 1.0 {
                s
            } else {
                correlation * s + (1.0 - correlation) * score(own_l, i)
            };
            data.push(if z > 0.0 { 1.0 } else { -1.0 });
        }
    }

    let names = (0..attributes)
        .map(|a| Attribute::numerical(format!("x{a}")))
        .collect();
    let label_names = (0..labels).map(|l| format!("y{l}")).collect();
    Dataset::new(
        format!("synth-n{examples}-a{attributes}-l{labels}-c{correlation}"),
        names,
        columns,
        LabelMatrix::new(examples, labels, data)?,
        label_names,
    )
}
