//! Online multiclass perceptron.

use crate::data::{Dataset, ExampleSource};
use crate::error::{Error, Result};
use crate::geometry::{axpy, fill_gaussian};
use crate::model::{Classifier, Label, MlcWeights};
use crate::rng::GaussRng;

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptronResult {
    pub weights: MlcWeights,
    pub mistakes: u64,
}

/// One online step on `(x, y)`: if the current prediction `ŷ` differs from
/// `y`, adds `x` to row `y` and subtracts it from row `ŷ`. Returns whether
/// a mistake was made.
pub fn perceptron_step(rows: &mut [Vec<f64>], x: &[f64], y: Label) -> bool {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (c, row) in rows.iter().enumerate() {
        let s = crate::geometry::dot(row, x);
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    if best == y.index() {
        return false;
    }
    axpy(1.0, x, &mut rows[y.index()]);
    axpy(-1.0, x, &mut rows[best]);
    true
}

const BATCH: usize = 4096;

/// Runs the perceptron over `n` fresh examples, starting from rows drawn
/// i.i.d. from `N(0, I)` with `rng`. With `n = 0` the random
/// initialization is returned.
pub fn perceptron_train<S: ExampleSource>(source: &mut S, n: usize, rng: &mut GaussRng) -> Result<PerceptronResult> {
    let (d, k) = (source.dim(), source.num_classes());
    let mut rows: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let mut r = vec![0.0; d];
            fill_gaussian(&mut r, rng);
            r
        })
        .collect();
    let mut batch = Dataset::with_capacity(d, k, BATCH.min(n));
    let mut mistakes = 0u64;
    let mut left = n;
    while left > 0 {
        let m = left.min(BATCH);
        batch.clear();
        source.draw_into(m, &mut batch)?;
        for (x, y) in batch.iter() {
            mistakes += perceptron_step(&mut rows, x, y) as u64;
        }
        left -= m;
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: 0 });
    }
    let weights = MlcWeights::new(rows)?;
    debug_assert_eq!(weights.dim(), d);
    Ok(PerceptronResult { weights, mistakes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DatasetSource, GroundTruth, NoiseSpec, SampleSource, SourceConfig};
    use crate::geometry::sample_gaussian;
    use crate::metrics::err;
    use crate::rng::Seed;

    #[test]
    fn single_mistake_moves_two_rows() {
        let mut rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let x = [2.0, 0.5];
        // Row 1 wins; the true label is 2.
        assert!(perceptron_step(&mut rows, &x, Label::from_index(1)));
        assert_eq!(rows, vec![vec![-1.0, -0.5], vec![2.0, 1.5], vec![-1.0, 0.0]]);
        assert!(!perceptron_step(&mut rows, &x, Label::from_index(1)));
    }

    #[test]
    fn learns_a_margin_separated_pair() {
        let d = 10;
        let mut rng = Seed(1).rng();
        let w = MlcWeights::new(vec![sample_gaussian(d, &mut rng), sample_gaussian(d, &mut rng)])
            .unwrap()
            .normalized();
        let mut src = SampleSource::new(SourceConfig::new(GroundTruth::Mlc(w.clone()), NoiseSpec::None, Seed(2))).unwrap();
        let mut filtered = |n: usize| {
            let mut keep = Dataset::new(d, 2);
            while keep.len() < n {
                for (x, y) in src.draw_dataset(4096).unwrap().iter() {
                    if keep.len() < n && w.multiclass_margin(x, y).unwrap() >= 0.2 {
                        keep.push(x, y).unwrap();
                    }
                }
            }
            keep
        };
        let mut train = DatasetSource::new(filtered(10_000));
        let holdout = filtered(100_000);
        let out = perceptron_train(&mut train, 10_000, &mut Seed(3).rng()).unwrap();
        let e = err(&out.weights, &holdout).unwrap();
        assert!(e.value <= 0.05, "{e:?}");
        assert!(out.mistakes > 0);
    }

    #[test]
    fn zero_examples_returns_initialization() {
        let h = crate::model::HardInstanceSpec::new(3, 3).unwrap();
        let mut src = SampleSource::new(SourceConfig::new(GroundTruth::HardInstance(h), NoiseSpec::None, Seed(4))).unwrap();
        let out = perceptron_train(&mut src, 0, &mut Seed(5).rng()).unwrap();
        assert_eq!(out.mistakes, 0);
        assert_eq!(src.drawn(), 0);
    }
}
