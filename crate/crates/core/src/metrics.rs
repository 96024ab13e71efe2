//! 0-1 error, pairwise `(i, j)`-error, confusion masses and the
//! error-decomposition check. Every estimate carries its sample size and a
//! normal-approximation standard error.

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::geometry::{check_dims, dot, fill_gaussian, UnitVector};
use crate::model::{label_pairs, Classifier, Label, MlcWeights, PseudoMlcWeights};
use crate::rng::{par_chunks, Seed};

/// An empirical probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub value: f64,
    pub n: usize,
    pub std_err: f64,
}

impl ErrorReport {
    pub fn from_counts(hits: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let value = hits as f64 / n as f64;
        Ok(ErrorReport {
            value,
            n,
            std_err: (value * (1.0 - value) / n as f64).sqrt(),
        })
    }

    /// `|value − target| ≤ z·std_err`, with a floor of one count so that
    /// exact targets at 0 or 1 are not failed by a zero standard error.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.value - target).abs() <= z * self.std_err.max(1.0 / self.n as f64)
    }
}

fn nonempty(sample: &Dataset) -> Result<()> {
    if sample.is_empty() {
        Err(Error::EmptySample)
    } else {
        Ok(())
    }
}

fn check_pair(k: u32, i: Label, j: Label) -> Result<()> {
    Label::new(i.get(), k)?;
    Label::new(j.get(), k)?;
    if i == j {
        return Err(Error::PreconditionViolated(format!("err_ij needs i != j, got {i}")));
    }
    Ok(())
}

/// `Pr[h(x) ≠ y]` on the sample.
pub fn err<C: Classifier + ?Sized>(h: &C, sample: &Dataset) -> Result<ErrorReport> {
    nonempty(sample)?;
    check_dims(h.dim(), sample.d())?;
    let wrong = sample.iter().filter(|(x, y)| h.classify(x) != *y).count();
    ErrorReport::from_counts(wrong, sample.len())
}

/// Whether `w` errs on `(x, y)` as an `(i, j)` separator. Ties `w·x = 0`
/// count for neither side.
#[inline]
pub(crate) fn pair_mistake(w: &[f64], x: &[f64], y: Label, i: Label, j: Label) -> bool {
    if y == i {
        dot(w, x) < 0.0
    } else if y == j {
        dot(w, x) > 0.0
    } else {
        false
    }
}

/// `Pr[w·x < 0, y = i] + Pr[w·x > 0, y = j]` on the sample.
pub fn err_ij(w: &UnitVector, sample: &Dataset, i: Label, j: Label) -> Result<ErrorReport> {
    nonempty(sample)?;
    check_dims(w.dim(), sample.d())?;
    check_pair(sample.k(), i, j)?;
    let wrong = sample
        .iter()
        .filter(|(x, y)| pair_mistake(w, x, *y, i, j))
        .count();
    ErrorReport::from_counts(wrong, sample.len())
}

/// `(i, j)`-error of `w` against the clean labels of `f_star`, by Monte
/// Carlo over `n_mc` Gaussian points.
pub fn err_ij_vs_model(
    w: &UnitVector,
    f_star: &MlcWeights,
    i: Label,
    j: Label,
    n_mc: usize,
    seed: Seed,
) -> Result<ErrorReport> {
    check_dims(f_star.d(), w.dim())?;
    check_pair(f_star.k(), i, j)?;
    let d = w.dim();
    let counts = par_chunks(seed, n_mc, |rng, len| {
        let mut x = vec![0.0; d];
        let mut wrong = 0usize;
        for _ in 0..len {
            fill_gaussian(&mut x, rng);
            wrong += pair_mistake(w, &x, f_star.classify(&x), i, j) as usize;
        }
        wrong
    });
    ErrorReport::from_counts(counts.into_iter().sum(), n_mc)
}

/// Empirical `opt_{a,b} = Pr[f*(x) = a, y = b]` for `a ≠ b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionEstimate {
    pub k: u32,
    /// Row-major `k × k`; the diagonal is zero.
    pub entries: Vec<f64>,
    pub n: usize,
}

impl ConfusionEstimate {
    pub fn entry(&self, a: Label, b: Label) -> f64 {
        self.entries[a.index() * self.k as usize + b.index()]
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// `O_ij`: the confusion mass touching `i` or `j`.
    pub fn o_ij(&self, i: Label, j: Label) -> f64 {
        let k = self.k as usize;
        let touches = |c: usize| c == i.index() || c == j.index();
        let mut total = 0.0;
        for a in 0..k {
            for b in 0..k {
                if a != b && (touches(a) || touches(b)) {
                    total += self.entries[a * k + b];
                }
            }
        }
        total
    }
}

pub fn confusion<C: Classifier + ?Sized>(f_star: &C, sample: &Dataset) -> Result<ConfusionEstimate> {
    nonempty(sample)?;
    check_dims(f_star.dim(), sample.d())?;
    let k = sample.k() as usize;
    if f_star.num_classes() as usize != k {
        return Err(Error::InvalidParameter(format!(
            "classifier has {} classes, sample has {k}",
            f_star.num_classes()
        )));
    }
    let mut counts = vec![0usize; k * k];
    for (x, y) in sample.iter() {
        let a = f_star.classify(x);
        if a != y {
            counts[a.index() * k + y.index()] += 1;
        }
    }
    let n = sample.len();
    Ok(ConfusionEstimate {
        k: sample.k(),
        entries: counts.into_iter().map(|c| c as f64 / n as f64).collect(),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionCheck {
    pub err: f64,
    pub pairwise_bound: f64,
    /// Standard error of the per-example difference `bound − err`.
    pub std_err: f64,
    pub n: usize,
    pub holds: bool,
}

/// `err(h_W) ≤ Σ_{i<j} err_ij(w_ij)` on the sample, allowing two standard
/// errors of slack.
pub fn decomposition_check(w: &PseudoMlcWeights, sample: &Dataset) -> Result<DecompositionCheck> {
    nonempty(sample)?;
    check_dims(w.d(), sample.d())?;
    if w.k() != sample.k() {
        return Err(Error::InvalidParameter(format!(
            "pseudo-MLC has {} classes, sample has {}",
            w.k(),
            sample.k()
        )));
    }
    let pairs: Vec<((Label, Label), &UnitVector)> = w
        .pairs()
        .map(|((i, j), v)| ((Label::from_index(i as usize - 1), Label::from_index(j as usize - 1)), v))
        .collect();
    debug_assert_eq!(pairs.len(), label_pairs(w.k()).count());
    let (mut wrong, mut bound, mut sum_sq) = (0usize, 0usize, 0.0f64);
    for (x, y) in sample.iter() {
        let e = (w.classify(x) != y) as usize;
        let b = pairs
            .iter()
            .filter(|((i, j), v)| pair_mistake(v, x, y, *i, *j))
            .count();
        wrong += e;
        bound += b;
        let diff = b as f64 - e as f64;
        sum_sq += diff * diff;
    }
    let n = sample.len() as f64;
    let err = wrong as f64 / n;
    let pairwise_bound = bound as f64 / n;
    let mean = pairwise_bound - err;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let std_err = (var / n).sqrt();
    Ok(DecompositionCheck {
        err,
        pairwise_bound,
        std_err,
        n: sample.len(),
        holds: err <= pairwise_bound + 2.0 * std_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{GroundTruth, NoiseSpec, SampleSource, SourceConfig};
    use crate::geometry::{sample_gaussian, sample_unit_vector};
    use crate::model::HardInstanceSpec;
    use crate::ExampleSource;
    use std::f64::consts::PI;

    fn l(v: u32) -> Label {
        Label::from_index(v as usize - 1)
    }

    fn random_mlc(k: u32, d: usize, seed: u64) -> MlcWeights {
        let mut rng = Seed(seed).rng();
        MlcWeights::new((0..k).map(|_| sample_gaussian(d, &mut rng)).collect()).unwrap()
    }

    fn sample(truth: GroundTruth, noise: NoiseSpec, n: usize, seed: u64) -> Dataset {
        SampleSource::new(SourceConfig::new(truth, noise, Seed(seed)))
            .unwrap()
            .draw_dataset(n)
            .unwrap()
    }

    struct Constant(Label, u32, usize);

    impl Classifier for Constant {
        fn classify(&self, _: &[f64]) -> Label {
            self.0
        }
        fn num_classes(&self) -> u32 {
            self.1
        }
        fn dim(&self) -> usize {
            self.2
        }
    }

    #[test]
    fn planted_model_has_zero_error() {
        let w = random_mlc(4, 6, 1);
        let data = sample(GroundTruth::Mlc(w.clone()), NoiseSpec::None, 20_000, 2);
        assert_eq!(err(&w, &data).unwrap().value, 0.0);
        let conf = confusion(&w, &data).unwrap();
        assert_eq!(conf.total(), 0.0);
        assert_eq!(conf.o_ij(l(1), l(2)), 0.0);
    }

    #[test]
    fn constant_classifier_on_hard_instance() {
        let h = HardInstanceSpec::new(2, 3).unwrap();
        let data = sample(GroundTruth::HardInstance(h), NoiseSpec::None, 100_000, 3);
        let r = err(&Constant(l(1), 2, 3), &data).unwrap();
        assert!(r.within(0.5, 3.0), "{r:?}");
    }

    #[test]
    fn random_guessing_error() {
        let k = 5;
        let w = random_mlc(k, 4, 4);
        let data = sample(GroundTruth::Mlc(w), NoiseSpec::None, 100_000, 5);
        // Deterministic "guess" from a coordinate hash independent of labels.
        struct Guess(u32);
        impl Classifier for Guess {
            fn classify(&self, x: &[f64]) -> Label {
                let h = (x[3] * 1e6).abs() as u64;
                Label::from_index((h % self.0 as u64) as usize)
            }
            fn num_classes(&self) -> u32 {
                self.0
            }
            fn dim(&self) -> usize {
                4
            }
        }
        let r = err(&Guess(k), &data).unwrap();
        assert!(r.within((k - 1) as f64 / k as f64, 3.0), "{r:?}");
    }

    #[test]
    fn pair_error_of_exact_and_reversed_separator() {
        let w = random_mlc(2, 5, 6);
        let data = sample(GroundTruth::Mlc(w.clone()), NoiseSpec::None, 20_000, 7);
        let star = w.pairwise_boundary_direction(1, 2).unwrap();
        assert_eq!(err_ij(&star, &data, l(1), l(2)).unwrap().value, 0.0);
        assert_eq!(err_ij(&star.negated(), &data, l(1), l(2)).unwrap().value, 1.0);
        assert!(matches!(err_ij(&star, &data, l(1), l(1)), Err(Error::PreconditionViolated(_))));
        assert!(matches!(err_ij(&star, &Dataset::new(5, 2), l(1), l(2)), Err(Error::EmptySample)));
    }

    #[test]
    fn orthogonal_separator_errs_half() {
        let w = random_mlc(2, 5, 8);
        let data = sample(GroundTruth::Mlc(w.clone()), NoiseSpec::None, 100_000, 9);
        let star = w.pairwise_boundary_direction(1, 2).unwrap();
        let mut rng = Seed(10).rng();
        let v = sample_unit_vector(5, &mut rng);
        let perp = crate::geometry::normalize(&crate::geometry::project_orthogonal(&v, &star).unwrap()).unwrap();
        let r = err_ij(&perp, &data, l(1), l(2)).unwrap();
        assert!(r.within(0.5, 3.0), "{r:?}");
    }

    #[test]
    fn both_signs_cover_the_pair() {
        let w = random_mlc(4, 5, 11);
        let data = sample(GroundTruth::Mlc(w), NoiseSpec::UniformFlip { rate: 0.1 }, 20_000, 12);
        let mut rng = Seed(13).rng();
        let v = sample_unit_vector(5, &mut rng);
        let a = err_ij(&v, &data, l(2), l(4)).unwrap().value;
        let b = err_ij(&v.negated(), &data, l(2), l(4)).unwrap().value;
        let in_pair = data.iter().filter(|(_, y)| y.get() == 2 || y.get() == 4).count();
        assert!((a + b - in_pair as f64 / data.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn model_pair_error_matches_angle() {
        let w = random_mlc(2, 6, 14);
        let star = w.pairwise_boundary_direction(1, 2).unwrap();
        let mut rng = Seed(15).rng();
        let other = sample_unit_vector(6, &mut rng);
        let perp = crate::geometry::normalize(&crate::geometry::project_orthogonal(&other, &star).unwrap()).unwrap();
        for theta in [0.1f64, 0.5, 1.0, 1.5] {
            let v: Vec<f64> = star
                .iter()
                .zip(perp.iter())
                .map(|(a, b)| theta.cos() * a + theta.sin() * b)
                .collect();
            let v = UnitVector::new(v).unwrap();
            let r = err_ij_vs_model(&v, &w, l(1), l(2), 400_000, Seed(16)).unwrap();
            assert!(r.within(theta / PI, 3.0), "{theta} {r:?}");
        }
        let exact = err_ij_vs_model(&star, &w, l(1), l(2), 10_000, Seed(1)).unwrap();
        assert_eq!(exact.value, 0.0);
        assert!(err_ij_vs_model(&star, &w, l(2), l(2), 10, Seed(1)).is_err());
    }

    #[test]
    fn model_pair_error_is_deterministic_across_thread_counts() {
        let w = random_mlc(3, 4, 17);
        let v = w.pairwise_boundary_direction(1, 3).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| err_ij_vs_model(&v, &w, l(1), l(3), 300_000, Seed(18)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn pair_confusion_masses() {
        let w = random_mlc(3, 4, 19);
        let n = 200_000;
        let data = sample(
            GroundTruth::Mlc(w.clone()),
            NoiseSpec::PairConfusion { rate: 0.2, pair: (1, 2) },
            n,
            20,
        );
        let conf = confusion(&w, &data).unwrap();
        let mass = |c: u32| data.iter().filter(|(x, _)| w.classify(x).get() == c).count() as f64 / n as f64;
        let tol = 4.0 * (0.2f64 / n as f64).sqrt();
        assert!((conf.entry(l(1), l(2)) - 0.2 * mass(1)).abs() < tol);
        assert!((conf.entry(l(2), l(1)) - 0.2 * mass(2)).abs() < tol);
        assert_eq!(conf.entry(l(1), l(3)) + conf.entry(l(3), l(1)) + conf.entry(l(2), l(3)), 0.0);
        for (i, j) in [(1, 2), (1, 3), (2, 3)] {
            assert!(conf.o_ij(l(i), l(j)) >= conf.entry(l(i), l(j)) + conf.entry(l(j), l(i)));
        }
    }

    #[test]
    fn decomposition_holds_on_random_instances() {
        for trial in 0..20u64 {
            let mut rng = Seed(100 + trial).rng();
            let k = 2 + (trial % 4) as u32;
            let d = 3 + (trial % 5) as usize;
            let pairs = label_pairs(k).map(|_| sample_unit_vector(d, &mut rng)).collect();
            let w = PseudoMlcWeights::new(k, pairs).unwrap();
            let data = sample(
                GroundTruth::Mlc(random_mlc(k, d, 200 + trial)),
                NoiseSpec::UniformFlip { rate: 0.1 },
                20_000,
                300 + trial,
            );
            let check = decomposition_check(&w, &data).unwrap();
            assert!(check.holds, "{check:?}");
            assert!(check.err <= check.pairwise_bound);
        }
    }

    #[test]
    fn decomposition_is_tight_for_two_classes() {
        let mut rng = Seed(21).rng();
        let v = sample_unit_vector(4, &mut rng);
        let w = PseudoMlcWeights::new(2, vec![v.clone()]).unwrap();
        let data = sample(GroundTruth::Mlc(random_mlc(2, 4, 22)), NoiseSpec::None, 20_000, 23);
        let check = decomposition_check(&w, &data).unwrap();
        let e12 = err_ij(&v, &data, l(1), l(2)).unwrap().value;
        assert_eq!(check.pairwise_bound, e12);
        assert_eq!(check.err, e12);
        let exact = PseudoMlcWeights::from_mlc(&random_mlc(3, 4, 24)).unwrap();
        let data = sample(GroundTruth::Mlc(random_mlc(3, 4, 24)), NoiseSpec::None, 5_000, 25);
        let check = decomposition_check(&exact, &data).unwrap();
        assert_eq!((check.err, check.pairwise_bound), (0.0, 0.0));
    }
}
