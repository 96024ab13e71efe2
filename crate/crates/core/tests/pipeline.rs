//! End-to-end behaviour through the public API.

use gauss_mlc::data::DatasetSource;
use gauss_mlc::geometry::sample_gaussian;
use gauss_mlc::learners::{aggregate_train, perceptron_train, TrainConfig};
use gauss_mlc::metrics::{decomposition_check, err};
use gauss_mlc::model::Model;
use gauss_mlc::regularity::random_unit_mlc;
use gauss_mlc::{
    Classifier, Dataset, ExampleSource, GroundTruth, LearnerKind, MlcWeights, NoiseSpec, PseudoMlcWeights,
    SampleSource, Seed, SourceConfig,
};
use proptest::prelude::*;

fn source(k: u32, d: usize, noise: NoiseSpec, seed: u64) -> SampleSource {
    let w = random_unit_mlc(k, d, Seed(seed)).unwrap();
    SampleSource::new(SourceConfig::new(GroundTruth::Mlc(w), noise, Seed(seed + 1))).unwrap()
}

#[test]
fn aggregate_model_survives_a_save_load_cycle() {
    let src = source(3, 6, NoiseSpec::UniformFlip { rate: 0.05 }, 11);
    let cfg = TrainConfig {
        epsilon: 0.1,
        seed: Seed(5),
        ..TrainConfig::default()
    };
    let out = aggregate_train(&src, &cfg, &LearnerKind::Init).unwrap();
    let again = aggregate_train(&src, &cfg, &LearnerKind::Init).unwrap();
    assert_eq!(out.weights, again.weights);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    Model::Pseudo(out.weights.clone()).save(&path).unwrap();
    let loaded = Model::load(&path).unwrap();
    assert_eq!(loaded, Model::Pseudo(out.weights.clone()));

    let holdout = src.fork(99).draw_dataset(50_000).unwrap();
    let e = err(&loaded, &holdout).unwrap();
    assert!(e.value <= 0.05 + 0.1, "{e:?}");
    assert!(decomposition_check(&out.weights, &holdout).unwrap().holds);
}

#[test]
fn dataset_file_feeds_the_perceptron() {
    let mut src = source(4, 5, NoiseSpec::None, 21);
    let data = src.draw_dataset(20_000).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.txt");
    data.save(&path).unwrap();
    let loaded = Dataset::load(&path).unwrap();
    assert_eq!(loaded, data);

    let mut file_source = DatasetSource::new(loaded);
    let out = perceptron_train(&mut file_source, 20_000, &mut Seed(3).rng()).unwrap();
    assert_eq!(file_source.remaining(), 0);
    let holdout = src.draw_dataset(20_000).unwrap();
    assert!(err(&out.weights, &holdout).unwrap().value < 0.1);
    assert!(perceptron_train(&mut file_source, 1, &mut Seed(3).rng()).is_err());
}

#[test]
fn localized_learners_need_the_right_shape() {
    let src = source(4, 5, NoiseSpec::None, 31);
    assert!(aggregate_train(&src, &TrainConfig::default(), &LearnerKind::Local3).is_err());
}

fn weights(k: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudo_mlc_of_an_mlc_agrees_with_it(rows in weights(4, 3), seed in any::<u64>()) {
        let Ok(w) = MlcWeights::new(rows) else { return Ok(()) };
        let Ok(p) = PseudoMlcWeights::from_mlc(&w) else { return Ok(()) };
        let mut rng = Seed(seed).rng();
        for _ in 0..50 {
            let x = sample_gaussian(3, &mut rng);
            prop_assert_eq!(w.classify(&x), p.classify(&x));
        }
    }

    #[test]
    fn pair_confusion_only_swaps_within_the_pair(seed in 0u64..1000, rate in 0.0f64..0.5) {
        let mut src = source(4, 3, NoiseSpec::PairConfusion { rate, pair: (2, 4) }, seed);
        let (noisy, clean) = src.draw_with_clean(500);
        for ((_, y), c) in noisy.iter().zip(&clean) {
            if y != *c {
                let pair = [y.get(), c.get()];
                prop_assert!(pair == [2, 4] || pair == [4, 2]);
            }
        }
    }

    #[test]
    fn model_json_round_trips_exactly(rows in weights(3, 4)) {
        let Ok(w) = MlcWeights::new(rows) else { return Ok(()) };
        let m = Model::Mlc(w);
        prop_assert_eq!(Model::from_json(&m.to_json()).unwrap(), m);
    }
}
