//! Resolved run configurations: defaults, then the `--config` file, then flags.

use std::path::{Path, PathBuf};

use gauss_mlc::data::CALIBRATION_SAMPLES;
use gauss_mlc::model::Model;
use gauss_mlc::regularity::random_unit_mlc;
use gauss_mlc::{GroundTruth, HardInstanceSpec, MlcWeights, NoiseSpec, SampleSource, Seed, SourceConfig, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::args::{Algo, GeometryChoice, SourceArgs, TrainArgs};
use crate::Failure;

pub const CONFIG_VERSION: u32 = 1;

/// Streams of the master seed.
pub mod stream {
    pub const TRUTH: u64 = 0;
    pub const SOURCE: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const MONTE_CARLO: u64 = 4;
}

/// Config files carry `"version": 1`.
pub trait Versioned {
    fn version(&self) -> Option<u32>;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn version(&self) -> Option<u32> {
                self.version
            }
        }
    )*};
}

versioned!(GenDataSpec, TrainSpec, EvalSpec, GeometrySpec, LowerboundSpec, LemmaLabSpec);

/// Reads a config file, or returns the defaults.
pub fn load<T: DeserializeOwned + Default + Versioned>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    let spec: T = serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    match spec.version() {
        Some(CONFIG_VERSION) => Ok(spec),
        Some(v) => Err(Failure::Invalid(format!(
            "{}: unsupported version {v} (expected {CONFIG_VERSION})",
            path.display()
        ))),
        None => Err(Failure::Invalid(format!("{}: missing \"version\"", path.display()))),
    }
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{name} must be a positive number, got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<(), Failure> {
    if v == 0 {
        Err(Failure::Invalid(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthSpec {
    /// Rows drawn uniformly from the sphere.
    RandomMlc { k: u32, d: usize },
    /// `f(x) = min{i : x_i > 0}`, else `k`.
    HardInstance { k: u32, d: usize },
    /// An MLC saved as model JSON.
    Model { path: PathBuf },
}

impl Default for TruthSpec {
    fn default() -> Self {
        TruthSpec::RandomMlc { k: 3, d: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSpec {
    pub truth: TruthSpec,
    pub noise: NoiseSpec,
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec {
            truth: TruthSpec::default(),
            noise: NoiseSpec::None,
        }
    }
}

fn parse_pair(s: &str) -> Result<(u32, u32), Failure> {
    let bad = || Failure::Invalid(format!("--pair expects `i,j`, got {s:?}"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

impl SourceSpec {
    pub fn apply(&mut self, a: &SourceArgs) -> Result<(), Failure> {
        if let Some(t) = &a.truth {
            let (k, d) = match &self.truth {
                TruthSpec::RandomMlc { k, d } | TruthSpec::HardInstance { k, d } => (*k, *d),
                TruthSpec::Model { .. } => (3, 20),
            };
            self.truth = match t.as_str() {
                "random-mlc" => TruthSpec::RandomMlc { k, d },
                "hard-instance" => TruthSpec::HardInstance { k, d },
                path => TruthSpec::Model { path: path.into() },
            };
        }
        match &mut self.truth {
            TruthSpec::RandomMlc { k, d } | TruthSpec::HardInstance { k, d } => {
                *k = a.k.unwrap_or(*k);
                *d = a.d.unwrap_or(*d);
            }
            TruthSpec::Model { .. } if a.k.is_some() || a.d.is_some() => {
                return Err(Failure::Invalid("--k and --d do not apply to a model ground truth".into()));
            }
            TruthSpec::Model { .. } => {}
        }
        let pair = a.pair.as_deref().map(parse_pair).transpose()?;
        if let Some(name) = &a.noise {
            let rate = a.eta.unwrap_or(self.noise.rate());
            self.noise = match name.as_str() {
                "none" => NoiseSpec::None,
                "uniform-flip" => NoiseSpec::UniformFlip { rate },
                "pair-confusion" => NoiseSpec::PairConfusion {
                    rate,
                    pair: pair.unwrap_or((1, 2)),
                },
                "boundary-flip" => NoiseSpec::BoundaryFlip {
                    rate,
                    band: a.band.unwrap_or(0.05),
                },
                other => return Err(Failure::Invalid(format!("unknown noise model {other:?}"))),
            };
        } else {
            match &mut self.noise {
                NoiseSpec::None if a.eta.is_some() => {
                    return Err(Failure::Invalid("--eta needs a noise model (--noise)".into()));
                }
                NoiseSpec::None => {}
                NoiseSpec::UniformFlip { rate } => *rate = a.eta.unwrap_or(*rate),
                NoiseSpec::PairConfusion { rate, pair: p } => {
                    *rate = a.eta.unwrap_or(*rate);
                    *p = pair.unwrap_or(*p);
                }
                NoiseSpec::BoundaryFlip { rate, band } => {
                    *rate = a.eta.unwrap_or(*rate);
                    *band = a.band.unwrap_or(*band);
                }
            }
        }
        Ok(())
    }

    /// `(k, d)` without loading anything for the synthetic truths.
    pub fn shape(&self) -> Result<(u32, usize), Failure> {
        Ok(match &self.truth {
            TruthSpec::RandomMlc { k, d } | TruthSpec::HardInstance { k, d } => (*k, *d),
            TruthSpec::Model { path } => {
                let m = load_model(path)?;
                (m.k(), m.d())
            }
        })
    }

    fn truth(&self, master: Seed) -> Result<GroundTruth, Failure> {
        Ok(match &self.truth {
            TruthSpec::RandomMlc { k, d } => {
                if *k < 2 || *d < 1 {
                    return Err(Failure::Invalid(format!("need k >= 2 and d >= 1, got k = {k}, d = {d}")));
                }
                GroundTruth::Mlc(random_unit_mlc(*k, *d, master.derive(stream::TRUTH)).map_err(Failure::invalid)?)
            }
            TruthSpec::HardInstance { k, d } => {
                GroundTruth::HardInstance(HardInstanceSpec::new(*k, *d).map_err(Failure::invalid)?)
            }
            TruthSpec::Model { path } => match load_model(path)? {
                Model::Mlc(w) => GroundTruth::Mlc(w),
                Model::Pseudo(_) => {
                    return Err(Failure::Invalid(format!(
                        "{}: a ground truth must be an MLC, not a pseudo-MLC",
                        path.display()
                    )))
                }
            },
        })
    }

    /// The synthetic source of `master`, validated. Stream `s` of the
    /// master seed drives the labels and noise.
    pub fn build(&self, master: Seed, s: u64) -> Result<SampleSource, Failure> {
        let truth = self.truth(master)?;
        self.noise.validate(truth_k(&truth)).map_err(Failure::invalid)?;
        SampleSource::new(SourceConfig::new(truth, self.noise.clone(), master.derive(s))).map_err(Failure::invalid)
    }

    pub fn mlc_truth(&self, master: Seed) -> Result<Option<MlcWeights>, Failure> {
        Ok(self.truth(master)?.as_mlc().cloned())
    }
}

fn truth_k(t: &GroundTruth) -> u32 {
    use gauss_mlc::Classifier;
    t.num_classes()
}

pub fn load_model(path: &Path) -> Result<Model, Failure> {
    Model::load(path).map_err(Failure::invalid)
}

/// Size of the noise calibration pre-pass, for the report.
pub fn calibration_samples(noise: &NoiseSpec) -> usize {
    match noise {
        NoiseSpec::BoundaryFlip { .. } => CALIBRATION_SAMPLES,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataSpec {
    pub version: Option<u32>,
    pub seed: u64,
    pub source: SourceSpec,
    pub n: usize,
}

impl Default for GenDataSpec {
    fn default() -> Self {
        GenDataSpec {
            version: None,
            seed: 0,
            source: SourceSpec::default(),
            n: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub version: Option<u32>,
    pub seed: u64,
    pub source: SourceSpec,
    pub algo: Algo,
    /// Training data file; the synthetic source is used otherwise.
    pub data: Option<PathBuf>,
    pub eval_data: Option<PathBuf>,
    /// `seed` inside is ignored; it is derived from the master seed.
    pub train: TrainConfig,
    pub geometry: GeometryChoice,
    pub perceptron_n: usize,
    pub n_eval: usize,
    /// Monte-Carlo size of the oracle geometry.
    pub n_mc: usize,
    pub timing: bool,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            version: None,
            seed: 0,
            source: SourceSpec::default(),
            algo: Algo::default(),
            data: None,
            eval_data: None,
            train: TrainConfig::default(),
            geometry: GeometryChoice::default(),
            perceptron_n: 100_000,
            n_eval: 100_000,
            n_mc: 100_000,
            timing: false,
        }
    }
}

/// Smallest boundary mass handed to the localized learner as oracle input.
pub const ORACLE_T_HAT_FLOOR: f64 = 1e-3;

impl TrainSpec {
    pub fn apply(&mut self, a: &TrainArgs) -> Result<(), Failure> {
        self.source.apply(&a.source)?;
        let t = &mut self.train;
        self.algo = a.algo.unwrap_or(self.algo);
        if a.data.is_some() {
            self.data = a.data.clone();
        }
        if a.eval_data.is_some() {
            self.eval_data = a.eval_data.clone();
        }
        t.epsilon = a.eps.unwrap_or(t.epsilon);
        t.delta = a.delta.unwrap_or(t.delta);
        t.big_c = a.big_c.unwrap_or(t.big_c);
        if let Some(p) = &a.preset {
            t.preset = serde_json::from_value(serde_json::Value::String(p.clone()))
                .map_err(|_| Failure::Invalid(format!("unknown preset {p:?} (desk or theory)")))?;
        }
        t.n_override = a.n_step.or(t.n_override);
        t.t_override = a.iters.or(t.t_override);
        t.selection_n_override = a.n_sel.or(t.selection_n_override);
        self.geometry = a.geometry.unwrap_or(self.geometry);
        self.perceptron_n = a.perceptron_n.unwrap_or(self.perceptron_n);
        self.n_eval = a.n_eval.unwrap_or(self.n_eval);
        self.n_mc = a.n_mc.unwrap_or(self.n_mc);
        self.timing |= a.timing;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Failure> {
        positive("eps", self.train.epsilon)?;
        self.train.validate().map_err(Failure::invalid)?;
        nonzero("n_eval", self.n_eval)?;
        nonzero("n_mc", self.n_mc)?;
        let (k, _) = self.source.shape()?;
        if self.algo == Algo::AggregateLocal3 && k != 3 {
            return Err(Failure::Invalid(format!("aggregate-local3 needs k = 3, got k = {k}")));
        }
        if self.algo == Algo::AggregateLocalk
            && self.geometry == GeometryChoice::Oracle
            && matches!(self.source.truth, TruthSpec::HardInstance { .. })
        {
            return Err(Failure::Invalid(
                "oracle geometry needs an MLC ground truth; use --geometry grid".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub version: Option<u32>,
    pub seed: u64,
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub source: SourceSpec,
    pub n: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            version: None,
            seed: 0,
            model: None,
            data: None,
            source: SourceSpec::default(),
            n: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySpec {
    pub version: Option<u32>,
    pub seed: u64,
    pub model: Option<PathBuf>,
    pub k: u32,
    pub d: usize,
    pub trials: usize,
    pub n_mc: usize,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec {
            version: None,
            seed: 0,
            model: None,
            k: 4,
            d: 64,
            trials: 0,
            n_mc: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerboundSpec {
    pub version: Option<u32>,
    pub seed: u64,
    pub k: u32,
    pub d: usize,
    pub l: u32,
    pub eps: f64,
    pub n_schedule: Vec<usize>,
    pub trials: usize,
    pub n_eval: usize,
}

impl Default for LowerboundSpec {
    fn default() -> Self {
        LowerboundSpec {
            version: None,
            seed: 0,
            k: 4,
            d: 16,
            l: 4,
            eps: 1.0 / 16.0,
            n_schedule: vec![1_000, 10_000, 100_000],
            trials: 10,
            n_eval: 100_000,
        }
    }
}

pub const LEMMA_CHECKS: [&str; 5] = ["correlation", "pgd", "disagreement", "blowup", "localization"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaLabSpec {
    pub version: Option<u32>,
    pub seed: u64,
    pub checks: Vec<String>,
    pub d: usize,
    pub n_mc: usize,
    pub trials: usize,
    pub big_c: f64,
}

impl Default for LemmaLabSpec {
    fn default() -> Self {
        LemmaLabSpec {
            version: None,
            seed: 0,
            checks: LEMMA_CHECKS.iter().map(|s| s.to_string()).collect(),
            d: 10,
            n_mc: 200_000,
            trials: 20,
            big_c: 10.0,
        }
    }
}

impl LemmaLabSpec {
    pub fn validate(&self) -> Result<(), Failure> {
        for c in &self.checks {
            if !LEMMA_CHECKS.contains(&c.as_str()) {
                return Err(Failure::Invalid(format!("unknown check {c:?}; expected one of {LEMMA_CHECKS:?}")));
            }
        }
        if self.d < 3 {
            return Err(Failure::Invalid(format!("d must be at least 3, got {}", self.d)));
        }
        nonzero("n_mc", self.n_mc)?;
        nonzero("trials", self.trials)?;
        if self.big_c > 1.0 && self.big_c.is_finite() {
            Ok(())
        } else {
            Err(Failure::Invalid(format!("big_c must exceed 1, got {}", self.big_c)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_noise_rate() {
        let mut s = SourceSpec::default();
        let a = SourceArgs {
            noise: Some("pair-confusion".into()),
            eta: Some(0.1),
            pair: Some("2, 3".into()),
            ..Default::default()
        };
        s.apply(&a).unwrap();
        assert_eq!(s.noise, NoiseSpec::PairConfusion { rate: 0.1, pair: (2, 3) });
        s.apply(&SourceArgs {
            eta: Some(0.2),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.noise.rate(), 0.2);
    }

    #[test]
    fn eta_without_noise_is_rejected() {
        let a = SourceArgs {
            eta: Some(0.1),
            ..Default::default()
        };
        assert!(matches!(SourceSpec::default().apply(&a), Err(Failure::Invalid(_))));
    }

    #[test]
    fn truth_keeps_shape() {
        let mut s = SourceSpec::default();
        s.apply(&SourceArgs {
            truth: Some("hard-instance".into()),
            k: Some(5),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.truth, TruthSpec::HardInstance { k: 5, d: 20 });
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let e = serde_json::from_str::<TrainSpec>(r#"{"version":1,"epsilon":0.1}"#);
        assert!(e.is_err());
        let ok: TrainSpec = serde_json::from_str(r#"{"version":1,"train":{"epsilon":0.1}}"#).unwrap();
        assert_eq!(ok.train.epsilon, 0.1);
    }

    #[test]
    fn versions_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"n":5}"#).unwrap();
        assert!(load::<GenDataSpec>(Some(&p)).is_err());
        std::fs::write(&p, r#"{"version":2,"n":5}"#).unwrap();
        assert!(load::<GenDataSpec>(Some(&p)).is_err());
        std::fs::write(&p, r#"{"version":1,"n":5}"#).unwrap();
        assert_eq!(load::<GenDataSpec>(Some(&p)).unwrap().n, 5);
    }
}
