//! Labeled-example sources with a standard Gaussian `x`-marginal.
//!
//! A [`SampleSource`] draws `x ~ N(0, I_d)`, labels it with the planted
//! ground truth and passes the label through a [`NoiseChannel`]. Every
//! channel changes at most an `η` fraction of labels, so `opt ≤ η` (up to
//! Monte-Carlo slack) for the planted classifier.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, fill_gaussian};
use crate::model::{Classifier, HardInstanceSpec, Label, MlcWeights};
use crate::report::format_real;
use crate::rng::{GaussRng, Seed};

/// Stream index used to seed the boundary-flip calibration pre-pass.
pub const CALIBRATION_STREAM: u64 = 0xCA11_B8A7;

/// Size of the boundary-flip calibration pre-pass.
pub const CALIBRATION_SAMPLES: usize = 100_000;

/// Adversarial label channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    /// With probability `rate`, replace the label by a uniformly random
    /// other label.
    UniformFlip { rate: f64 },
    /// If the clean label is in `pair`, swap it with the other member with
    /// probability `rate`.
    PairConfusion { rate: f64, pair: (u32, u32) },
    /// Flip points whose normalized multiclass margin is below `band` to
    /// the runner-up class, with probability calibrated so that the total
    /// flipped mass is about `rate`.
    BoundaryFlip { rate: f64, band: f64 },
}

impl NoiseSpec {
    pub fn rate(&self) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::UniformFlip { rate }
            | NoiseSpec::PairConfusion { rate, .. }
            | NoiseSpec::BoundaryFlip { rate, .. } => rate,
        }
    }

    pub fn validate(&self, k: u32) -> Result<()> {
        let rate = self.rate();
        if !(0.0..=0.5).contains(&rate) {
            return Err(Error::InvalidParameter(format!("noise rate {rate} outside [0, 1/2]")));
        }
        match *self {
            NoiseSpec::PairConfusion { pair: (i, j), .. } => {
                Label::new(i, k)?;
                Label::new(j, k)?;
                if i == j {
                    return Err(Error::InvalidParameter("pair_confusion needs i != j".into()));
                }
            }
            NoiseSpec::BoundaryFlip { band, .. } if !(band > 0.0 && band.is_finite()) => {
                return Err(Error::InvalidParameter(format!("boundary band {band} must be > 0")));
            }
            _ => {}
        }
        Ok(())
    }
}

/// The planted labeling function.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Mlc(MlcWeights),
    HardInstance(HardInstanceSpec),
}

impl GroundTruth {
    pub fn as_mlc(&self) -> Option<&MlcWeights> {
        match self {
            GroundTruth::Mlc(w) => Some(w),
            GroundTruth::HardInstance(_) => None,
        }
    }
}

impl Classifier for GroundTruth {
    fn classify(&self, x: &[f64]) -> Label {
        match self {
            GroundTruth::Mlc(w) => w.classify(x),
            GroundTruth::HardInstance(h) => h.classify(x),
        }
    }

    fn num_classes(&self) -> u32 {
        match self {
            GroundTruth::Mlc(w) => w.k(),
            GroundTruth::HardInstance(h) => h.k(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            GroundTruth::Mlc(w) => w.d(),
            GroundTruth::HardInstance(h) => h.d(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub ground_truth: GroundTruth,
    pub noise: NoiseSpec,
    pub seed: Seed,
}

impl SourceConfig {
    pub fn new(ground_truth: GroundTruth, noise: NoiseSpec, seed: Seed) -> Self {
        SourceConfig {
            ground_truth,
            noise,
            seed,
        }
    }

    pub fn d(&self) -> usize {
        self.ground_truth.dim()
    }

    pub fn k(&self) -> u32 {
        self.ground_truth.num_classes()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub y: Label,
}

/// Result of the boundary-flip calibration pre-pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub band_mass: f64,
    pub flip_probability: f64,
    pub samples: usize,
    pub seed: Seed,
}

/// A [`NoiseSpec`] bound to a ground truth (and calibrated, for
/// boundary flips).
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    spec: NoiseSpec,
    k: u32,
    margin_model: Option<MlcWeights>,
    calibration: Option<Calibration>,
}

impl NoiseChannel {
    pub fn new(spec: NoiseSpec, truth: &GroundTruth, seed: Seed) -> Result<Self> {
        let k = truth.num_classes();
        spec.validate(k)?;
        let mut channel = NoiseChannel {
            spec: spec.clone(),
            k,
            margin_model: None,
            calibration: None,
        };
        if let NoiseSpec::BoundaryFlip { rate, band } = spec {
            let w = truth.as_mlc().ok_or_else(|| {
                Error::InvalidParameter("boundary_flip needs an MLC ground truth".into())
            })?;
            let w = w.normalized();
            let cal_seed = seed.derive(CALIBRATION_STREAM);
            let mut rng = cal_seed.rng();
            let mut x = vec![0.0; w.d()];
            let mut inside = 0usize;
            for _ in 0..CALIBRATION_SAMPLES {
                fill_gaussian(&mut x, &mut rng);
                if top_margin(&w, &x) < band {
                    inside += 1;
                }
            }
            let band_mass = inside as f64 / CALIBRATION_SAMPLES as f64;
            if band_mass < 1e-6 {
                return Err(Error::CalibrationFailure { mass: band_mass });
            }
            channel.calibration = Some(Calibration {
                band_mass,
                flip_probability: (rate / band_mass).min(1.0),
                samples: CALIBRATION_SAMPLES,
                seed: cal_seed,
            });
            channel.margin_model = Some(w);
        }
        Ok(channel)
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn calibration(&self) -> Option<Calibration> {
        self.calibration
    }

    /// Passes a clean label through the channel.
    pub fn corrupt(&self, y_clean: Label, x: &[f64], rng: &mut GaussRng) -> Label {
        match self.spec {
            NoiseSpec::None => y_clean,
            NoiseSpec::UniformFlip { rate } => {
                if rate > 0.0 && rng.random::<f64>() < rate {
                    let mut other = rng.random_range(1..self.k);
                    if other >= y_clean.get() {
                        other += 1;
                    }
                    Label::from_index(other as usize - 1)
                } else {
                    y_clean
                }
            }
            NoiseSpec::PairConfusion { rate, pair: (i, j) } => {
                let y = y_clean.get();
                if (y == i || y == j) && rate > 0.0 && rng.random::<f64>() < rate {
                    Label::from_index(if y == i { j } else { i } as usize - 1)
                } else {
                    y_clean
                }
            }
            NoiseSpec::BoundaryFlip { band, .. } => {
                let w = self.margin_model.as_ref().expect("calibrated channel");
                let q = self.calibration.expect("calibrated channel").flip_probability;
                let (top, runner_up) = w.top_two(x);
                if top == y_clean && top_margin(w, x) < band && rng.random::<f64>() < q {
                    runner_up
                } else {
                    y_clean
                }
            }
        }
    }
}

/// Multiclass margin of `x` at its predicted label; `+∞` at the origin.
fn top_margin(w: &MlcWeights, x: &[f64]) -> f64 {
    let y = w.classify(x);
    w.multiclass_margin(x, y).unwrap_or(f64::INFINITY)
}

/// Labeled examples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d: usize,
    k: u32,
    xs: Vec<f64>,
    ys: Vec<Label>,
}

impl Dataset {
    pub fn new(d: usize, k: u32) -> Self {
        Dataset {
            d,
            k,
            xs: Vec::new(),
            ys: Vec::new(),
        }
    }

    pub fn with_capacity(d: usize, k: u32, n: usize) -> Self {
        Dataset {
            d,
            k,
            xs: Vec::with_capacity(n * d),
            ys: Vec::with_capacity(n),
        }
    }

    pub fn from_examples(d: usize, k: u32, examples: &[LabeledExample]) -> Result<Self> {
        let mut out = Dataset::with_capacity(d, k, examples.len());
        for e in examples {
            out.push(&e.x, e.y)?;
        }
        Ok(out)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn x(&self, idx: usize) -> &[f64] {
        &self.xs[idx * self.d..(idx + 1) * self.d]
    }

    pub fn y(&self, idx: usize) -> Label {
        self.ys[idx]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&[f64], Label)> + '_ {
        self.xs.chunks_exact(self.d.max(1)).zip(self.ys.iter().copied())
    }

    pub fn push(&mut self, x: &[f64], y: Label) -> Result<()> {
        check_dims(self.d, x.len())?;
        Label::new(y.get(), self.k)?;
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, x: &[f64], y: Label) {
        self.xs.extend_from_slice(x);
        self.ys.push(y);
    }

    pub fn clear(&mut self) {
        self.xs.clear();
        self.ys.clear();
    }

    pub fn to_examples(&self) -> Vec<LabeledExample> {
        self.iter()
            .map(|(x, y)| LabeledExample { x: x.to_vec(), y })
            .collect()
    }

    /// Text format: a header line `gauss-mlc-dataset v1 d=<d> k=<k>`, then
    /// one `y x_1 … x_d` line per example, LF terminated.
    pub fn to_text(&self) -> String {
        let mut out = format!("gauss-mlc-dataset v1 d={} k={}\n", self.d, self.k);
        for (x, y) in self.iter() {
            let _ = write!(out, "{y}");
            for v in x {
                out.push(' ');
                out.push_str(&format_real(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let fail = |line: usize, message: String| Error::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut line = String::new();
        let read = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if read == 0 {
            return Err(fail(1, "missing header".into()));
        }
        let (d, k) = parse_header(line.trim_end_matches('\n'))
            .ok_or_else(|| fail(1, format!("bad header {:?}", line.trim_end())))?;
        let mut data = Dataset::new(d, k);
        let mut x = Vec::with_capacity(d);
        let mut lineno = 1;
        loop {
            line.clear();
            let read = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
            if read == 0 {
                break;
            }
            lineno += 1;
            let Some(body) = line.strip_suffix('\n') else {
                return Err(fail(lineno, "truncated line (missing LF)".into()));
            };
            let mut fields = body.split(' ');
            let y: u32 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| fail(lineno, "bad label".into()))?;
            let y = Label::new(y, k).map_err(|e| fail(lineno, e.to_string()))?;
            x.clear();
            for f in fields {
                let v: f64 = f
                    .parse()
                    .map_err(|_| fail(lineno, format!("bad real {f:?}")))?;
                if !v.is_finite() {
                    return Err(fail(lineno, format!("non-finite real {f:?}")));
                }
                x.push(v);
            }
            if x.len() != d {
                return Err(fail(lineno, format!("expected {d} coordinates, got {}", x.len())));
            }
            data.push_unchecked(&x, y);
        }
        Ok(data)
    }
}

fn parse_header(line: &str) -> Option<(usize, u32)> {
    let rest = line.strip_prefix("gauss-mlc-dataset v1 ")?;
    let (d, k) = rest.split_once(' ')?;
    let d: usize = d.strip_prefix("d=")?.parse().ok()?;
    let k: u32 = k.strip_prefix("k=")?.parse().ok()?;
    (d >= 1 && k >= 2).then_some((d, k))
}

pub fn save_dataset(examples: &[LabeledExample], d: usize, k: u32, path: &Path) -> Result<()> {
    Dataset::from_examples(d, k, examples)?.save(path)
}

pub fn load_dataset(path: &Path) -> Result<Vec<LabeledExample>> {
    Ok(Dataset::load(path)?.to_examples())
}

/// Stream of labeled examples.
pub trait ExampleSource: Send {
    fn dim(&self) -> usize;
    fn num_classes(&self) -> u32;

    /// Appends the next `n` examples of the stream to `out`.
    fn draw_into(&mut self, n: usize, out: &mut Dataset) -> Result<()>;

    /// Independent copy for sub-stream `stream`.
    fn fork(&self, stream: u64) -> Self
    where
        Self: Sized;

    fn draw_dataset(&mut self, n: usize) -> Result<Dataset> {
        let mut out = Dataset::with_capacity(self.dim(), self.num_classes(), n);
        self.draw_into(n, &mut out)?;
        Ok(out)
    }
}

/// The synthetic source: Gaussian marginal, planted labels, noise channel.
#[derive(Debug, Clone)]
pub struct SampleSource {
    config: Arc<SourceConfig>,
    channel: Arc<NoiseChannel>,
    seed: Seed,
    rng: GaussRng,
    drawn: u64,
}

impl SampleSource {
    pub fn new(config: SourceConfig) -> Result<Self> {
        let channel = NoiseChannel::new(config.noise.clone(), &config.ground_truth, config.seed)?;
        let seed = config.seed;
        Ok(SampleSource {
            config: Arc::new(config),
            channel: Arc::new(channel),
            seed,
            rng: seed.rng(),
            drawn: 0,
        })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.config
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.config.ground_truth
    }

    pub fn channel(&self) -> &NoiseChannel {
        &self.channel
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    /// Number of examples drawn so far.
    pub fn drawn(&self) -> u64 {
        self.drawn
    }

    pub fn draw(&mut self, n: usize) -> Vec<LabeledExample> {
        let mut out = Dataset::with_capacity(self.dim(), self.num_classes(), n);
        self.fill(n, &mut out);
        out.to_examples()
    }

    /// Draws `n` examples together with their clean labels.
    pub fn draw_with_clean(&mut self, n: usize) -> (Dataset, Vec<Label>) {
        let d = self.dim();
        let mut out = Dataset::with_capacity(d, self.num_classes(), n);
        let mut clean = Vec::with_capacity(n);
        let mut x = vec![0.0; d];
        for _ in 0..n {
            let (y_clean, y) = self.next_into(&mut x);
            out.push_unchecked(&x, y);
            clean.push(y_clean);
        }
        (out, clean)
    }

    fn next_into(&mut self, x: &mut [f64]) -> (Label, Label) {
        fill_gaussian(x, &mut self.rng);
        let y_clean = self.config.ground_truth.classify(x);
        let y = self.channel.corrupt(y_clean, x, &mut self.rng);
        self.drawn += 1;
        (y_clean, y)
    }

    fn fill(&mut self, n: usize, out: &mut Dataset) {
        let mut x = vec![0.0; self.dim()];
        for _ in 0..n {
            let (_, y) = self.next_into(&mut x);
            out.push_unchecked(&x, y);
        }
    }
}

impl ExampleSource for SampleSource {
    fn dim(&self) -> usize {
        self.config.d()
    }

    fn num_classes(&self) -> u32 {
        self.config.k()
    }

    fn draw_into(&mut self, n: usize, out: &mut Dataset) -> Result<()> {
        check_dims(self.dim(), out.d())?;
        self.fill(n, out);
        Ok(())
    }

    /// Shares the calibrated channel; only the stream seed changes.
    fn fork(&self, stream: u64) -> Self {
        let seed = self.seed.derive(stream);
        SampleSource {
            config: Arc::clone(&self.config),
            channel: Arc::clone(&self.channel),
            seed,
            rng: seed.rng(),
            drawn: 0,
        }
    }
}

/// A finite dataset read sequentially; running past the end is an error.
#[derive(Debug, Clone)]
pub struct DatasetSource {
    data: Arc<Dataset>,
    cursor: usize,
}

impl DatasetSource {
    pub fn new(data: Dataset) -> Self {
        DatasetSource {
            data: Arc::new(data),
            cursor: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.cursor
    }
}

impl ExampleSource for DatasetSource {
    fn dim(&self) -> usize {
        self.data.d()
    }

    fn num_classes(&self) -> u32 {
        self.data.k()
    }

    fn draw_into(&mut self, n: usize, out: &mut Dataset) -> Result<()> {
        check_dims(self.dim(), out.d())?;
        if n > self.remaining() {
            return Err(Error::InsufficientSamples {
                requested: self.cursor + n,
                available: self.data.len(),
            });
        }
        for idx in self.cursor..self.cursor + n {
            out.push_unchecked(self.data.x(idx), self.data.y(idx));
        }
        self.cursor += n;
        Ok(())
    }

    /// Forks restart from the beginning of the (shared, immutable) data.
    fn fork(&self, _stream: u64) -> Self {
        DatasetSource {
            data: Arc::clone(&self.data),
            cursor: 0,
        }
    }
}
