//! Hypothesis classes: multiclass linear classifiers, pseudo-MLCs voting
//! over pairwise halfspaces, the hard-instance labeling, and margins.
//!
//! Labels are 1-based (`1..=k`) in every public interface. Ties in both
//! classifiers go to the smallest label. In the pseudo-MLC the vote of `j`
//! against `i` for `j > i` uses `w_ji := −w_ij`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_dims, check_finite, dot, norm, normalize, UnitVector};
use crate::report::format_real;

/// A class label in `1..=k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(u32);

impl Label {
    pub fn new(value: u32, k: u32) -> Result<Self> {
        if value == 0 || value > k {
            return Err(Error::InvalidLabel {
                value: value as i64,
                k,
            });
        }
        Ok(Label(value))
    }

    /// Label from a 0-based class index.
    pub fn from_index(index: usize) -> Self {
        Label(index as u32 + 1)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Anything that labels points of `R^d`. Callers validate dimensions once
/// up front; `classify` itself does not re-check them.
pub trait Classifier: Sync {
    fn classify(&self, x: &[f64]) -> Label;
    fn num_classes(&self) -> u32;
    fn dim(&self) -> usize;
}

/// Pairs `(i, j)`, `1 ≤ i < j ≤ k`, in lexicographic order.
pub fn label_pairs(k: u32) -> impl Iterator<Item = (u32, u32)> {
    (1..=k).flat_map(move |i| (i + 1..=k).map(move |j| (i, j)))
}

/// Position of pair `(i, j)`, `i < j`, in [`label_pairs`] order.
pub fn pair_index(k: u32, i: u32, j: u32) -> usize {
    debug_assert!(i < j && j <= k);
    let (i, j, k) = (i as usize, j as usize, k as usize);
    (i - 1) * k - (i - 1) * i / 2 + (j - i - 1)
}

fn check_pair(k: u32, i: u32, j: u32) -> Result<()> {
    Label::new(i, k)?;
    Label::new(j, k)?;
    if i == j {
        return Err(Error::PreconditionViolated(format!(
            "pair requires distinct labels, got ({i}, {j})"
        )));
    }
    Ok(())
}

/// `f(x) = argmax_i w_i·x` over `k` rows in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlcWeights {
    d: usize,
    rows: Vec<Vec<f64>>,
}

impl MlcWeights {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "an MLC needs k >= 2 rows, got {}",
                rows.len()
            )));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::InvalidParameter("an MLC needs d >= 1".into()));
        }
        for r in &rows {
            check_dims(d, r.len())?;
            check_finite(r)?;
        }
        if rows.iter().all(|r| r == &rows[0]) {
            return Err(Error::InvalidParameter(
                "all MLC rows are identical; every prediction would tie".into(),
            ));
        }
        Ok(MlcWeights { d, rows })
    }

    pub fn k(&self) -> u32 {
        self.rows.len() as u32
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, label: Label) -> &[f64] {
        &self.rows[label.index()]
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|w| dot(w, x)).collect()
    }

    pub fn mlc_predict(&self, x: &[f64]) -> Result<Label> {
        check_dims(self.d, x.len())?;
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> Label {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (idx, w) in self.rows.iter().enumerate() {
            let s = dot(w, x);
            if s > best_score {
                best = idx;
                best_score = s;
            }
        }
        Label::from_index(best)
    }

    /// Predicted label and the runner-up (best other label), smallest index
    /// on ties.
    pub fn top_two(&self, x: &[f64]) -> (Label, Label) {
        let scores = self.scores(x);
        let first = argmax_first(&scores);
        let second = argmax_first_excluding(&scores, first);
        (Label::from_index(first), Label::from_index(second))
    }

    /// Unit normal `(w_i − w_j)/‖w_i − w_j‖` of the `i`-vs-`j` boundary.
    pub fn pairwise_boundary_direction(&self, i: u32, j: u32) -> Result<UnitVector> {
        check_pair(self.k(), i, j)?;
        let diff: Vec<f64> = self.rows[i as usize - 1]
            .iter()
            .zip(&self.rows[j as usize - 1])
            .map(|(a, b)| a - b)
            .collect();
        normalize(&diff).map_err(|_| Error::DegeneratePair { i, j })
    }

    /// `min_{j≠y}(w_y·x − w_j·x)/‖x‖`. The value is scale dependent; it is
    /// meaningful under the normalization `Σ‖w_i‖² ≤ 1` (see
    /// [`MlcWeights::normalized`]).
    pub fn multiclass_margin(&self, x: &[f64], y: Label) -> Result<f64> {
        check_dims(self.d, x.len())?;
        Label::new(y.get(), self.k())?;
        let nx = norm(x);
        if nx < crate::geometry::ZERO_NORM {
            return Err(Error::ZeroVector { norm: nx });
        }
        let scores = self.scores(x);
        let sy = scores[y.index()];
        let gap = scores
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != y.index())
            .map(|(_, s)| sy - s)
            .fold(f64::INFINITY, f64::min);
        Ok(gap / nx)
    }

    /// Same classifier rescaled so that `Σ‖w_i‖² = 1`.
    pub fn normalized(&self) -> MlcWeights {
        let total: f64 = self.rows.iter().map(|r| dot(r, r)).sum::<f64>().sqrt();
        MlcWeights {
            d: self.d,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| v / total).collect())
                .collect(),
        }
    }
}

impl Classifier for MlcWeights {
    fn classify(&self, x: &[f64]) -> Label {
        self.predict_unchecked(x)
    }

    fn num_classes(&self) -> u32 {
        self.k()
    }

    fn dim(&self) -> usize {
        self.d
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn argmax_first_excluding(values: &[f64], skip: usize) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in values.iter().enumerate() {
        if i != skip && (best == usize::MAX || v > values[best]) {
            best = i;
        }
    }
    best
}

/// `k(k−1)/2` unit normals `w_ij`, `i < j`; class `i` wins the `(i, j)`
/// comparison at `x` iff `w_ij·x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoMlcWeights {
    k: u32,
    d: usize,
    pairs: Vec<UnitVector>,
}

impl PseudoMlcWeights {
    /// `pairs` must be given in [`label_pairs`] order.
    pub fn new(k: u32, pairs: Vec<UnitVector>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("pseudo-MLC needs k >= 2, got {k}")));
        }
        let expected = (k * (k - 1) / 2) as usize;
        if pairs.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "pseudo-MLC with k = {k} needs {expected} pair normals, got {}",
                pairs.len()
            )));
        }
        let d = pairs[0].dim();
        for p in &pairs {
            check_dims(d, p.dim())?;
        }
        Ok(PseudoMlcWeights { k, d, pairs })
    }

    /// The pseudo-MLC whose pair normals are the boundary directions of `w`.
    pub fn from_mlc(w: &MlcWeights) -> Result<Self> {
        let pairs = label_pairs(w.k())
            .map(|(i, j)| w.pairwise_boundary_direction(i, j))
            .collect::<Result<Vec<_>>>()?;
        PseudoMlcWeights::new(w.k(), pairs)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Normal for `i < j`.
    pub fn pair(&self, i: u32, j: u32) -> &UnitVector {
        &self.pairs[pair_index(self.k, i, j)]
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((u32, u32), &UnitVector)> {
        label_pairs(self.k).zip(self.pairs.iter())
    }

    /// Tournament scores `s_i(x) = Σ_{j≠i} 1{w_ij·x ≥ 0}`.
    pub fn votes(&self, x: &[f64]) -> Vec<u32> {
        let k = self.k as usize;
        let mut s = vec![0u32; k];
        for ((i, j), w) in self.pairs() {
            let v = dot(w, x);
            if v >= 0.0 {
                s[i as usize - 1] += 1;
            }
            if -v >= 0.0 {
                s[j as usize - 1] += 1;
            }
        }
        s
    }

    pub fn pseudo_predict(&self, x: &[f64]) -> Result<Label> {
        check_dims(self.d, x.len())?;
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> Label {
        let s = self.votes(x);
        let mut best = 0;
        for (i, &v) in s.iter().enumerate() {
            if v > s[best] {
                best = i;
            }
        }
        Label::from_index(best)
    }
}

impl Classifier for PseudoMlcWeights {
    fn classify(&self, x: &[f64]) -> Label {
        self.predict_unchecked(x)
    }

    fn num_classes(&self) -> u32 {
        self.k
    }

    fn dim(&self) -> usize {
        self.d
    }
}

/// `f(x) = min{i ≤ k : x_i > 0}`, or `k` when no such `i` exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardInstanceSpec {
    k: u32,
    d: usize,
}

impl HardInstanceSpec {
    pub fn new(k: u32, d: usize) -> Result<Self> {
        if k < 2 || (k as usize) > d {
            return Err(Error::InvalidParameter(format!(
                "hard instance needs 2 <= k <= d, got k = {k}, d = {d}"
            )));
        }
        Ok(HardInstanceSpec { k, d })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn hard_instance_predict(&self, x: &[f64]) -> Result<Label> {
        check_dims(self.d, x.len())?;
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> Label {
        let k = self.k as usize;
        let idx = x[..k].iter().position(|&v| v > 0.0).unwrap_or(k - 1);
        Label::from_index(idx)
    }
}

impl Classifier for HardInstanceSpec {
    fn classify(&self, x: &[f64]) -> Label {
        self.predict_unchecked(x)
    }

    fn num_classes(&self) -> u32 {
        self.k
    }

    fn dim(&self) -> usize {
        self.d
    }
}

/// `y(w·x)/‖x‖` for `y ∈ {+1, −1}`.
pub fn binary_margin(w: &UnitVector, x: &[f64], y: i8) -> Result<f64> {
    check_dims(w.dim(), x.len())?;
    if y != 1 && y != -1 {
        return Err(Error::InvalidParameter(format!("binary label must be ±1, got {y}")));
    }
    let nx = norm(x);
    if nx < crate::geometry::ZERO_NORM {
        return Err(Error::ZeroVector { norm: nx });
    }
    Ok((f64::from(y) * dot(w, x) / nx).clamp(-1.0, 1.0))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairEntry {
    i: u32,
    j: u32,
    w: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ModelFile {
    Mlc {
        k: u32,
        d: usize,
        weights: Vec<Vec<f64>>,
    },
    Pseudo {
        k: u32,
        d: usize,
        pairs: Vec<PairEntry>,
    },
}

/// A serialized model: either kind of classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlc(MlcWeights),
    Pseudo(PseudoMlcWeights),
}

impl Model {
    pub fn k(&self) -> u32 {
        match self {
            Model::Mlc(w) => w.k(),
            Model::Pseudo(w) => w.k(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Model::Mlc(w) => w.d(),
            Model::Pseudo(w) => w.d(),
        }
    }

    /// JSON with 17-significant-digit reals:
    /// `{"kind":"mlc","k":..,"d":..,"weights":[[..],..]}` or
    /// `{"kind":"pseudo","k":..,"d":..,"pairs":[{"i":..,"j":..,"w":[..]},..]}`.
    pub fn to_json(&self) -> String {
        fn vector(v: &[f64]) -> String {
            let parts: Vec<String> = v.iter().map(|x| format_real(*x)).collect();
            format!("[{}]", parts.join(","))
        }
        match self {
            Model::Mlc(w) => {
                let rows: Vec<String> = w.rows().iter().map(|r| vector(r)).collect();
                format!(
                    "{{\"kind\":\"mlc\",\"k\":{},\"d\":{},\"weights\":[{}]}}\n",
                    w.k(),
                    w.d(),
                    rows.join(",")
                )
            }
            Model::Pseudo(w) => {
                let pairs: Vec<String> = w
                    .pairs()
                    .map(|((i, j), p)| format!("{{\"i\":{i},\"j\":{j},\"w\":{}}}", vector(p)))
                    .collect();
                format!(
                    "{{\"kind\":\"pseudo\",\"k\":{},\"d\":{},\"pairs\":[{}]}}\n",
                    w.k(),
                    w.d(),
                    pairs.join(",")
                )
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        match serde_json::from_str::<ModelFile>(text)? {
            ModelFile::Mlc { k, d, weights } => {
                let w = MlcWeights::new(weights)?;
                if w.k() != k || w.d() != d {
                    return Err(Error::InvalidParameter(format!(
                        "model header says k = {k}, d = {d}; weights are {}x{}",
                        w.k(),
                        w.d()
                    )));
                }
                Ok(Model::Mlc(w))
            }
            ModelFile::Pseudo { k, d, mut pairs } => {
                pairs.sort_by_key(|p| (p.i, p.j));
                let expected: Vec<(u32, u32)> = label_pairs(k).collect();
                let got: Vec<(u32, u32)> = pairs.iter().map(|p| (p.i, p.j)).collect();
                if expected != got {
                    return Err(Error::InvalidParameter(
                        "pseudo model must list each pair i < j exactly once".into(),
                    ));
                }
                let normals = pairs
                    .into_iter()
                    .map(|p| {
                        check_dims(d, p.w.len())?;
                        UnitVector::new(p.w)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Pseudo(PseudoMlcWeights::new(k, normals)?))
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}

impl Classifier for Model {
    fn classify(&self, x: &[f64]) -> Label {
        match self {
            Model::Mlc(w) => w.classify(x),
            Model::Pseudo(w) => w.classify(x),
        }
    }

    fn num_classes(&self) -> u32 {
        self.k()
    }

    fn dim(&self) -> usize {
        self.d()
    }
}
