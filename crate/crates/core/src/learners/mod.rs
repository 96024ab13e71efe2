//! The learners: multiclass perceptron, pairwise projected gradient descent
//! on the sphere (global and localized), the tournament aggregator and
//! empirical hypothesis selection.

mod aggregate;
mod config;
mod pairwise;
mod perceptron;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate_train, AggregateResult, PairResult};
pub use config::{
    localk_phi0, localk_sigma, unit_grid, AngleSchedule, DeskScale, Preset, Schedule, TrainConfig,
};
pub use pairwise::{
    pairwise_init_train, pairwise_local3_train, pairwise_localk_train, GeometryGuess, PairOutput,
};
pub use perceptron::{perceptron_step, perceptron_train, PerceptronResult};

use crate::data::{Dataset, ExampleSource};
use crate::error::{Error, Result};
use crate::geometry::{dot, max_draws, LocalizationSpec, UnitVector};
use crate::metrics::pair_mistake;
use crate::model::Label;
use crate::report::{Cell, CsvTable};
use crate::rng::GaussRng;

/// Which pairwise learner the aggregator runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Init,
    Local3,
    Localk(GeometryMode),
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Init => "init",
            LearnerKind::Local3 => "local3",
            LearnerKind::Localk(_) => "localk",
        }
    }
}

/// Geometry input of the general-`k` learner, for every pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryMode {
    /// `(T̂_ij, Φ̂_ij)` for each pair `i < j`, in pair order.
    Oracle(Vec<(f64, f64)>),
    Grid,
}

/// One iterate of a pairwise run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Restart, `σ` value or geometry guess this iterate belongs to.
    pub run: usize,
    /// Iteration within the run; `0` is the initial point.
    pub t: usize,
    pub w: UnitVector,
    pub sigma: Option<f64>,
    pub phi: Option<f64>,
    /// Norm of the projected gradient estimate taken at `w`, and its
    /// standard error. Absent for the last iterate of a run.
    pub grad_norm: Option<f64>,
    pub grad_std_err: Option<f64>,
    /// Empirical `(i, j)`-error on the selection sample this iterate
    /// competed on.
    pub val_err: f64,
    pub wall_ms: f64,
}

/// Iterates of one pairwise training in the order they were produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterateTrace {
    pub records: Vec<TraceRecord>,
    /// Index into `records` of the returned hypothesis.
    pub selected: usize,
    /// Raw examples drawn from the source, including rejected ones.
    pub samples_drawn: u64,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn output(&self) -> &UnitVector {
        &self.records[self.selected].w
    }

    /// Largest `‖ĝ‖ − 5·s.e.` over the trace, for the gradient-norm bound.
    pub fn max_grad_excess(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| Some(r.grad_norm? - 5.0 * r.grad_std_err?))
            .reduce(f64::max)
    }
}

pub const TRACE_HEADER: [&str; 9] = ["run_id", "algo", "i", "j", "t", "sigma_t", "phi_t", "val_err", "wall_ms"];

/// Appends the trace to a CSV table with [`TRACE_HEADER`]. `t` is the
/// position of the iterate in the trace. Wall-clock times are written only
/// when `timing` is set, so that untimed exports are reproducible.
pub fn trace_rows(table: &mut CsvTable, run_id: &str, algo: &str, i: u32, j: u32, trace: &IterateTrace, timing: bool) {
    for (t, r) in trace.records.iter().enumerate() {
        table.push(vec![
            run_id.into(),
            algo.into(),
            i.into(),
            j.into(),
            t.into(),
            r.sigma.into(),
            r.phi.into(),
            r.val_err.into(),
            Cell::Real(if timing { r.wall_ms } else { 0.0 }),
        ]);
    }
}

pub fn trace_table() -> CsvTable {
    CsvTable::new(TRACE_HEADER)
}

/// Stopwatch for trace timestamps.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Clock(Instant);

impl Clock {
    pub(crate) fn start() -> Self {
        Clock(Instant::now())
    }

    pub(crate) fn ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1e3
    }
}

/// Draws `n` examples from `source`, keeping each with the localization
/// acceptance probability when `spec` is given. Accepted points are
/// appended to `out`; returns the number of raw draws.
pub(crate) fn draw_batch<S: ExampleSource>(
    source: &mut S,
    spec: Option<&LocalizationSpec>,
    n: usize,
    rng: &mut GaussRng,
    out: &mut Dataset,
    scratch: &mut Dataset,
) -> Result<u64> {
    out.clear();
    let Some(spec) = spec.filter(|s| s.sigma() < 1.0) else {
        source.draw_into(n, out)?;
        return Ok(n as u64);
    };
    let cap = max_draws(n, spec.sigma());
    let mut draws = 0usize;
    while out.len() < n {
        if draws >= cap {
            return Err(Error::AcceptanceStarvation {
                wanted: n,
                accepted: out.len(),
                draws,
            });
        }
        let missing = n - out.len();
        let block = (missing as f64 / spec.sigma()).ceil() as usize + 16;
        let block = block.min(cap - draws);
        scratch.clear();
        source.draw_into(block, scratch)?;
        draws += block;
        for (x, y) in scratch.iter() {
            if out.len() == n {
                break;
            }
            let u: f64 = rng.random();
            if spec.localized_accept(x, u) {
                out.push_unchecked(x, y);
            }
        }
    }
    Ok(draws as u64)
}

/// Projected gradient estimate
/// `proj_{w⊥} (1/N) Σ x (1{y=i, w·x ≤ 0} − 1{y=j, w·x ≥ 0})`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    /// `‖g‖`
    pub norm: f64,
    /// Root-mean-square estimation error of `g`: `√(tr Ĉov / N)`.
    pub std_err: f64,
    /// Fraction of the batch labeled `i` or `j`.
    pub pair_fraction: f64,
}

pub fn pgd_gradient(batch: &Dataset, w: &UnitVector, i: Label, j: Label) -> Result<GradientEstimate> {
    if batch.is_empty() {
        return Err(Error::EmptySample);
    }
    crate::geometry::check_dims(w.dim(), batch.d())?;
    let mut g = vec![0.0; w.dim()];
    let mut sum_sq = 0.0;
    let mut in_pair = 0usize;
    for (x, y) in batch.iter() {
        in_pair += (y == i || y == j) as usize;
        let s = dot(w, x);
        let sign = if y == i && s <= 0.0 {
            1.0
        } else if y == j && s >= 0.0 {
            -1.0
        } else {
            continue;
        };
        crate::geometry::axpy(sign, x, &mut g);
        sum_sq += dot(x, x) - s * s;
    }
    let n = batch.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    let along = dot(&g, w);
    crate::geometry::axpy(-along, w, &mut g);
    let norm = crate::geometry::norm(&g);
    let var = (sum_sq / n - norm * norm).max(0.0);
    Ok(GradientEstimate {
        g,
        norm,
        std_err: (var / n).sqrt(),
        pair_fraction: in_pair as f64 / n,
    })
}

/// Outcome of [`hypothesis_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    /// Empirical `(i, j)`-error of every candidate.
    pub errors: Vec<f64>,
    pub n: usize,
}

/// Index of the candidate with the smallest empirical `(i, j)`-error on a
/// fresh sample of size `n_sel`; ties go to the smallest index.
pub fn hypothesis_select<S: ExampleSource>(
    candidates: &[UnitVector],
    source: &mut S,
    i: Label,
    j: Label,
    n_sel: usize,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if n_sel == 0 {
        return Err(Error::PreconditionViolated("selection needs n_sel >= 1".into()));
    }
    let sample = source.draw_dataset(n_sel)?;
    select_on(candidates, &sample, i, j)
}

pub(crate) fn select_on(candidates: &[UnitVector], sample: &Dataset, i: Label, j: Label) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    // Only examples labeled i or j can be misclassified.
    let relevant: Vec<(&[f64], Label)> = sample.iter().filter(|(_, y)| *y == i || *y == j).collect();
    let n = sample.len();
    let errors: Vec<f64> = candidates
        .iter()
        .map(|w| {
            let wrong = relevant.iter().filter(|(x, y)| pair_mistake(w, x, *y, i, j)).count();
            wrong as f64 / n as f64
        })
        .collect();
    let mut index = 0;
    for (c, e) in errors.iter().enumerate() {
        if *e < errors[index] {
            index = c;
        }
    }
    Ok(Selection { index, errors, n })
}
