//! Pairwise projected-gradient learners.
//!
//! All three share one inner loop: at the current iterate `w`, draw `N`
//! examples (optionally localized around `w·x = 0`), form the projected
//! gradient estimate and retract `w ← normalize(w + μ·ĝ)`. They differ in
//! how runs are started, how the bandwidth evolves and how iterates are
//! selected.

use std::ops::Range;

use crate::data::{Dataset, ExampleSource};
use crate::error::{Error, Result};
use crate::geometry::{sample_unit_vector, sphere_retract, LocalizationSpec, UnitVector};
use crate::model::Label;
use crate::rng::{GaussRng, Seed};

use super::config::{AngleSchedule, Schedule, TrainConfig};
use super::{draw_batch, pgd_gradient, select_on, Clock, IterateTrace, TraceRecord};

/// Geometry input of [`pairwise_localk_train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryGuess {
    Oracle { t_hat: f64, phi_hat: f64 },
    Grid,
}

/// A trained pairwise separator with its trace and instantiated constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PairOutput {
    pub w: UnitVector,
    pub trace: IterateTrace,
    pub schedule: Schedule,
    /// `σ` grid (three-class learner) or one entry per run otherwise.
    pub sigmas: Vec<f64>,
    /// Angle schedules of the general-`k` learner, one per geometry guess.
    pub angles: Vec<AngleSchedule>,
    pub warm_start: Option<Box<PairOutput>>,
}

struct Runner<'a, S> {
    source: &'a mut S,
    rng: GaussRng,
    i: Label,
    j: Label,
    clock: Clock,
    trace: IterateTrace,
    batch: Dataset,
    scratch: Dataset,
}

impl<'a, S: ExampleSource> Runner<'a, S> {
    fn new(source: &'a mut S, i: Label, j: Label, seed: Seed) -> Result<Self> {
        let k = source.num_classes();
        for l in [i, j] {
            Label::new(l.get(), k)?;
        }
        if i == j {
            return Err(Error::PreconditionViolated(format!("pairwise learner needs i != j, got {i}")));
        }
        let d = source.dim();
        Ok(Runner {
            source,
            rng: seed.rng(),
            i,
            j,
            clock: Clock::start(),
            trace: IterateTrace::default(),
            batch: Dataset::new(d, k),
            scratch: Dataset::new(d, k),
        })
    }

    fn d(&self) -> usize {
        self.source.dim()
    }

    /// `T` projected-gradient steps from `w0`. `bandwidth(t)` gives the
    /// localization `σ_t` (or `None`) and the angle `φ_t` to log.
    fn run(
        &mut self,
        run: usize,
        w0: UnitVector,
        schedule: &Schedule,
        bandwidth: impl Fn(usize) -> (Option<f64>, Option<f64>),
    ) -> Result<Range<usize>> {
        let start = self.trace.records.len();
        let mut w = w0;
        for t in 0..=schedule.t {
            let (sigma, phi) = bandwidth(t);
            let mut record = TraceRecord {
                run,
                t,
                w: w.clone(),
                sigma,
                phi,
                grad_norm: None,
                grad_std_err: None,
                val_err: f64::NAN,
                wall_ms: 0.0,
            };
            if t < schedule.t {
                let spec = match sigma {
                    Some(s) => Some(LocalizationSpec::new(w.clone(), s)?),
                    None => None,
                };
                self.trace.samples_drawn += draw_batch(
                    self.source,
                    spec.as_ref(),
                    schedule.n,
                    &mut self.rng,
                    &mut self.batch,
                    &mut self.scratch,
                )?;
                let g = pgd_gradient(&self.batch, &w, self.i, self.j)?;
                record.grad_norm = Some(g.norm);
                record.grad_std_err = Some(g.std_err);
                let mu = if schedule.conditional_step {
                    schedule.mu / g.pair_fraction.max(1.0 / schedule.n as f64)
                } else {
                    schedule.mu
                };
                w = sphere_retract(&w, mu, &g.g)?;
            }
            record.wall_ms = self.clock.ms();
            self.trace.records.push(record);
        }
        Ok(start..self.trace.records.len())
    }

    /// Selects among the given records on a fresh sample of size `n_sel`,
    /// writing their validation errors. Returns the winning record index.
    fn select(&mut self, records: &[usize], n_sel: usize) -> Result<usize> {
        let sample = self.source.draw_dataset(n_sel)?;
        self.trace.samples_drawn += n_sel as u64;
        let candidates: Vec<UnitVector> = records.iter().map(|&r| self.trace.records[r].w.clone()).collect();
        let sel = select_on(&candidates, &sample, self.i, self.j)?;
        for (&r, e) in records.iter().zip(&sel.errors) {
            self.trace.records[r].val_err = *e;
        }
        Ok(records[sel.index])
    }

    fn finish(mut self, selected: usize) -> IterateTrace {
        self.trace.selected = selected;
        self.trace
    }
}

fn labels(i: u32, j: u32) -> (Label, Label) {
    (Label::from_index(i.saturating_sub(1) as usize), Label::from_index(j.saturating_sub(1) as usize))
}

fn check_labels(k: u32, i: u32, j: u32) -> Result<()> {
    Label::new(i, k)?;
    Label::new(j, k)?;
    Ok(())
}

/// Global pairwise learner: `R` restarts from uniform random unit vectors,
/// `T` gradient steps each, then selection over every iterate.
pub fn pairwise_init_train<S: ExampleSource>(source: &mut S, i: u32, j: u32, cfg: &TrainConfig) -> Result<PairOutput> {
    cfg.validate()?;
    check_labels(source.num_classes(), i, j)?;
    let (li, lj) = labels(i, j);
    let schedule = cfg.init_schedule(source.dim());
    let mut runner = Runner::new(source, li, lj, cfg.seed)?;
    for r in 0..schedule.runs {
        let w0 = sample_unit_vector(runner.d(), &mut runner.rng);
        runner.run(r, w0, &schedule, |_| (None, None))?;
    }
    let all: Vec<usize> = (0..runner.trace.records.len()).collect();
    let selected = runner.select(&all, schedule.n_sel)?;
    let trace = runner.finish(selected);
    Ok(PairOutput {
        w: trace.output().clone(),
        trace,
        schedule,
        sigmas: vec![1.0; schedule.runs],
        angles: Vec::new(),
        warm_start: None,
    })
}

/// Three-class localized learner: one run per `σ` in the grid, each from
/// its own random start with fixed bandwidth `σ`; the best iterate of each
/// run is chosen on a fresh sample, then the best of those on another.
pub fn pairwise_local3_train<S: ExampleSource>(source: &mut S, i: u32, j: u32, cfg: &TrainConfig) -> Result<PairOutput> {
    cfg.validate()?;
    if source.num_classes() != 3 {
        return Err(Error::PreconditionViolated(format!(
            "the three-class localized learner needs k = 3, got {}",
            source.num_classes()
        )));
    }
    check_labels(3, i, j)?;
    let (li, lj) = labels(i, j);
    let schedule = cfg.local3_schedule(source.dim());
    let sigmas = cfg.sigma_grid();
    let mut runner = Runner::new(source, li, lj, cfg.seed)?;
    let mut winners = Vec::with_capacity(sigmas.len());
    for (r, &sigma) in sigmas.iter().enumerate() {
        let w0 = sample_unit_vector(runner.d(), &mut runner.rng);
        let range = runner.run(r, w0, &schedule, |_| (Some(sigma), None))?;
        let members: Vec<usize> = range.collect();
        winners.push(runner.select(&members, schedule.n_sel)?);
    }
    let selected = if winners.len() == 1 {
        winners[0]
    } else {
        final_select(&mut runner, &winners, schedule.n_sel)?
    };
    let trace = runner.finish(selected);
    Ok(PairOutput {
        w: trace.output().clone(),
        trace,
        schedule,
        sigmas,
        angles: Vec::new(),
        warm_start: None,
    })
}

/// Selection among run winners; their per-run validation errors are kept.
fn final_select<S: ExampleSource>(runner: &mut Runner<'_, S>, winners: &[usize], n_sel: usize) -> Result<usize> {
    let sample = runner.source.draw_dataset(n_sel)?;
    runner.trace.samples_drawn += n_sel as u64;
    let candidates: Vec<UnitVector> = winners.iter().map(|&r| runner.trace.records[r].w.clone()).collect();
    let sel = select_on(&candidates, &sample, runner.i, runner.j)?;
    Ok(winners[sel.index])
}

/// General-`k` localized learner. Warm-starts from the global learner at
/// reduced `ε`, then for each geometry guess `(T̂, Φ̂)` shrinks the angle
/// budget `φ_t` from `φ₀` and localizes with `σ_t = min(3 sin φ_t/√T̂, 1)`.
pub fn pairwise_localk_train<S: ExampleSource>(
    source: &mut S,
    i: u32,
    j: u32,
    cfg: &TrainConfig,
    geometry: GeometryGuess,
) -> Result<PairOutput> {
    cfg.validate()?;
    let k = source.num_classes();
    check_labels(k, i, j)?;
    let guesses = match geometry {
        GeometryGuess::Oracle { t_hat, phi_hat } => vec![(t_hat, phi_hat)],
        GeometryGuess::Grid => cfg.geometry_grid(),
    };
    let d = source.dim();
    let plans = guesses
        .iter()
        .map(|&(t, p)| cfg.localk_schedule(d, k, t, p, guesses.len()))
        .collect::<Result<Vec<_>>>()?;

    let warm_cfg = cfg
        .with_accuracy(cfg.warm_start_epsilon(), cfg.delta)
        .with_seed(cfg.seed.derive(1));
    let warm = pairwise_init_train(source, i, j, &warm_cfg)?;

    let (li, lj) = labels(i, j);
    let mut runner = Runner::new(source, li, lj, cfg.seed.derive(2))?;
    runner.trace.samples_drawn = warm.trace.samples_drawn;
    let mut winners = Vec::with_capacity(plans.len());
    for (g, (schedule, angles)) in plans.iter().enumerate() {
        let range = runner.run(g, warm.w.clone(), schedule, |t| {
            let sigma = angles.sigma(t);
            (Some(sigma), Some(angles.phi(t)))
        })?;
        let members: Vec<usize> = range.collect();
        winners.push(runner.select(&members, schedule.n_sel)?);
    }
    let selected = if winners.len() == 1 {
        winners[0]
    } else {
        final_select(&mut runner, &winners, plans[0].0.n_sel)?
    };
    let trace = runner.finish(selected);
    Ok(PairOutput {
        w: trace.output().clone(),
        trace,
        schedule: plans[0].0,
        sigmas: plans.iter().map(|(_, a)| a.sigma(0)).collect(),
        angles: plans.iter().map(|(_, a)| *a).collect(),
        warm_start: Some(Box::new(warm)),
    })
}
