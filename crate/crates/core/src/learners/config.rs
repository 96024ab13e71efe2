//! Training configuration and the instantiation of every size the
//! algorithms leave as `poly(1/ε)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Which family of sample sizes to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Sizes read off the convergence proofs. Astronomically large for any
    /// interesting `ε`; useful mainly to report what the analysis asks for.
    Theory,
    /// Workstation sizes; see [`DeskScale`].
    #[default]
    Desk,
}

/// Knobs of the desk preset.
///
/// Step sizes are fixed constants instead of `ε²/C`; per-iteration sample
/// sizes scale like `d·ln(2/δ)/ε` and iteration counts like `ln(1/ε)/μ`,
/// each clamped to a range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeskScale {
    /// Step size of the global learner.
    pub step: f64,
    /// Step size of the localized learners.
    pub local_step: f64,
    pub n_scale: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub t_scale: f64,
    pub t_min: usize,
    pub t_max: usize,
    pub selection_scale: f64,
    pub selection_min: usize,
    pub selection_max: usize,
    pub max_restarts: usize,
    /// Lower bound on the spacing of the `σ` grid of the three-class learner.
    pub sigma_spacing: f64,
    /// Lower bound on every localization bandwidth.
    pub sigma_floor: f64,
    /// Lower bound on the spacing of the `(T̂, Φ̂)` guess grid.
    pub geometry_spacing: f64,
    /// The warm start runs the global learner at `ε / warm_start_divisor`.
    pub warm_start_divisor: f64,
    /// See [`Schedule::conditional_step`].
    pub conditional_step: bool,
}

impl Default for DeskScale {
    fn default() -> Self {
        DeskScale {
            step: 0.5,
            local_step: 0.5,
            n_scale: 0.05,
            n_min: 200,
            n_max: 5_000,
            t_scale: 4.0,
            t_min: 20,
            t_max: 2_000,
            selection_scale: 10.0,
            selection_min: 2_000,
            selection_max: 200_000,
            max_restarts: 3,
            sigma_spacing: 0.1,
            sigma_floor: 0.1,
            geometry_spacing: 0.25,
            warm_start_divisor: 10.0,
            conditional_step: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// The constant `C` of the step sizes and iteration counts.
    pub big_c: f64,
    pub n_override: Option<usize>,
    pub t_override: Option<usize>,
    pub selection_n_override: Option<usize>,
    pub preset: Preset,
    pub desk: DeskScale,
    pub seed: Seed,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epsilon: 0.05,
            delta: 0.1,
            big_c: 10.0,
            n_override: None,
            t_override: None,
            selection_n_override: None,
            preset: Preset::Desk,
            desk: DeskScale::default(),
            seed: Seed(0),
        }
    }
}

/// Sizes of one projected-gradient run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    /// Examples per gradient estimate.
    pub n: usize,
    /// Iterations per run.
    pub t: usize,
    pub mu: f64,
    /// Independent runs (restarts, `σ` values or geometry guesses).
    pub runs: usize,
    /// Selection sample size.
    pub n_sel: usize,
    /// Divide the step by the fraction of the batch labeled `i` or `j`,
    /// i.e. descend on the distribution conditioned on those two labels.
    pub conditional_step: bool,
}

/// The `φ`/`σ` schedule of the general-`k` localized learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleSchedule {
    pub t_hat: f64,
    pub phi_hat: f64,
    pub phi0: f64,
    pub eta_step: f64,
    pub sigma_floor: f64,
}

impl AngleSchedule {
    /// `φ_t = max(φ₀ − t·η_step, 0)`
    pub fn phi(&self, t: usize) -> f64 {
        (self.phi0 - t as f64 * self.eta_step).max(0.0)
    }

    /// `σ_t = min(3 sin φ_t / √T̂, 1)`, floored at `sigma_floor`.
    pub fn sigma(&self, t: usize) -> f64 {
        localk_sigma(self.phi(t), self.t_hat).max(self.sigma_floor)
    }
}

/// `min(3 sin φ / √T̂, 1)`
pub fn localk_sigma(phi: f64, t_hat: f64) -> f64 {
    (3.0 * phi.sin() / t_hat.sqrt()).min(1.0)
}

/// `T̂²Φ̂ / (10 √ln(k+1))`
pub fn localk_phi0(t_hat: f64, phi_hat: f64, k: u32) -> f64 {
    t_hat * t_hat * phi_hat / (10.0 * ((k + 1) as f64).ln().sqrt())
}

/// `{ℓh : 1 ≤ ℓ ≤ ⌈1/h⌉} ∩ (0, 1]`
pub fn unit_grid(h: f64) -> Vec<f64> {
    let count = (1.0 / h - 1e-9).ceil() as usize;
    (1..=count)
        .map(|l| l as f64 * h)
        .filter(|&s| s <= 1.0 + 1e-12)
        .map(|s| s.min(1.0))
        .collect()
}

fn count(x: f64) -> usize {
    if x >= usize::MAX as f64 {
        usize::MAX
    } else {
        x.ceil().max(1.0) as usize
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::PreconditionViolated(format!("{name} = {v} outside (0, 1)")))
            }
        };
        open_unit("epsilon", self.epsilon)?;
        open_unit("delta", self.delta)?;
        if !(self.big_c >= 2.0 && self.big_c.is_finite()) {
            return Err(Error::PreconditionViolated(format!("big_c = {} must be >= 2", self.big_c)));
        }
        for (name, v) in [
            ("n_override", self.n_override),
            ("t_override", self.t_override),
            ("selection_n_override", self.selection_n_override),
        ] {
            if v == Some(0) {
                return Err(Error::PreconditionViolated(format!("{name} must be >= 1")));
            }
        }
        let s = &self.desk;
        let positive = [
            s.step,
            s.local_step,
            s.n_scale,
            s.t_scale,
            s.selection_scale,
            s.sigma_spacing,
            s.sigma_floor,
            s.geometry_spacing,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || s.sigma_floor > 1.0
            || s.warm_start_divisor < 1.0
            || s.max_restarts == 0
            || s.n_min > s.n_max
            || s.t_min > s.t_max
            || s.selection_min > s.selection_max
        {
            return Err(Error::InvalidParameter(format!("invalid desk scale {s:?}")));
        }
        Ok(())
    }

    /// Copy with different accuracy and confidence.
    pub fn with_accuracy(&self, epsilon: f64, delta: f64) -> TrainConfig {
        TrainConfig {
            epsilon,
            delta,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: Seed) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.clone()
        }
    }

    fn desk_n(&self, d: usize) -> usize {
        let s = &self.desk;
        let raw = s.n_scale * d as f64 * (2.0 / self.delta).ln() / self.epsilon;
        count(raw).clamp(s.n_min, s.n_max)
    }

    fn desk_t(&self, mu: f64) -> usize {
        let s = &self.desk;
        count(s.t_scale * (1.0 / self.epsilon).ln() / mu).clamp(s.t_min, s.t_max)
    }

    /// Selection sample size for choosing among `candidates` hypotheses.
    pub fn selection_size(&self, candidates: usize) -> usize {
        if let Some(n) = self.selection_n_override {
            return n;
        }
        let log_term = (2.0 * candidates.max(1) as f64 / self.delta).ln();
        match self.preset {
            Preset::Theory => count(2.0 * log_term / (self.epsilon * self.epsilon)),
            Preset::Desk => {
                let s = &self.desk;
                count(s.selection_scale * log_term / self.epsilon).clamp(s.selection_min, s.selection_max)
            }
        }
    }

    fn finish(&self, mut schedule: Schedule) -> Schedule {
        if let Some(n) = self.n_override {
            schedule.n = n;
        }
        if let Some(t) = self.t_override {
            schedule.t = t;
        }
        schedule.n_sel = self.selection_size(schedule.runs * (schedule.t + 1));
        schedule.conditional_step = self.preset == Preset::Desk && self.desk.conditional_step;
        schedule
    }

    /// Restarts of the global learner: `⌈log₂(3/δ)⌉`.
    pub fn restarts(&self) -> usize {
        let r = count((3.0 / self.delta).log2());
        match self.preset {
            Preset::Theory => r,
            Preset::Desk => r.min(self.desk.max_restarts),
        }
    }

    /// Global pairwise learner: `μ = ε²/C`, `N = ⌈4d·ln(2/δ)/ε⁶⌉`,
    /// `T = ⌈4C/ε⁶⌉` in the theory preset.
    pub fn init_schedule(&self, d: usize) -> Schedule {
        let (e, c) = (self.epsilon, self.big_c);
        let raw = match self.preset {
            Preset::Theory => Schedule {
                n: count(4.0 * d as f64 * (2.0 / self.delta).ln() / e.powi(6)),
                t: count(4.0 * c / e.powi(6)),
                mu: e * e / c,
                runs: self.restarts(),
                n_sel: 0,
                conditional_step: false,
            },
            Preset::Desk => Schedule {
                n: self.desk_n(d),
                t: self.desk_t(self.desk.step),
                mu: self.desk.step,
                runs: self.restarts(),
                n_sel: 0,
                conditional_step: false,
            },
        };
        self.finish(raw)
    }

    /// `σ` grid of the three-class learner.
    pub fn sigma_grid(&self) -> Vec<f64> {
        match self.preset {
            Preset::Theory => unit_grid(self.epsilon),
            Preset::Desk => unit_grid(self.epsilon.max(self.desk.sigma_spacing)),
        }
    }

    /// Three-class localized learner: `μ = ε/C`, `T = ⌈4C/ε²⌉`,
    /// `N = ⌈16d·ln(2/δ)/ε⁴⌉` in the theory preset. `runs` is the grid size.
    pub fn local3_schedule(&self, d: usize) -> Schedule {
        let (e, c) = (self.epsilon, self.big_c);
        let runs = self.sigma_grid().len();
        let raw = match self.preset {
            Preset::Theory => Schedule {
                n: count(16.0 * d as f64 * (2.0 / self.delta).ln() / e.powi(4)),
                t: count(4.0 * c / (e * e)),
                mu: e / c,
                runs,
                n_sel: 0,
                conditional_step: false,
            },
            Preset::Desk => Schedule {
                n: self.desk_n(d),
                t: self.desk_t(self.desk.local_step),
                mu: self.desk.local_step,
                runs,
                n_sel: 0,
                conditional_step: false,
            },
        };
        self.finish(raw)
    }

    /// `(T̂, Φ̂)` guesses of the grid geometry mode.
    pub fn geometry_grid(&self) -> Vec<(f64, f64)> {
        let h = match self.preset {
            Preset::Theory => self.epsilon,
            Preset::Desk => self.epsilon.max(self.desk.geometry_spacing),
        };
        let g = unit_grid(h);
        g.iter().flat_map(|&t| g.iter().map(move |&p| (t, p))).collect()
    }

    /// Accuracy of the warm start of the general-`k` learner.
    pub fn warm_start_epsilon(&self) -> f64 {
        match self.preset {
            Preset::Theory => self.epsilon / 10.0,
            Preset::Desk => self.epsilon / self.desk.warm_start_divisor,
        }
    }

    /// General-`k` localized learner, for one geometry guess. Theory:
    /// `μ = ε³/C`, `T = ⌈2φ₀/ε³⌉ + ⌈4C/ε⁶⌉`, `N` as the global learner,
    /// `η_step = max(ε³, φ₀/T)`.
    pub fn localk_schedule(
        &self,
        d: usize,
        k: u32,
        t_hat: f64,
        phi_hat: f64,
        guesses: usize,
    ) -> Result<(Schedule, AngleSchedule)> {
        for (name, v) in [("t_hat", t_hat), ("phi_hat", phi_hat)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidGeometryGuess(format!("{name} = {v} outside (0, 1]")));
            }
        }
        let (e, c) = (self.epsilon, self.big_c);
        let phi0 = localk_phi0(t_hat, phi_hat, k);
        let raw = match self.preset {
            Preset::Theory => Schedule {
                n: count(4.0 * d as f64 * (2.0 / self.delta).ln() / e.powi(6)),
                t: count(2.0 * phi0 / e.powi(3)).saturating_add(count(4.0 * c / e.powi(6))),
                mu: e.powi(3) / c,
                runs: guesses,
                n_sel: 0,
                conditional_step: false,
            },
            Preset::Desk => Schedule {
                n: self.desk_n(d),
                t: self.desk_t(self.desk.local_step),
                mu: self.desk.local_step,
                runs: guesses,
                n_sel: 0,
                conditional_step: false,
            },
        };
        let schedule = self.finish(raw);
        let sigma_floor = match self.preset {
            Preset::Theory => e,
            Preset::Desk => e.max(self.desk.sigma_floor),
        }
        .min(1.0);
        let angles = AngleSchedule {
            t_hat,
            phi_hat,
            phi0,
            eta_step: e.powi(3).max(phi0 / schedule.t as f64),
            sigma_floor,
        };
        Ok((schedule, angles))
    }
}
