//! Numerical checks of the structural inequalities behind the learners,
//! and the perceptron lower-bound experiment.
//!
//! Only unconditional inequalities and first-order identities are asserted;
//! quantities with unknown constants are measured and reported.

use std::f64::consts::{E, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{ExampleSource, GroundTruth, NoiseSpec, SampleSource, SourceConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    acute_angle, angle_between, axpy, check_dims, distance_sq, dot, fill_gaussian, norm, normal_cdf, normalize,
    project_orthogonal, sample_unit_vector, sphere_retract, LocalizationSpec, UnitVector,
};
use crate::learners::perceptron_step;
use crate::model::{Classifier, HardInstanceSpec, Label, MlcWeights};
use crate::regularity::boundary_mass_estimate;
use crate::report::{Cell, CsvTable};
use crate::rng::{par_chunks, GaussRng, Seed};

/// Outcome of one inequality check `lhs ≥ rhs` (or `lhs ≤ rhs`, per check).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckResult {
    pub lhs: f64,
    pub rhs: f64,
    /// Signed slack in the direction of the inequality; negative means the
    /// raw estimates violate it.
    pub margin: f64,
    pub pass: bool,
    pub n_mc: usize,
    pub std_err: f64,
}

pub const CHECK_HEADER: [&str; 8] = ["check", "case", "lhs", "rhs", "margin", "pass", "n_mc", "std_err"];

impl CheckResult {
    pub fn row(&self, check: &str, case: impl Into<Cell>) -> Vec<Cell> {
        vec![
            check.into(),
            case.into(),
            self.lhs.into(),
            self.rhs.into(),
            self.margin.into(),
            self.pass.into(),
            self.n_mc.into(),
            self.std_err.into(),
        ]
    }
}

pub fn check_table() -> CsvTable {
    CsvTable::new(CHECK_HEADER)
}

/// Events inside the halfspace `{w·x ≥ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationEvent {
    /// `{w·x ≥ t}`, `t ≥ 0`.
    Cap { threshold: f64 },
    /// `{w·x ≥ 0, u·x ≥ 0}`
    Wedge { u: UnitVector },
    /// `{w·x ≥ 0, lo ≤ u·x ≤ hi}`
    Band { u: UnitVector, lo: f64, hi: f64 },
    Empty,
}

impl CorrelationEvent {
    fn contains(&self, s: f64, x: &[f64]) -> bool {
        match self {
            CorrelationEvent::Cap { threshold } => s >= *threshold,
            CorrelationEvent::Wedge { u } => s >= 0.0 && dot(u, x) >= 0.0,
            CorrelationEvent::Band { u, lo, hi } => {
                let t = dot(u, x);
                s >= 0.0 && t >= *lo && t <= *hi
            }
            CorrelationEvent::Empty => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorrelationEvent::Cap { .. } => "cap",
            CorrelationEvent::Wedge { .. } => "wedge",
            CorrelationEvent::Band { .. } => "band",
            CorrelationEvent::Empty => "empty",
        }
    }
}

/// `E[(w·x)1_S] ≥ √(π/2)·Pr[S]²` by Monte Carlo. The standard error is the
/// delta-method error of `lhs − rhs`; the check passes unless the estimate
/// falls more than three standard errors short.
pub fn correlation_bound_check(w: &UnitVector, event: &CorrelationEvent, n_mc: usize, seed: Seed) -> Result<CheckResult> {
    if let CorrelationEvent::Cap { threshold } = event {
        if *threshold < 0.0 {
            return Err(Error::PreconditionViolated("cap threshold must be >= 0".into()));
        }
    }
    if let CorrelationEvent::Wedge { u } | CorrelationEvent::Band { u, .. } = event {
        check_dims(w.dim(), u.dim())?;
    }
    if n_mc == 0 {
        return Err(Error::EmptySample);
    }
    let d = w.dim();
    // Per chunk: Σ s·1_S, Σ 1_S, Σ s²·1_S.
    let parts = par_chunks(seed, n_mc, |rng, len| {
        let mut x = vec![0.0; d];
        let mut acc = [0.0f64; 3];
        for _ in 0..len {
            fill_gaussian(&mut x, rng);
            let s = dot(w, &x);
            if event.contains(s, &x) {
                acc[0] += s;
                acc[1] += 1.0;
                acc[2] += s * s;
            }
        }
        acc
    });
    let mut acc = [0.0f64; 3];
    for p in parts {
        for (a, b) in acc.iter_mut().zip(p) {
            *a += b;
        }
    }
    let n = n_mc as f64;
    let lhs = acc[0] / n;
    let p = acc[1] / n;
    let c = (PI / 2.0).sqrt();
    let rhs = c * p * p;
    // ψ = s·1_S − 2c·p·1_S
    let k = 2.0 * c * p;
    let mean_psi = lhs - k * p;
    let second = (acc[2] - 2.0 * k * acc[0] + k * k * acc[1]) / n;
    let std_err = ((second - mean_psi * mean_psi).max(0.0) / n).sqrt();
    let margin = lhs - rhs;
    Ok(CheckResult {
        lhs,
        rhs,
        margin,
        pass: margin >= -3.0 * std_err,
        n_mc,
        std_err,
    })
}

/// A family of events: caps, wedges and bands in random directions.
pub fn correlation_event_family(w: &UnitVector, count: usize, seed: Seed) -> Vec<CorrelationEvent> {
    let mut rng = seed.rng();
    let d = w.dim();
    let random_dir = |rng: &mut GaussRng| loop {
        let v = sample_unit_vector(d, rng);
        // Mix in w half of the time so the second direction is correlated.
        let mix: f64 = rand::Rng::random_range(rng, -0.9..0.9);
        let raw: Vec<f64> = v.iter().zip(w.iter()).map(|(a, b)| a + mix * b).collect();
        if let Ok(u) = normalize(&raw) {
            return u;
        }
    };
    (0..count)
        .map(|c| match c % 3 {
            0 => CorrelationEvent::Cap {
                threshold: rand::Rng::random_range(&mut rng, 0.0..2.0),
            },
            1 => CorrelationEvent::Wedge { u: random_dir(&mut rng) },
            _ => {
                let u = random_dir(&mut rng);
                let lo: f64 = rand::Rng::random_range(&mut rng, -2.0..1.5);
                let width: f64 = rand::Rng::random_range(&mut rng, 0.05..2.0);
                CorrelationEvent::Band { u, lo, hi: lo + width }
            }
        })
        .collect()
}

const PGD_TOL: f64 = 1e-9;

/// Checks `‖w' − w*‖² ≤ ‖w − w*‖² − 2μ g·w* + 2μ‖g − ĝ‖ + μ²‖ĝ‖²` for the
/// retraction `w' = normalize(w + μĝ)`, to `1e-9`.
pub fn pgd_inequality_check(w_star: &UnitVector, w_t: &UnitVector, g_hat: &[f64], g: &[f64], mu: f64) -> Result<CheckResult> {
    let d = w_t.dim();
    check_dims(d, w_star.dim())?;
    check_dims(d, g_hat.len())?;
    check_dims(d, g.len())?;
    for v in [g_hat, g] {
        let residual = dot(v, w_t);
        if residual.abs() > PGD_TOL {
            return Err(Error::OrthogonalityViolation { residual });
        }
    }
    let next = sphere_retract(w_t, mu, g_hat)?;
    let lhs = distance_sq(&next, w_star);
    let diff: f64 = g.iter().zip(g_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let rhs = distance_sq(w_t, w_star) - 2.0 * mu * dot(g, w_star) + 2.0 * mu * diff + mu * mu * dot(g_hat, g_hat);
    let margin = rhs - lhs;
    Ok(CheckResult {
        lhs,
        rhs,
        margin,
        pass: margin >= -PGD_TOL,
        n_mc: 0,
        std_err: 0.0,
    })
}

/// A random instance `(w*, w_t, ĝ, g, μ)` with `g, ĝ ⊥ w_t`. With
/// `exact_gradient` set, `ĝ = g`; otherwise `ĝ` is an independent draw of
/// arbitrary scale.
pub fn random_pgd_instance(d: usize, exact_gradient: bool, rng: &mut GaussRng) -> (UnitVector, UnitVector, Vec<f64>, Vec<f64>, f64) {
    let w_star = sample_unit_vector(d, rng);
    let w_t = sample_unit_vector(d, rng);
    let tangent = |scale: f64, rng: &mut GaussRng| {
        let mut v = vec![0.0; d];
        fill_gaussian(&mut v, rng);
        let mut v = project_orthogonal(&v, &w_t).expect("dimensions agree");
        v.iter_mut().for_each(|c| *c *= scale);
        v
    };
    let scale = 10f64.powf(rand::Rng::random_range(rng, -3.0..1.0));
    let g = tangent(scale, rng);
    let g_hat = if exact_gradient {
        g.clone()
    } else {
        let s = 10f64.powf(rand::Rng::random_range(rng, -3.0..1.5));
        tangent(s, rng)
    };
    let mu = 10f64.powf(rand::Rng::random_range(rng, -4.0..1.0));
    (w_star, w_t, g_hat, g, mu)
}

/// Disagreement between `w` and `w_ij*` on classes `{i, j}`, with the
/// first-order approximations it is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisagreementReport {
    /// `Pr[(w_ij*·x)(w·x) < 0, f*(x) ∈ {i, j}]`
    pub mass: f64,
    pub std_err: f64,
    pub n_mc: usize,
    pub theta: f64,
    /// `tan θ·M̂` with `M̂ = E_z[1_B |u·z|]·φ(0)`; `None` when localized.
    pub first_order: Option<f64>,
    /// `E_z[1_B (Φ(tan θ |u·z|) − 1/2)]`; `None` when localized.
    pub integral: Option<f64>,
    pub t_hat: Option<f64>,
    /// `tan θ·T̂²/20`
    pub lower_first_order: Option<f64>,
    /// `2√e·tan θ·T̂·√ln(1/T̂)`
    pub upper_first_order: Option<f64>,
    /// `|mass − first_order| / tan²θ`
    pub c2: Option<f64>,
}

impl DisagreementReport {
    /// `|mass − θ/π| ≤ 3 s.e.`, the two-class identity.
    pub fn two_class_check(&self) -> CheckResult {
        let target = self.theta / PI;
        let se = self.std_err.max(1.0 / self.n_mc as f64);
        let margin = 3.0 * se - (self.mass - target).abs();
        CheckResult {
            lhs: self.mass,
            rhs: target,
            margin,
            pass: margin >= 0.0,
            n_mc: self.n_mc,
            std_err: self.std_err,
        }
    }

    /// `|mass − tan θ·M̂| ≤ c2·tan²θ + 3 s.e.`
    pub fn first_order_check(&self, c2: f64) -> Option<CheckResult> {
        let first = self.first_order?;
        let tan = self.theta.tan();
        let margin = c2 * tan * tan + 3.0 * self.std_err - (self.mass - first).abs();
        Some(CheckResult {
            lhs: self.mass,
            rhs: first,
            margin,
            pass: margin >= 0.0,
            n_mc: self.n_mc,
            std_err: self.std_err,
        })
    }
}

/// Monte-Carlo disagreement mass between `h_w` and the `(i, j)` boundary of
/// `f_star`, under `N(0, I)` or, with `localization`, `N(0, Σ)` sampled as
/// `Σ^{1/2} z`. Without localization the first-order terms are estimated
/// from the same number of hyperplane samples.
pub fn disagreement_mass(
    f_star: &MlcWeights,
    w: &UnitVector,
    i: u32,
    j: u32,
    localization: Option<&LocalizationSpec>,
    n_mc: usize,
    seed: Seed,
) -> Result<DisagreementReport> {
    check_dims(f_star.d(), w.dim())?;
    if let Some(l) = localization {
        check_dims(f_star.d(), l.direction().dim())?;
    }
    if n_mc == 0 {
        return Err(Error::EmptySample);
    }
    let wij = f_star.pairwise_boundary_direction(i, j)?;
    let theta = angle_between(&wij, w)?;
    if theta >= PI / 2.0 {
        return Err(Error::PreconditionViolated(format!("angle {theta} is not acute")));
    }
    let (li, lj) = (Label::from_index(i as usize - 1), Label::from_index(j as usize - 1));
    let d = w.dim();
    let hits: usize = par_chunks(seed.derive(0), n_mc, |rng, len| {
        let mut x = vec![0.0; d];
        let mut hits = 0;
        for _ in 0..len {
            fill_gaussian(&mut x, rng);
            if let Some(l) = localization {
                l.apply_in_place(&mut x);
            }
            if dot(&wij, &x) * dot(w, &x) < 0.0 {
                let y = f_star.classify(&x);
                hits += (y == li || y == lj) as usize;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    let mass = hits as f64 / n_mc as f64;
    let std_err = (mass * (1.0 - mass) / n_mc as f64).sqrt();
    let mut report = DisagreementReport {
        mass,
        std_err,
        n_mc,
        theta,
        first_order: None,
        integral: None,
        t_hat: None,
        lower_first_order: None,
        upper_first_order: None,
        c2: None,
    };
    if localization.is_some() {
        return Ok(report);
    }

    let tan = theta.tan();
    let u = match project_orthogonal(w, &wij).and_then(|v| normalize(&v)) {
        Ok(u) => u,
        // θ = 0: every first-order term vanishes, any u will do.
        Err(_) => UnitVector::basis(d, 0),
    };
    let competitors: Vec<UnitVector> = (1..=f_star.k())
        .filter(|&r| r != i && r != j)
        .flat_map(|r| [f_star.pairwise_boundary_direction(i, r), f_star.pairwise_boundary_direction(j, r)])
        .collect::<Result<_>>()?;
    let parts = par_chunks(seed.derive(1), n_mc, |rng, len| {
        let mut z = vec![0.0; d];
        let mut acc = [0.0f64; 2];
        for _ in 0..len {
            fill_gaussian(&mut z, rng);
            let c = dot(&z, &wij);
            axpy(-c, &wij, &mut z);
            if competitors.iter().all(|v| dot(v, &z) >= 0.0) {
                let a = dot(&u, &z).abs();
                acc[0] += a;
                acc[1] += normal_cdf(tan * a) - 0.5;
            }
        }
        acc
    });
    let (mut abs_sum, mut int_sum) = (0.0, 0.0);
    for [a, b] in parts {
        abs_sum += a;
        int_sum += b;
    }
    let m_hat = abs_sum / n_mc as f64 / (2.0 * PI).sqrt();
    let first = tan * m_hat;
    let t_hat = boundary_mass_estimate(f_star, i, j, n_mc.max(1000), seed.derive(2))?.t_hat;
    report.first_order = Some(first);
    report.integral = Some(int_sum / n_mc as f64);
    report.t_hat = Some(t_hat);
    report.lower_first_order = Some(tan * t_hat * t_hat / 20.0);
    report.upper_first_order = Some(if t_hat > 0.0 {
        2.0 * E.sqrt() * tan * t_hat * (1.0 / t_hat).ln().sqrt()
    } else {
        0.0
    });
    report.c2 = (theta > 0.0).then(|| (mass - first).abs() / (tan * tan));
    Ok(report)
}

/// Checks that a weight family satisfying the alignment hypothesis has a
/// row of norm at least `c/(3ε)^{k−1}`.
///
/// Hypothesis: `|w_{k−1}[k] − w_k[k]| ≥ c` and `θ(w_i − w_j, e_i) < ε` for
/// all `i < j` (coordinates 1-based).
pub fn weight_blowup_check(weights: &[Vec<f64>], c: f64, eps: f64) -> Result<CheckResult> {
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(Error::PreconditionViolated(format!("eps = {eps} outside (0, 1/3)")));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::PreconditionViolated(format!("c = {c} must be > 0")));
    }
    let k = weights.len();
    if k < 2 {
        return Err(Error::PreconditionViolated("need at least two rows".into()));
    }
    let d = weights[0].len();
    if d < k {
        return Err(Error::PreconditionViolated(format!("need d >= k, got d = {d}, k = {k}")));
    }
    for row in weights {
        check_dims(d, row.len())?;
    }
    let gap = (weights[k - 2][k - 1] - weights[k - 1][k - 1]).abs();
    if gap.is_nan() || gap < c {
        return Err(Error::HypothesisViolated(format!(
            "|w_{}[{k}] - w_{k}[{k}]| = {gap} < c = {c}",
            k - 1
        )));
    }
    for a in 0..k {
        let e = UnitVector::basis(d, a);
        for b in a + 1..k {
            let diff: Vec<f64> = weights[a].iter().zip(&weights[b]).map(|(x, y)| x - y).collect();
            let angle = normalize(&diff).and_then(|v| angle_between(&v, &e));
            match angle {
                Ok(t) if t < eps => {}
                Ok(t) => {
                    return Err(Error::HypothesisViolated(format!(
                        "angle(w_{} - w_{}, e_{}) = {t} >= eps = {eps}",
                        a + 1,
                        b + 1,
                        a + 1
                    )))
                }
                Err(_) => {
                    return Err(Error::HypothesisViolated(format!("w_{} = w_{}", a + 1, b + 1)));
                }
            }
        }
    }
    let lhs = weights.iter().map(|r| norm(r)).fold(0.0, f64::max);
    let rhs = c / (3.0 * eps).powi(k as i32 - 1);
    Ok(CheckResult {
        lhs,
        rhs,
        margin: lhs - rhs,
        pass: lhs >= rhs,
        n_mc: 0,
        std_err: 0.0,
    })
}

/// Random weights satisfying the blow-up hypothesis, built backwards:
/// `w_k` is small and random, and `w_i = w_{i+1} + a_i v_i` where `v_i` is
/// within `ε/4` of `e_i` and `a_i` exceeds the accumulated tail by a factor
/// `≥ 1/tan(ε/2)`. The last step tilts towards `e_k` so the coordinate gap
/// is at least `c`.
pub fn random_blowup_instance(k: usize, d: usize, c: f64, eps: f64, rng: &mut GaussRng) -> Vec<Vec<f64>> {
    use rand::Rng;
    assert!(k >= 2 && d >= k);
    let mut rows = vec![vec![0.0; d]; k];
    for v in rows[k - 1].iter_mut() {
        *v = rng.random_range(-1.0..1.0) * c;
    }
    let mut tail = 0.0;
    for i in (0..k - 1).rev() {
        let mut dir = vec![0.0; d];
        let mut a;
        if i == k - 2 {
            let beta = eps / 2.0 * rng.random_range(0.5..1.0);
            dir[i] = beta.cos();
            dir[k - 1] = if rng.random::<bool>() { beta.sin() } else { -beta.sin() };
            a = c / beta.sin() * rng.random_range(1.0..2.0);
        } else {
            let mut r = vec![0.0; d];
            fill_gaussian(&mut r, rng);
            r[i] = 0.0;
            let r = normalize(&r).map(|r| r.into_inner()).unwrap_or_else(|_| vec![0.0; d]);
            let tau = (eps / 4.0).tan() * rng.random_range(0.0..1.0);
            for (o, v) in dir.iter_mut().zip(&r) {
                *o = tau * v;
            }
            dir[i] = 1.0;
            let n = norm(&dir);
            dir.iter_mut().for_each(|v| *v /= n);
            a = tail / (eps / 2.0).tan() * rng.random_range(1.0..2.0);
        }
        if a <= 0.0 {
            a = c;
        }
        let mut next = rows[i + 1].clone();
        axpy(a, &dir, &mut next);
        rows[i] = next;
        tail += a;
    }
    rows
}

/// Acute angle between `Σ^{1/2}u` and `Σ^{1/2}v` for
/// `Σ = I + (σ² − 1)wwᵀ`.
pub fn localized_angle(u: &UnitVector, v: &UnitVector, w: &UnitVector, sigma: f64) -> Result<f64> {
    let spec = LocalizationSpec::new(w.clone(), sigma)?;
    let a = normalize(&spec.apply(u))?;
    let b = normalize(&spec.apply(v))?;
    acute_angle(&a, &b)
}

/// Angle preservation under localization: with `α = sin θ(u, w) ≤ 1/(16C)`
/// and `σ = Cα`, reports `min(tan θ̃, 1) / (min(tan θ, 1)/C)` as the margin
/// and passes iff it is at least `r0`. Vacuous (passing, margin `+∞`) when
/// `u` and `v` span the same line.
pub fn localization_angle_check(u: &UnitVector, v: &UnitVector, w: &UnitVector, big_c: f64, r0: f64) -> Result<CheckResult> {
    check_dims(u.dim(), v.dim())?;
    check_dims(u.dim(), w.dim())?;
    if big_c.is_nan() || big_c <= 1.0 {
        return Err(Error::PreconditionViolated(format!("C = {big_c} must exceed 1")));
    }
    let alpha = angle_between(u, w)?.sin();
    if alpha > 1.0 / (16.0 * big_c) {
        return Err(Error::PreconditionViolated(format!(
            "sin angle(u, w) = {alpha} exceeds 1/(16C) = {}",
            1.0 / (16.0 * big_c)
        )));
    }
    if alpha <= 0.0 {
        return Err(Error::PreconditionViolated("u is parallel to w".into()));
    }
    let theta = acute_angle(u, v)?;
    let theta_tilde = localized_angle(u, v, w, big_c * alpha)?;
    let lhs = theta_tilde.tan().min(1.0);
    let rhs = theta.tan().min(1.0) / big_c;
    let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
    Ok(CheckResult {
        lhs,
        rhs,
        margin: ratio,
        pass: ratio >= r0,
        n_mc: 0,
        std_err: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationSweep {
    pub d: usize,
    pub big_c: f64,
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
}

/// Random triples `(u, v, w)` meeting the precondition: `w` is `u` tilted
/// by an angle with sine uniform in `(0, 1/(16C)]`, and `v` is `u` tilted
/// by a log-uniform angle in `[1e-4, π/2]`.
pub fn localization_angle_sweep(d: usize, big_c: f64, n_trials: usize, seed: Seed) -> Result<LocalizationSweep> {
    use rand::Rng;
    let mut rng = seed.rng();
    let tilt = |u: &UnitVector, angle: f64, rng: &mut GaussRng| -> Result<UnitVector> {
        loop {
            let r = sample_unit_vector(d, rng);
            if let Ok(p) = project_orthogonal(&r, u).and_then(|p| normalize(&p)) {
                let raw: Vec<f64> = u.iter().zip(p.iter()).map(|(a, b)| angle.cos() * a + angle.sin() * b).collect();
                return normalize(&raw);
            }
        }
    };
    let mut ratios = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let u = sample_unit_vector(d, &mut rng);
        let alpha = rng.random_range(1e-6..=1.0) / (16.0 * big_c);
        let w = tilt(&u, alpha.asin(), &mut rng)?;
        let beta = 10f64.powf(rng.random_range(-4.0..(PI / 2.0).log10()));
        let v = tilt(&u, beta, &mut rng)?;
        ratios.push(localization_angle_check(&u, &v, &w, big_c, 0.0)?.margin);
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LocalizationSweep {
        d,
        big_c,
        ratios,
        min_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundRow {
    pub n: usize,
    pub median_err: f64,
    /// Fraction of trials with error at least `threshold`.
    pub fraction_above: f64,
    pub threshold: f64,
    /// Per-trial errors, in trial order.
    pub errors: Vec<f64>,
}

/// Runs the perceptron on the hard instance `f(x) = min{i : x_i > 0}` and
/// measures its error at every sample size of `n_schedule`.
///
/// Each trial is one online run whose weights are evaluated after the
/// first `n` examples for every `n` in the schedule, so the schedule shares
/// its random numbers. Trial `t` draws examples from `seed.derive2(t, 0)`,
/// its initialization from `seed.derive2(t, 1)` and its `n_eval`
/// evaluation points from `seed.derive2(t, 2)`.
#[allow(clippy::too_many_arguments)]
pub fn perceptron_lowerbound_experiment(
    k: u32,
    d: usize,
    l: u32,
    eps: f64,
    n_schedule: &[usize],
    trials: usize,
    n_eval: usize,
    seed: Seed,
) -> Result<Vec<LowerBoundRow>> {
    if !(l >= 1 && l <= k && (k as usize) <= d) {
        return Err(Error::PreconditionViolated(format!("need 1 <= l <= k <= d, got l = {l}, k = {k}, d = {d}")));
    }
    let bound = 1.0 / (l * l) as f64;
    if !(eps > 0.0 && eps <= bound) {
        return Err(Error::PreconditionViolated(format!("eps = {eps} outside (0, 1/l^2]")));
    }
    if trials == 0 || n_eval == 0 {
        return Err(Error::EmptySample);
    }
    let spec = HardInstanceSpec::new(k, d)?;
    let mut schedule: Vec<usize> = n_schedule.to_vec();
    schedule.sort_unstable();
    schedule.dedup();
    let threshold = eps / 4f64.powi(l as i32);

    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>> {
            let t = t as u64;
            let mut source = SampleSource::new(SourceConfig::new(
                GroundTruth::HardInstance(spec),
                NoiseSpec::None,
                seed.derive2(t, 0),
            ))?;
            let mut rng = seed.derive2(t, 1).rng();
            let mut rows: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let mut r = vec![0.0; d];
                    fill_gaussian(&mut r, &mut rng);
                    r
                })
                .collect();
            let mut seen = 0usize;
            let mut errors = Vec::with_capacity(schedule.len());
            for &n in &schedule {
                if n > seen {
                    let batch = source.draw_dataset(n - seen)?;
                    for (x, y) in batch.iter() {
                        perceptron_step(&mut rows, x, y);
                    }
                    seen = n;
                }
                let w = MlcWeights::new(rows.clone())?;
                errors.push(disagreement_with(&w, &spec, n_eval, seed.derive2(t, 2)));
            }
            Ok(errors)
        })
        .collect::<Result<_>>()?;

    Ok(schedule
        .iter()
        .enumerate()
        .map(|(s, &n)| {
            let errors: Vec<f64> = per_trial.iter().map(|e| e[s]).collect();
            let mut sorted = errors.clone();
            sorted.sort_by(f64::total_cmp);
            let mid = sorted.len() / 2;
            let median_err = if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                (sorted[mid - 1] + sorted[mid]) / 2.0
            };
            LowerBoundRow {
                n,
                median_err,
                fraction_above: errors.iter().filter(|&&e| e >= threshold).count() as f64 / errors.len() as f64,
                threshold,
                errors,
            }
        })
        .collect())
}

/// `Pr_x[h(x) ≠ g(x)]` over `n` standard Gaussian points.
pub fn disagreement_with<A: Classifier + ?Sized, B: Classifier + ?Sized>(h: &A, g: &B, n: usize, seed: Seed) -> f64 {
    let d = g.dim();
    let wrong: usize = par_chunks(seed, n, |rng, len| {
        let mut x = vec![0.0; d];
        let mut wrong = 0;
        for _ in 0..len {
            fill_gaussian(&mut x, rng);
            wrong += (h.classify(&x) != g.classify(&x)) as usize;
        }
        wrong
    })
    .into_iter()
    .sum();
    wrong as f64 / n as f64
}

/// Table of the lower-bound experiment.
pub fn lowerbound_table(rows: &[LowerBoundRow]) -> CsvTable {
    let mut t = CsvTable::new(["n", "median_err", "fraction_above", "threshold"]);
    for r in rows {
        t.push(vec![r.n.into(), r.median_err.into(), r.fraction_above.into(), r.threshold.into()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_gaussian;

    fn basis(d: usize, a: usize) -> UnitVector {
        UnitVector::basis(d, a)
    }

    #[test]
    fn halfspace_correlation() {
        let w = basis(5, 0);
        let r = correlation_bound_check(&w, &CorrelationEvent::Cap { threshold: 0.0 }, 1_000_000, Seed(1)).unwrap();
        assert!((r.lhs - 1.0 / (2.0 * PI).sqrt()).abs() < 3e-3, "{r:?}");
        assert!((r.rhs - (PI / 2.0).sqrt() * 0.25).abs() < 2e-3);
        assert!(r.pass);
    }

    #[test]
    fn empty_event_passes() {
        let r = correlation_bound_check(&basis(3, 0), &CorrelationEvent::Empty, 1000, Seed(2)).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
        assert!(r.pass);
    }

    #[test]
    fn orthogonal_wedge_factorizes() {
        let r = correlation_bound_check(&basis(4, 0), &CorrelationEvent::Wedge { u: basis(4, 1) }, 1_000_000, Seed(3)).unwrap();
        assert!((r.lhs - 0.5 / (2.0 * PI).sqrt()).abs() < 2e-3, "{r:?}");
        assert!((r.rhs - (PI / 2.0).sqrt() / 16.0).abs() < 1e-3);
    }

    #[test]
    fn generated_family_passes() {
        let w = basis(4, 2);
        for (c, e) in correlation_event_family(&w, 30, Seed(4)).iter().enumerate() {
            let r = correlation_bound_check(&w, e, 100_000, Seed(100 + c as u64)).unwrap();
            assert!(r.pass, "{e:?} {r:?}");
        }
    }

    #[test]
    fn pgd_inequality_on_random_instances() {
        let mut rng = Seed(5).rng();
        for trial in 0..2000 {
            let (ws, wt, gh, g, mu) = random_pgd_instance(2 + trial % 7, trial % 2 == 0, &mut rng);
            let r = pgd_inequality_check(&ws, &wt, &gh, &g, mu).unwrap();
            assert!(r.pass, "{r:?}");
        }
        let (ws, wt, gh, g, _) = random_pgd_instance(4, false, &mut rng);
        let r = pgd_inequality_check(&ws, &wt, &gh, &g, 0.0).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-15);
        let not_tangent = vec![1.0; 4];
        assert!(matches!(
            pgd_inequality_check(&ws, &wt, &not_tangent, &g, 0.1),
            Err(Error::OrthogonalityViolation { .. })
        ));
    }

    fn two_class(d: usize, seed: u64) -> MlcWeights {
        let mut rng = Seed(seed).rng();
        MlcWeights::new(vec![sample_gaussian(d, &mut rng), sample_gaussian(d, &mut rng)]).unwrap()
    }

    fn rotate_towards(star: &UnitVector, theta: f64, seed: u64) -> UnitVector {
        let mut rng = Seed(seed).rng();
        let r = sample_unit_vector(star.dim(), &mut rng);
        let p = normalize(&project_orthogonal(&r, star).unwrap()).unwrap();
        let raw: Vec<f64> = star.iter().zip(p.iter()).map(|(a, b)| theta.cos() * a + theta.sin() * b).collect();
        UnitVector::new(raw).unwrap()
    }

    #[test]
    fn two_class_disagreement() {
        let f = two_class(6, 6);
        let star = f.pairwise_boundary_direction(1, 2).unwrap();
        let zero = disagreement_mass(&f, &star, 1, 2, None, 100_000, Seed(7)).unwrap();
        assert_eq!(zero.mass, 0.0);
        let mut last = 0.0;
        for theta in [0.1, 0.5, 1.0, 1.5] {
            let w = rotate_towards(&star, theta, 8);
            let r = disagreement_mass(&f, &w, 1, 2, None, 400_000, Seed(9)).unwrap();
            assert!(r.two_class_check().pass, "{theta} {r:?}");
            // The integral is exact for two classes.
            assert!((r.integral.unwrap() - theta / PI).abs() < 3e-3);
            assert!(r.mass >= last - 3.0 * r.std_err);
            last = r.mass;
        }
    }

    #[test]
    fn symmetric_three_class_first_order() {
        let d = 10;
        let s = 3f64.sqrt() / 2.0;
        let mut rows = vec![vec![0.0; d]; 3];
        rows[0][0] = 1.0;
        rows[1][0] = -0.5;
        rows[1][1] = s;
        rows[2][0] = -0.5;
        rows[2][1] = -s;
        let f = MlcWeights::new(rows).unwrap();
        let star = f.pairwise_boundary_direction(1, 2).unwrap();
        let w = rotate_towards(&star, 0.05, 10);
        let r = disagreement_mass(&f, &w, 1, 2, None, 1_000_000, Seed(11)).unwrap();
        let check = r.first_order_check(r.c2.unwrap()).unwrap();
        assert!(check.pass);
        assert!(r.c2.unwrap() < 10.0, "{r:?}");
        assert!((r.t_hat.unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn localized_disagreement_is_larger() {
        let f = two_class(5, 12);
        let star = f.pairwise_boundary_direction(1, 2).unwrap();
        let w = rotate_towards(&star, 0.1, 13);
        let plain = disagreement_mass(&f, &w, 1, 2, None, 200_000, Seed(14)).unwrap();
        let spec = LocalizationSpec::new(w.clone(), 0.2).unwrap();
        let local = disagreement_mass(&f, &w, 1, 2, Some(&spec), 200_000, Seed(14)).unwrap();
        assert!(local.mass > 2.0 * plain.mass);
        assert!(local.first_order.is_none());
    }

    #[test]
    fn blowup_examples() {
        let (c, eps) = (1.0, 0.1);
        let a = 2.0 * c / eps;
        let r = weight_blowup_check(&[vec![a, c], vec![0.0, 0.0]], c, eps).unwrap();
        assert!(r.pass);
        let bad = weight_blowup_check(&[vec![a, c / 2.0], vec![0.0, 0.0]], c, eps);
        assert!(matches!(bad, Err(Error::HypothesisViolated(_))));
        let tilted = weight_blowup_check(&[vec![1.0, 1.0], vec![0.0, 0.0]], 1.0, eps);
        assert!(matches!(tilted, Err(Error::HypothesisViolated(_))));
        assert!(weight_blowup_check(&[vec![a, c], vec![0.0, 0.0]], c, 0.4).is_err());
    }

    #[test]
    fn no_blowup_counterexamples() {
        let mut rng = Seed(15).rng();
        for k in [3usize, 4, 5] {
            for eps in [0.05, 0.1, 0.2] {
                for _ in 0..1000 {
                    let w = random_blowup_instance(k, k + 2, 0.5, eps, &mut rng);
                    let r = weight_blowup_check(&w, 0.5, eps).unwrap();
                    assert!(r.pass, "{k} {eps} {r:?}");
                }
            }
        }
    }

    #[test]
    fn localization_angle_cases() {
        let d = 8;
        let u = basis(d, 0);
        let mut rng = Seed(16).rng();
        let w = rotate_towards(&u, (1.0f64 / 80.0).asin(), 17);
        let r = localization_angle_check(&u, &u, &w, 4.0, 1.0).unwrap();
        assert!(r.pass);
        // w orthogonal to span(u, v): the transform fixes both.
        let v = rotate_towards(&u, 0.7, 18);
        let v_perp = normalize(&project_orthogonal(&v, &u).unwrap()).unwrap();
        let r = sample_unit_vector(d, &mut rng);
        let perp = project_orthogonal(&project_orthogonal(&r, &u).unwrap(), &v_perp).unwrap();
        let perp = normalize(&perp).unwrap();
        let t = localized_angle(&u, &v, &perp, 0.1).unwrap();
        assert!((t - acute_angle(&u, &v).unwrap()).abs() < 1e-12);
        let far = rotate_towards(&u, 0.5, 19);
        assert!(matches!(
            localization_angle_check(&u, &v, &far, 4.0, 0.0),
            Err(Error::PreconditionViolated(_))
        ));
        let sweep = localization_angle_sweep(d, 4.0, 1000, Seed(20)).unwrap();
        assert!(sweep.min_ratio > 0.0);
    }

    #[test]
    fn lowerbound_schedule_and_baseline() {
        let rows = perceptron_lowerbound_experiment(4, 4, 2, 0.25, &[1000, 0, 100], 5, 20_000, Seed(21)).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![0, 100, 1000]);
        assert!(rows[0].median_err > 0.1);
        assert_eq!(rows[0].threshold, 0.25 / 16.0);
        assert!(perceptron_lowerbound_experiment(4, 4, 3, 0.25, &[10], 2, 100, Seed(0)).is_err());
        assert!(perceptron_lowerbound_experiment(5, 4, 2, 0.25, &[10], 2, 100, Seed(0)).is_err());
    }
}
