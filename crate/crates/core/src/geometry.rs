//! Dense-vector primitives, sphere projections, Gaussian sampling and the
//! rank-one localization used by the localized learners.
//!
//! Vectors are plain `&[f64]` slices; the only invariant-carrying wrapper is
//! [`UnitVector`]. Signs at the boundary follow one rule everywhere:
//! `w·x = 0` counts as the non-negative side.

use std::f64::consts::PI;
use std::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::GaussRng;

/// Norms below this are treated as zero.
pub const ZERO_NORM: f64 = 1e-12;

/// Tolerance on `| ‖w‖ − 1 |` for a [`UnitVector`].
pub const UNIT_TOL: f64 = 1e-9;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

pub fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// A vector on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps `v`, checking finiteness and `| ‖v‖ − 1 | ≤ 1e-9`.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        check_finite(&v)?;
        let n = norm(&v);
        if v.is_empty() || (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidParameter(format!(
                "vector of norm {n} is not a unit vector"
            )));
        }
        Ok(UnitVector(v))
    }

    /// The `axis`-th standard basis vector (0-based) in `d` dimensions.
    pub fn basis(d: usize, axis: usize) -> Self {
        assert!(axis < d, "axis {axis} out of range for dimension {d}");
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        UnitVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn negated(&self) -> Self {
        UnitVector(self.0.iter().map(|x| -x).collect())
    }
}

impl Deref for UnitVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl<'de> Deserialize<'de> for UnitVector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(de)?;
        UnitVector::new(v).map_err(serde::de::Error::custom)
    }
}

pub fn normalize(v: &[f64]) -> Result<UnitVector> {
    check_finite(v)?;
    let n = norm(v);
    if n < ZERO_NORM {
        return Err(Error::ZeroVector { norm: n });
    }
    Ok(UnitVector(v.iter().map(|x| x / n).collect()))
}

/// `v − (v·w) w`
pub fn project_orthogonal(v: &[f64], w: &UnitVector) -> Result<Vec<f64>> {
    check_dims(w.dim(), v.len())?;
    let mut out = v.to_vec();
    axpy(-dot(v, w), w, &mut out);
    Ok(out)
}

/// Angle in `[0, π]` between two unit vectors.
///
/// Uses `2·atan2(‖u − v‖, ‖u + v‖)`, which is accurate near `0` and `π` and
/// bitwise symmetric in its arguments.
pub fn angle_between(u: &UnitVector, v: &UnitVector) -> Result<f64> {
    check_dims(u.dim(), v.dim())?;
    let diff = distance_sq(u, v).sqrt();
    let sum: f64 = u
        .iter()
        .zip(v.iter())
        .map(|(a, b)| (a + b) * (a + b))
        .sum::<f64>()
        .sqrt();
    Ok(2.0 * diff.atan2(sum))
}

/// Acute angle in `[0, π/2]` between the lines spanned by `u` and `v`.
pub fn acute_angle(u: &UnitVector, v: &UnitVector) -> Result<f64> {
    let a = angle_between(u, v)?;
    Ok(a.min(PI - a))
}

/// `normalize(w + mu·g)`: one retraction step on the sphere.
pub fn sphere_retract(w: &UnitVector, mu: f64, g: &[f64]) -> Result<UnitVector> {
    check_dims(w.dim(), g.len())?;
    check_finite(g)?;
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {mu} must be >= 0")));
    }
    let mut next = w.to_vec();
    axpy(mu, g, &mut next);
    normalize(&next)
}

pub fn fill_gaussian(out: &mut [f64], rng: &mut GaussRng) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// `d` i.i.d. standard normal components.
pub fn sample_gaussian(d: usize, rng: &mut GaussRng) -> Vec<f64> {
    let mut v = vec![0.0; d];
    fill_gaussian(&mut v, rng);
    v
}

/// Uniform point on `S^{d-1}`.
pub fn sample_unit_vector(d: usize, rng: &mut GaussRng) -> UnitVector {
    assert!(d >= 1);
    loop {
        let z = sample_gaussian(d, rng);
        if let Ok(u) = normalize(&z) {
            return u;
        }
    }
}

/// Standard Gaussian on the hyperplane `w·x = 0`, built as `z − (z·w)w`.
pub fn sample_hyperplane_gaussian(w: &UnitVector, rng: &mut GaussRng) -> Vec<f64> {
    let mut z = sample_gaussian(w.dim(), rng);
    let c = dot(&z, w);
    axpy(-c, w, &mut z);
    z
}

/// Localization around the hyperplane `direction·x = 0` with bandwidth
/// `sigma`: the Gaussian `N(0, I + (σ²−1) w wᵀ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSpec {
    direction: UnitVector,
    sigma: f64,
}

impl LocalizationSpec {
    pub fn new(direction: UnitVector, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "localization sigma {sigma} outside (0, 1]"
            )));
        }
        Ok(LocalizationSpec { direction, sigma })
    }

    pub fn direction(&self) -> &UnitVector {
        &self.direction
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `exp(−(σ⁻² − 1)(w·x)²/2)`
    pub fn acceptance_probability(&self, x: &[f64]) -> f64 {
        let s = dot(x, &self.direction);
        (-(self.sigma.powi(-2) - 1.0) * s * s / 2.0).exp()
    }

    /// Accepts `x` iff `u ≤ p(x)`; `u` is a uniform draw from `[0, 1)`.
    /// Over `x ~ N(0, I)` the acceptance rate is `σ`.
    pub fn localized_accept(&self, x: &[f64], u: f64) -> bool {
        self.sigma == 1.0 || u <= self.acceptance_probability(x)
    }

    /// `Σ^{1/2} z = z + (σ − 1)(z·w) w`
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = z.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, z: &mut [f64]) {
        let c = dot(z, &self.direction);
        axpy((self.sigma - 1.0) * c, &self.direction, z);
    }
}

/// Draw cap for rejection sampling `n` accepted points at acceptance rate
/// no smaller than `sigma_min`: `⌈100·n/σ_min⌉`.
pub fn max_draws(n: usize, sigma_min: f64) -> usize {
    (100.0 * n as f64 / sigma_min).ceil() as usize
}

/// Rejection-samples `n` points of `N(0, I + (σ²−1)wwᵀ)` from raw
/// standard Gaussians. Returns the points row-major and the raw draw count.
pub fn sample_localized(
    spec: &LocalizationSpec,
    n: usize,
    rng: &mut GaussRng,
) -> Result<(Vec<f64>, usize)> {
    sample_localized_capped(spec, n, max_draws(n, spec.sigma), rng)
}

fn sample_localized_capped(spec: &LocalizationSpec, n: usize, cap: usize, rng: &mut GaussRng) -> Result<(Vec<f64>, usize)> {
    let d = spec.direction.dim();
    let mut out = Vec::with_capacity(n * d);
    let mut x = vec![0.0; d];
    let mut draws = 0usize;
    while out.len() < n * d {
        if draws >= cap {
            return Err(Error::AcceptanceStarvation {
                wanted: n,
                accepted: out.len() / d,
                draws,
            });
        }
        fill_gaussian(&mut x, rng);
        draws += 1;
        let u: f64 = rng.random();
        if spec.localized_accept(&x, u) {
            out.extend_from_slice(&x);
        }
    }
    Ok((out, draws))
}

/// Komatsu-type bounds on the Gaussian tail `Q(t) = Pr[Z ≥ t]`:
///
/// `√(2/π)·e^{−t²/2}/(t+√(t²+4)) ≤ Q(t) ≤ √(2/π)·e^{−t²/2}/(t+√(t²+2))`
///
/// For `t < 0` the bounds on `Q(t) = 1 − Q(−t)` are returned.
pub fn halfspace_bias_bounds(t: f64) -> (f64, f64) {
    if t < 0.0 {
        let (lo, hi) = halfspace_bias_bounds(-t);
        return (1.0 - hi, 1.0 - lo);
    }
    let c = (2.0 / PI).sqrt() * (-t * t / 2.0).exp();
    (c / (t + (t * t + 4.0).sqrt()), c / (t + (t * t + 2.0).sqrt()))
}

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(t: f64) -> f64 {
    (-t * t / 2.0).exp() / (2.0 * PI).sqrt()
}
