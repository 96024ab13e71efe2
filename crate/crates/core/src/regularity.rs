//! Decision-boundary geometry of an MLC: critical angles `θ*_ij`,
//! `Φ_ij = min(tan θ*_ij, 1)` and effective-boundary masses `T_ij`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{acute_angle, axpy, dot, fill_gaussian, sample_unit_vector, UnitVector};
use crate::model::{label_pairs, MlcWeights};
use crate::rng::{par_chunks, Seed};

/// Competing boundary normals `w_ir*`, `w_jr*` for every `r ∉ {i, j}`.
fn competitors(w: &MlcWeights, i: u32, j: u32) -> Result<Vec<UnitVector>> {
    let mut out = Vec::with_capacity(2 * (w.k() as usize).saturating_sub(2));
    for r in (1..=w.k()).filter(|&r| r != i && r != j) {
        out.push(w.pairwise_boundary_direction(i, r)?);
        out.push(w.pairwise_boundary_direction(j, r)?);
    }
    Ok(out)
}

/// `θ*_ij`: the smallest acute angle between `w_ij*` and any competing
/// boundary normal, together with `Φ_ij = min(tan θ*_ij, 1)`.
pub fn critical_angle(w: &MlcWeights, i: u32, j: u32) -> Result<(f64, f64)> {
    if w.k() < 3 {
        return Err(Error::Undefined("critical angle needs a third class"));
    }
    // Canonical order makes the result bitwise symmetric in (i, j).
    let (i, j) = (i.min(j), i.max(j));
    let wij = w.pairwise_boundary_direction(i, j)?;
    let mut theta = f64::INFINITY;
    for c in competitors(w, i, j)? {
        theta = theta.min(acute_angle(&wij, &c)?);
    }
    Ok((theta, phi_of(theta)))
}

/// `min(tan θ, 1)`
pub fn phi_of(theta: f64) -> f64 {
    theta.tan().clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryMass {
    pub t_hat: f64,
    /// `3·√(t̂(1−t̂)/n_mc)`
    pub ci_radius: f64,
    pub n_mc: usize,
}

/// Monte-Carlo estimate of `T_ij`, the `(d−1)`-dimensional Gaussian mass of
/// `B_ij = {z ∈ H_ij : w_ir*·z ≥ 0, w_jr*·z ≥ 0 ∀r}`.
pub fn boundary_mass_estimate(w: &MlcWeights, i: u32, j: u32, n_mc: usize, seed: Seed) -> Result<BoundaryMass> {
    if n_mc < 1000 {
        return Err(Error::PreconditionViolated(format!("n_mc = {n_mc} below 1000")));
    }
    let wij = w.pairwise_boundary_direction(i, j)?;
    let comp = competitors(w, i, j)?;
    let d = w.d();
    let hits: usize = par_chunks(seed, n_mc, |rng, len| {
        let mut z = vec![0.0; d];
        let mut hits = 0;
        for _ in 0..len {
            fill_gaussian(&mut z, rng);
            let c = dot(&z, &wij);
            axpy(-c, &wij, &mut z);
            hits += comp.iter().all(|v| dot(v, &z) >= 0.0) as usize;
        }
        hits
    })
    .into_iter()
    .sum();
    let t_hat = hits as f64 / n_mc as f64;
    Ok(BoundaryMass {
        t_hat,
        ci_radius: 3.0 * (t_hat * (1.0 - t_hat) / n_mc as f64).sqrt(),
        n_mc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRegularity {
    pub i: u32,
    pub j: u32,
    pub t_hat: f64,
    pub ci: f64,
    /// `None` when undefined (`k = 2`).
    pub theta_star: Option<f64>,
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub k: u32,
    pub d: usize,
    pub pairs: Vec<PairRegularity>,
    pub seed: Seed,
    pub n_mc: usize,
}

impl RegularityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn pair(&self, i: u32, j: u32) -> Option<&PairRegularity> {
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }

    pub fn min_phi(&self) -> Option<f64> {
        self.pairs.iter().filter_map(|p| p.phi).reduce(f64::min)
    }

    pub fn min_t_hat(&self) -> f64 {
        self.pairs.iter().map(|p| p.t_hat).fold(1.0, f64::min)
    }
}

/// Geometry of every pair; pair `p` uses the Monte-Carlo seed
/// `seed.derive(p)`.
pub fn regularity_report(w: &MlcWeights, n_mc: usize, seed: Seed) -> Result<RegularityReport> {
    let pairs = label_pairs(w.k())
        .enumerate()
        .map(|(p, (i, j))| {
            let mass = boundary_mass_estimate(w, i, j, n_mc, seed.derive(p as u64))?;
            let angle = match critical_angle(w, i, j) {
                Ok(a) => Some(a),
                Err(Error::Undefined(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(PairRegularity {
                i,
                j,
                t_hat: mass.t_hat,
                ci: mass.ci_radius,
                theta_star: angle.map(|a| a.0),
                phi: angle.map(|a| a.1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegularityReport {
        k: w.k(),
        d: w.d(),
        pairs,
        seed,
        n_mc,
    })
}

/// MLC with `k` rows drawn uniformly from the unit sphere.
pub fn random_unit_mlc(k: u32, d: usize, seed: Seed) -> Result<MlcWeights> {
    let mut rng = seed.rng();
    MlcWeights::new((0..k).map(|_| sample_unit_vector(d, &mut rng).into_inner()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityTrial {
    pub trial: usize,
    pub min_phi: Option<f64>,
    pub min_t_hat: f64,
    pub all_phi_one: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularitySummary {
    pub k: u32,
    pub d: usize,
    pub n_mc: usize,
    pub seed: Seed,
    pub trials: Vec<RegularityTrial>,
    pub min_phi: Option<f64>,
    pub min_t_hat: f64,
}

impl RegularitySummary {
    pub fn trials_with_phi_one(&self) -> usize {
        self.trials.iter().filter(|t| t.all_phi_one).count()
    }
}

/// Geometry of `trials` random MLCs with rows uniform on the sphere. Trial
/// `t` draws its rows from `seed.derive2(t, 0)` and its Monte-Carlo points
/// from `seed.derive2(t, 1)`.
pub fn random_mlc_regularity(k: u32, d: usize, trials: usize, n_mc: usize, seed: Seed) -> Result<RegularitySummary> {
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let w = random_unit_mlc(k, d, seed.derive2(t as u64, 0))?;
        let report = regularity_report(&w, n_mc, seed.derive2(t as u64, 1))?;
        let min_phi = report.min_phi();
        out.push(RegularityTrial {
            trial: t,
            min_phi,
            min_t_hat: report.min_t_hat(),
            all_phi_one: min_phi.is_some_and(|p| p >= 1.0),
        });
    }
    Ok(RegularitySummary {
        k,
        d,
        n_mc,
        seed,
        min_phi: out.iter().filter_map(|t| t.min_phi).reduce(f64::min),
        min_t_hat: out.iter().map(|t| t.min_t_hat).fold(1.0, f64::min),
        trials: out,
    })
}
