//! Choice of the m-out-of-n resample size.
//!
//! For every ordered pair `(j, k)` the objective compares the bootstrap
//! probability that `j` beats `k` at resample size `m` with its full-sample
//! counterpart, averaged over a Gaussian perturbation:
//!
//! ```text
//! Σ_{j≠k} ∫ ( Φ[(m/n)^{1/2} {-b_jk + z}] - Φ(-b_jk) )² φ(z) dz,
//! b_jk = ĉ_jk ω̂_jk (log C n)^{-1/2},
//! ω̂_jk = n^{1/2} (θ̂_k - θ̂_j),  ĉ_jk = (σ̂_j² + σ̂_k²)^{-1/2}.
//! ```
//!
//! `m` is the minimiser over a grid of integer candidates.

use std::fmt::Write as _;

use serde::Serialize;

use crate::data::PopulationData;
use crate::error::{Error, Result};
use crate::estimators::{estimate_all, sigma_hat_all, EstimatorSpec};
use crate::numeric::{normal_cdf, GaussHermite};
use crate::par;

/// Points in the Gauss–Hermite rule used for the z-integral.
pub const QUADRATURE_ORDER: usize = 64;

/// Log-spaced points in the default candidate grid (before adding `n`).
pub const DEFAULT_GRID_POINTS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct TuningInputs {
    p: usize,
    /// `ω̂_jk`, row-major `p × p`.
    omega_hat: Vec<f64>,
    /// `ĉ_jk`, row-major `p × p` (diagonal unused).
    c_hat: Vec<f64>,
    pub n_bar: f64,
    pub candidates: Vec<usize>,
    /// The constant `C` in `(log C n)^{-1/2}`.
    pub log_scale: f64,
}

impl TuningInputs {
    /// `sigmas` must be on the scale of `n_bar`, i.e. asymptotic standard
    /// deviations of `n_bar^{1/2}(θ̂_j - θ_j)`.
    pub fn new(
        theta_hat: &[f64],
        sigmas: &[f64],
        n_bar: f64,
        candidates: Vec<usize>,
    ) -> Result<Self> {
        let p = theta_hat.len();
        if sigmas.len() != p {
            return Err(Error::validation("one scale estimate per item is required"));
        }
        if p < 2 {
            return Err(Error::validation("need at least 2 items"));
        }
        if let Some(j) = sigmas.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::numerical(format!(
                "scale estimate for item {} is not positive",
                j + 1
            )));
        }
        let root_n = n_bar.sqrt();
        let mut omega_hat = vec![0.0; p * p];
        let mut c_hat = vec![0.0; p * p];
        for j in 0..p {
            for k in 0..p {
                omega_hat[j * p + k] = root_n * (theta_hat[k] - theta_hat[j]);
                c_hat[j * p + k] = (sigmas[j] * sigmas[j] + sigmas[k] * sigmas[k])
                    .sqrt()
                    .recip();
            }
        }
        let mut candidates = candidates;
        candidates.sort_unstable();
        candidates.dedup();
        Ok(TuningInputs {
            p,
            omega_hat,
            c_hat,
            n_bar,
            candidates,
            log_scale: 1.0,
        })
    }

    pub fn with_log_scale(mut self, c: f64) -> Self {
        self.log_scale = c;
        self
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn omega(&self, j: usize, k: usize) -> f64 {
        self.omega_hat[j * self.p + k]
    }

    pub fn c(&self, j: usize, k: usize) -> f64 {
        self.c_hat[j * self.p + k]
    }

    fn log_n(&self) -> Result<f64> {
        let l = (self.log_scale * self.n_bar).ln();
        if !(self.n_bar > 1.0) || !(l > 0.0) {
            return Err(Error::numerical(format!(
                "log({} · {}) is not positive; the tuning objective is undefined",
                self.log_scale, self.n_bar
            )));
        }
        Ok(l)
    }

    /// `b_jk` for every ordered pair `j ≠ k`.
    fn shifts(&self) -> Result<Vec<f64>> {
        let scale = self.log_n()?.sqrt().recip();
        let p = self.p;
        let mut b = Vec::with_capacity(p * (p - 1));
        for j in 0..p {
            for k in 0..p {
                if j != k {
                    b.push(self.c(j, k) * self.omega(j, k) * scale);
                }
            }
        }
        Ok(b)
    }
}

fn pair_term(gh: &GaussHermite, s: f64, b: f64) -> f64 {
    let base = normal_cdf(-b);
    gh.integrate(|z| {
        let d = normal_cdf(s * (z - b)) - base;
        d * d
    })
}

fn objective_from_shifts(gh: &GaussHermite, m: usize, n_bar: f64, shifts: &[f64]) -> f64 {
    let s = (m as f64 / n_bar).sqrt();
    shifts.iter().map(|&b| pair_term(gh, s, b)).sum()
}

/// Value of the tuning objective at resample size `m`.
pub fn tuning_objective(m: usize, inputs: &TuningInputs) -> Result<f64> {
    let shifts = inputs.shifts()?;
    if m < 2 || m as f64 > inputs.n_bar {
        return Err(Error::validation(format!(
            "candidate m = {m} is outside [2, {}]",
            inputs.n_bar
        )));
    }
    let gh = GaussHermite::new(QUADRATURE_ORDER);
    Ok(objective_from_shifts(&gh, m, inputs.n_bar, &shifts))
}

/// About [`DEFAULT_GRID_POINTS`] log-spaced integers in `[2, ⌊n⌋]`, plus `⌊n⌋`.
pub fn default_candidates(n_bar: f64) -> Result<Vec<usize>> {
    let top = n_bar.floor() as usize;
    if top < 2 {
        return Err(Error::validation(format!(
            "average sample size {n_bar} is below 2"
        )));
    }
    let ratio = top as f64 / 2.0;
    let k = DEFAULT_GRID_POINTS - 1;
    let mut grid: Vec<usize> = (0..=k)
        .map(|i| ((2.0 * ratio.powf(i as f64 / k as f64)).round() as usize).clamp(2, top))
        .collect();
    grid.push(top);
    grid.sort_unstable();
    grid.dedup();
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateValue {
    pub m: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MSelection {
    pub m_star: usize,
    /// `m* / n`, applied per item as `m_j = round(rho · n_j)`.
    pub rho_star: f64,
    pub n_bar: f64,
    pub curve: Vec<CandidateValue>,
}

impl MSelection {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("m,fraction,objective,selected\n");
        for c in &self.curve {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                c.m,
                c.m as f64 / self.n_bar,
                c.objective,
                u8::from(c.m == self.m_star)
            );
        }
        s
    }
}

/// Evaluates the objective on every candidate and returns the minimiser,
/// preferring the smaller `m` on exact ties.
pub fn minimize(inputs: &TuningInputs) -> Result<MSelection> {
    let shifts = inputs.shifts()?;
    if inputs.candidates.is_empty() {
        return Err(Error::validation("no candidate resample sizes"));
    }
    if let Some(&m) = inputs
        .candidates
        .iter()
        .find(|&&m| m < 2 || m as f64 > inputs.n_bar)
    {
        return Err(Error::validation(format!(
            "candidate m = {m} is outside [2, {}]",
            inputs.n_bar
        )));
    }
    let gh = GaussHermite::new(QUADRATURE_ORDER);
    let values = par::map_indexed(inputs.candidates.len(), |i| {
        objective_from_shifts(&gh, inputs.candidates[i], inputs.n_bar, &shifts)
    });
    let curve: Vec<CandidateValue> = inputs
        .candidates
        .iter()
        .zip(values)
        .map(|(&m, objective)| CandidateValue { m, objective })
        .collect();
    let mut best = curve[0];
    for c in &curve[1..] {
        if c.objective < best.objective {
            best = *c;
        }
    }
    Ok(MSelection {
        m_star: best.m,
        rho_star: best.m as f64 / inputs.n_bar,
        n_bar: inputs.n_bar,
        curve,
    })
}

/// Tuning inputs computed from data: `θ̂_j`, and `σ̂_j` rescaled from each
/// item's own sample size to the average size `n`.
pub fn tuning_inputs(
    data: &PopulationData,
    estimator: &EstimatorSpec,
    candidates: Option<Vec<usize>>,
    log_scale: f64,
) -> Result<TuningInputs> {
    let n_bar = data.summarize_sizes().n_bar;
    let theta = estimate_all(data, estimator)?;
    let own = sigma_hat_all(data, estimator)?;
    let sigmas: Vec<f64> = own
        .iter()
        .zip(data.sizes())
        .map(|(s, nj)| s * (n_bar / nj as f64).sqrt())
        .collect();
    let candidates = match candidates {
        Some(c) => c,
        None => default_candidates(n_bar)?,
    };
    Ok(TuningInputs::new(&theta, &sigmas, n_bar, candidates)?.with_log_scale(log_scale))
}

pub fn select_m(
    data: &PopulationData,
    estimator: &EstimatorSpec,
    candidates: Option<Vec<usize>>,
) -> Result<MSelection> {
    minimize(&tuning_inputs(data, estimator, candidates, 1.0)?)
}
