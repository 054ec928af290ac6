//! Limiting rank distributions and closed-form rank expectations.
//!
//! The distributions here have no closed form for general scales and
//! offsets, so they are evaluated by Monte Carlo over independent standard
//! normals. Draws are split into fixed chunks, each with its own stream, so
//! results do not depend on the number of threads.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{integrate_adaptive, normal_cdf, normal_pdf};
use crate::par;
use crate::stream::{domain, StreamSeed};

const CHUNK: usize = 8192;

/// Scales `σ_k`, offsets `c_k` and the focal item `j` of
/// `1 + Σ_{k≠j} I(σ_j N_j ≤ σ_k N_k + c_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitSpec {
    pub sigmas: Vec<f64>,
    pub offsets: Vec<f64>,
    pub focal: usize,
}

impl LimitSpec {
    pub fn new(sigmas: Vec<f64>, offsets: Vec<f64>, focal: usize) -> Result<Self> {
        if sigmas.len() < 2 || offsets.len() != sigmas.len() {
            return Err(Error::validation(
                "need matching sigmas and offsets for at least 2 items",
            ));
        }
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::validation("all sigmas must be positive and finite"));
        }
        if focal >= sigmas.len() {
            return Err(Error::validation("focal item out of range"));
        }
        Ok(LimitSpec {
            sigmas,
            offsets,
            focal,
        })
    }

    /// Equal unit scales, zero offsets.
    pub fn exchangeable(p: usize, focal: usize) -> Result<Self> {
        Self::new(vec![1.0; p], vec![0.0; p], focal)
    }

    pub fn p(&self) -> usize {
        self.sigmas.len()
    }
}

/// Histogram of a rank statistic over `draws` Monte Carlo samples; `sample`
/// receives a normal source and returns a rank in `1..=p`.
fn mc_pmf<F>(p: usize, draws: usize, seed: StreamSeed, sample: F) -> Vec<f64>
where
    F: Fn(&mut dyn FnMut() -> f64) -> usize + Sync + Send,
{
    let chunks = draws.div_ceil(CHUNK);
    let partial = par::map_indexed(chunks, |c| {
        let mut rng = seed.rng(c as u64);
        let mut normal = || rng.sample::<f64, _>(StandardNormal);
        let len = CHUNK.min(draws - c * CHUNK);
        let mut counts = vec![0u64; p];
        for _ in 0..len {
            counts[sample(&mut normal) - 1] += 1;
        }
        counts
    });
    let mut total = vec![0u64; p];
    for c in partial {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    total.iter().map(|&c| c as f64 / draws as f64).collect()
}

fn check_draws(draws: usize) -> Result<()> {
    if draws < 10_000 {
        return Err(Error::validation(format!(
            "need at least 10^4 draws, got {draws}"
        )));
    }
    Ok(())
}

/// Monte Carlo probability mass function of the rank in `spec`, indexed by
/// `r - 1`.
pub fn limit_rank_pmf(spec: &LimitSpec, draws: usize, seed: u64) -> Result<Vec<f64>> {
    check_draws(draws)?;
    let p = spec.p();
    let j = spec.focal;
    let seed = StreamSeed::new(seed).child(domain::ORACLE, 1);
    Ok(mc_pmf(p, draws, seed, |normal| {
        let lhs = spec.sigmas[j] * normal();
        let mut r = 1;
        for k in 0..p {
            if k != j {
                let rhs = spec.sigmas[k] * normal() + spec.offsets[k];
                if lhs <= rhs {
                    r += 1;
                }
            }
        }
        r
    }))
}

/// `F_j(r | c_1, ..., c_p)`.
pub fn limit_rank_cdf(spec: &LimitSpec, r: usize, draws: usize, seed: u64) -> Result<f64> {
    Ok(pmf_to_cdf(&limit_rank_pmf(spec, draws, seed)?, r))
}

pub fn pmf_to_cdf(pmf: &[f64], r: usize) -> f64 {
    pmf[..r.min(pmf.len())].iter().sum::<f64>().min(1.0)
}

/// Mean and variance of a rank pmf indexed by `r - 1`.
pub fn pmf_moments(pmf: &[f64]) -> (f64, f64) {
    let mean: f64 = pmf
        .iter()
        .enumerate()
        .map(|(i, q)| (i + 1) as f64 * q)
        .sum();
    let var = pmf
        .iter()
        .enumerate()
        .map(|(i, q)| ((i + 1) as f64 - mean).powi(2) * q)
        .sum();
    (mean, var)
}

/// Which items sit above, below, or level with a focal item.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupClassification {
    pub focal: usize,
    pub p: usize,
    /// Items whose parameters are clearly larger (`ω_jk → +∞`).
    pub k_plus: Vec<usize>,
    /// Items whose parameters are clearly smaller (`ω_jk → -∞`).
    pub k_minus: Vec<usize>,
    /// Items tied with the focal item, with finite limits in `omega0`.
    pub k_tied: Vec<usize>,
    pub omega0: Vec<f64>,
    /// Pairs that fall between the tie and separation thresholds.
    pub indeterminate: Vec<usize>,
}

impl GroupClassification {
    /// Focal item tied with `tied` others (offset 0), with `above` items
    /// strictly above and `below` strictly below.
    pub fn block(above: usize, tied: usize, below: usize) -> Self {
        let focal = above;
        let p = above + tied + below + 1;
        GroupClassification {
            focal,
            p,
            k_plus: (0..above).collect(),
            k_minus: (above + tied + 1..p).collect(),
            k_tied: (above + 1..=above + tied).collect(),
            omega0: vec![0.0; tied],
            indeterminate: Vec::new(),
        }
    }

    fn check(&self, sigmas: &[f64]) -> Result<()> {
        if !self.indeterminate.is_empty() {
            return Err(Error::validation(
                "classification has indeterminate pairs; no limit distribution applies",
            ));
        }
        let mut seen = vec![false; self.p];
        seen[self.focal] = true;
        for &k in self.k_plus.iter().chain(&self.k_minus).chain(&self.k_tied) {
            if k >= self.p || std::mem::replace(&mut seen[k], true) {
                return Err(Error::validation("groups do not partition the items"));
            }
        }
        if seen.iter().any(|s| !s) || self.omega0.len() != self.k_tied.len() {
            return Err(Error::validation("groups do not partition the items"));
        }
        if sigmas.len() != self.p || sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::validation("need a positive sigma for every item"));
        }
        Ok(())
    }

    /// Lowest and highest attainable rank, `#K+ + 1` and `#K+ + #K_j + 1`.
    pub fn support(&self) -> (usize, usize) {
        (
            self.k_plus.len() + 1,
            self.k_plus.len() + self.k_tied.len() + 1,
        )
    }
}

/// Monte Carlo pmf of `1 + #K+ + Σ_{k∈K_j} I(σ_j N_j ≤ σ_k N_k + ω⁰_jk)`.
pub fn g_limit_pmf(
    cls: &GroupClassification,
    sigmas: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    cls.check(sigmas)?;
    let zeros = vec![0.0; cls.p];
    bootstrap_like_pmf(cls, sigmas, &zeros, false, draws, seed)
}

/// `G_j(r)`.
pub fn g_limit_distribution(
    cls: &GroupClassification,
    sigmas: &[f64],
    r: usize,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    Ok(pmf_to_cdf(&g_limit_pmf(cls, sigmas, draws, seed)?, r))
}

/// Monte Carlo pmf of the n-out-of-n bootstrap limit with the first-level
/// normals held at `z`:
/// `1 + #K+ + Σ_{k∈K_j} I{σ_j(z_j + N'_j) ≤ σ_k(z_k + N'_k) + ω⁰_jk}`.
pub fn bootstrap_limit_pmf(
    cls: &GroupClassification,
    sigmas: &[f64],
    z: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    cls.check(sigmas)?;
    if z.len() != cls.p {
        return Err(Error::validation("z must have one entry per item"));
    }
    bootstrap_like_pmf(cls, sigmas, z, true, draws, seed)
}

pub fn bootstrap_limit_distribution(
    cls: &GroupClassification,
    sigmas: &[f64],
    z: &[f64],
    r: usize,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    Ok(pmf_to_cdf(
        &bootstrap_limit_pmf(cls, sigmas, z, draws, seed)?,
        r,
    ))
}

fn bootstrap_like_pmf(
    cls: &GroupClassification,
    sigmas: &[f64],
    z: &[f64],
    bootstrap: bool,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let base = cls.k_plus.len() + 1;
    if cls.k_tied.is_empty() {
        let mut pmf = vec![0.0; cls.p];
        pmf[base - 1] = 1.0;
        return Ok(pmf);
    }
    check_draws(draws)?;
    let j = cls.focal;
    let tag = if bootstrap { 3 } else { 2 };
    let seed = StreamSeed::new(seed).child(domain::ORACLE, tag);
    Ok(mc_pmf(cls.p, draws, seed, |normal| {
        let lhs = sigmas[j] * (z[j] + normal());
        let mut r = base;
        for (&k, &w) in cls.k_tied.iter().zip(&cls.omega0) {
            if lhs <= sigmas[k] * (z[k] + normal()) + w {
                r += 1;
            }
        }
        r
    }))
}

/// Monte Carlo pmf of `R_j = 1 + Σ_{k≤j0, k≠j} I(Z_j σ_j ≤ Z_k σ_k)`.
pub fn r_limit_pmf(sigmas_top: &[f64], j: usize, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let spec = LimitSpec::new(sigmas_top.to_vec(), vec![0.0; sigmas_top.len()], j)?;
    check_draws(draws)?;
    let seed = StreamSeed::new(seed).child(domain::ORACLE, 4);
    let p = spec.p();
    Ok(mc_pmf(p, draws, seed, |normal| {
        let lhs = spec.sigmas[j] * normal();
        1 + (0..p)
            .filter(|&k| k != j)
            .filter(|&k| lhs <= spec.sigmas[k] * normal())
            .count()
    }))
}

pub fn r_limit_distribution(
    sigmas_top: &[f64],
    j: usize,
    r: usize,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    Ok(pmf_to_cdf(&r_limit_pmf(sigmas_top, j, draws, seed)?, r))
}

/// `E(R_j | Z_j = z) = 1 + Σ_{k≠j} Φ(-z σ_j / σ_k)`.
pub fn r_conditional_mean(sigmas_top: &[f64], j: usize, z: f64) -> f64 {
    1.0 + sigmas_top
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, &sk)| normal_cdf(-z * sigmas_top[j] / sk))
        .sum::<f64>()
}

/// Draws of `E(R_j | Z_j)` with `Z_j` standard normal.
pub fn r_conditional_mean_samples(
    sigmas_top: &[f64],
    j: usize,
    draws: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = StreamSeed::new(seed).child(domain::ORACLE, 5).rng(0);
    (0..draws)
        .map(|_| r_conditional_mean(sigmas_top, j, rng.sample(StandardNormal)))
        .collect()
}

/// `C = ∫_{x>0} Φ(-x) dx = φ(0)`.
pub fn constant_c() -> f64 {
    normal_pdf(0.0)
}

/// `∫_{-a}^∞ Φ(-x) dx = aΦ(a) + φ(a)`.
pub fn tail_integral(a: f64) -> f64 {
    a * normal_cdf(a) + normal_pdf(a)
}

/// The same integral by adaptive quadrature (the integrand is below 1e-300
/// past x = 38).
pub fn tail_integral_quadrature(a: f64) -> f64 {
    integrate_adaptive(|x| normal_cdf(-x), -a, 38.0, 1e-13)
}

/// Asymptotic expected rank `δ^{-1} ∫_{-jδ}^∞ Φ(-x) dx` in the linear model
/// with spacing difficulty `δ`.
pub fn expected_rank_asymptotic(j: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::validation(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(tail_integral(j as f64 * delta) / delta)
}

/// Finite-`p` expected rank of item `j` (1-based) when all estimates are
/// normal with equal variance and the linear spacing has difficulty `δ`:
/// `1 + Σ_{k≠j} Φ((j - k) δ)`.
pub fn expected_rank_linear_exact(j: usize, delta: f64, p: usize) -> f64 {
    1.0 + (1..=p)
        .filter(|&k| k != j)
        .map(|k| normal_cdf((j as f64 - k as f64) * delta))
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub tie: f64,
    pub separation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            tie: 1.0,
            separation: 3.0,
        }
    }
}

/// Finite-sample grouping of the items relative to `focal`. Differences are
/// standardised by `((σ_j² + σ_k²)/2)^{1/2}`; with `s = m` (or `n`), an item
/// is tied when `|Δ| s^{1/2} ≤ τ_tie` and separated when
/// `|Δ| (s / log s)^{1/2} ≥ τ_sep`. Anything in between is indeterminate.
pub fn classify_groups(
    theta: &[f64],
    sigmas: &[f64],
    focal: usize,
    n: usize,
    m: Option<usize>,
    thresholds: Thresholds,
) -> Result<GroupClassification> {
    let p = theta.len();
    if sigmas.len() != p || focal >= p {
        return Err(Error::validation(
            "theta and sigmas must match and contain the focal item",
        ));
    }
    let s = m.unwrap_or(n) as f64;
    if s < 2.0 {
        return Err(Error::validation("sample size must be at least 2"));
    }
    let root_s = s.sqrt();
    let sep_scale = (s / s.ln()).sqrt();
    let mut cls = GroupClassification {
        focal,
        p,
        k_plus: Vec::new(),
        k_minus: Vec::new(),
        k_tied: Vec::new(),
        omega0: Vec::new(),
        indeterminate: Vec::new(),
    };
    for k in 0..p {
        if k == focal {
            continue;
        }
        let diff = theta[k] - theta[focal];
        let unit = ((sigmas[focal].powi(2) + sigmas[k].powi(2)) / 2.0).sqrt();
        let d = diff / unit;
        if d.abs() * root_s <= thresholds.tie {
            cls.k_tied.push(k);
            cls.omega0.push(root_s * diff);
        } else if d.abs() * sep_scale >= thresholds.separation {
            if d > 0.0 {
                cls.k_plus.push(k);
            } else {
                cls.k_minus.push(k);
            }
        } else {
            cls.indeterminate.push(k);
        }
    }
    Ok(cls)
}
