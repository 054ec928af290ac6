//! Plug-in statistics and their asymptotic scale estimates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Layout, PopulationData};
use crate::error::{Error, Result};
use crate::stream::{domain, StreamSeed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum EstimatorKind {
    Mean,
    /// Fraction of ones in 0/1 data.
    Proportion,
    /// Linear interpolation between order statistics at position `q(n-1)+1`.
    Quantile {
        q: f64,
    },
    /// Pearson correlation of the item's sample with the response.
    CorrelationWithResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum SigmaMethod {
    PlugIn,
    /// `sqrt(n · var*)` over `replicates` n-out-of-n resamples of one item.
    BootstrapVariance {
        replicates: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub sigma: SigmaMethod,
}

impl EstimatorSpec {
    pub const MEAN: EstimatorSpec = EstimatorSpec {
        kind: EstimatorKind::Mean,
        sigma: SigmaMethod::PlugIn,
    };

    pub fn new(kind: EstimatorKind) -> Self {
        let sigma = match kind {
            EstimatorKind::Mean | EstimatorKind::Proportion => SigmaMethod::PlugIn,
            _ => SigmaMethod::BootstrapVariance {
                replicates: 500,
                seed: 0,
            },
        };
        EstimatorSpec { kind, sigma }
    }

    pub fn with_sigma(mut self, sigma: SigmaMethod) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn needs_response(&self) -> bool {
        matches!(self.kind, EstimatorKind::CorrelationWithResponse)
    }

    /// Checks the estimator against the data it will be applied to.
    pub fn validate(&self, data: &PopulationData) -> Result<()> {
        match self.kind {
            EstimatorKind::Quantile { q } if !(q > 0.0 && q < 1.0) => {
                return Err(Error::validation(format!(
                    "quantile level {q} is not in (0,1)"
                )));
            }
            EstimatorKind::CorrelationWithResponse => {
                if data.layout() != Layout::Matrix || data.response().is_none() {
                    return Err(Error::validation(
                        "correlation estimator needs matrix data with a response column",
                    ));
                }
            }
            EstimatorKind::Proportion => {
                for j in 0..data.p() {
                    if data.sample(j).iter().any(|&v| v != 0.0 && v != 1.0) {
                        return Err(Error::validation(format!(
                            "item {} has values outside {{0,1}}; proportion needs binary data",
                            data.label(j)
                        )));
                    }
                }
            }
            _ => {}
        }
        if let SigmaMethod::BootstrapVariance { replicates, .. } = self.sigma {
            if replicates < 100 {
                return Err(Error::validation(format!(
                    "bootstrap variance needs at least 100 replicates, got {replicates}"
                )));
            }
        }
        Ok(())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Quantile at level `q`; sorts `xs` in place.
pub(crate) fn quantile_in_place(xs: &mut [f64], q: f64) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len();
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return xs[n - 1];
    }
    xs[lo] + (h - lo as f64) * (xs[lo + 1] - xs[lo])
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::numerical("zero variance in correlation estimator"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Estimates the statistic from one sample, using `scratch` for kinds that
/// need to reorder the data.
pub(crate) fn estimate_with(
    sample: &[f64],
    kind: EstimatorKind,
    response: Option<&[f64]>,
    scratch: &mut Vec<f64>,
) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::validation("estimator needs at least 2 observations"));
    }
    match kind {
        EstimatorKind::Mean => Ok(mean(sample)),
        EstimatorKind::Proportion => {
            if sample.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::validation("proportion needs data in {0,1}"));
            }
            Ok(mean(sample))
        }
        EstimatorKind::Quantile { q } => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::validation(format!(
                    "quantile level {q} is not in (0,1)"
                )));
            }
            scratch.clear();
            scratch.extend_from_slice(sample);
            Ok(quantile_in_place(scratch, q))
        }
        EstimatorKind::CorrelationWithResponse => {
            let y = response
                .ok_or_else(|| Error::validation("correlation estimator needs a response"))?;
            if y.len() != sample.len() {
                return Err(Error::validation(
                    "response length differs from sample length",
                ));
            }
            pearson(sample, y)
        }
    }
}

pub fn estimate(sample: &[f64], spec: &EstimatorSpec, response: Option<&[f64]>) -> Result<f64> {
    estimate_with(sample, spec.kind, response, &mut Vec::new())
}

/// `θ̂_j` for every item.
pub fn estimate_all(data: &PopulationData, spec: &EstimatorSpec) -> Result<Vec<f64>> {
    spec.validate(data)?;
    let mut scratch = Vec::new();
    (0..data.p())
        .map(|j| {
            estimate_with(data.sample(j), spec.kind, data.response(), &mut scratch)
                .map_err(|e| Error::numerical(format!("item {}: {e}", data.label(j))))
        })
        .collect()
}

/// Asymptotic standard deviation of `n^{1/2}(θ̂ - θ)` for one sample.
///
/// `seed_index` separates the bootstrap streams of different items when the
/// bootstrap-variance method is used.
pub fn sigma_hat_indexed(
    sample: &[f64],
    spec: &EstimatorSpec,
    response: Option<&[f64]>,
    seed_index: u64,
) -> Result<f64> {
    let n = sample.len();
    let sigma = match spec.sigma {
        SigmaMethod::PlugIn => match spec.kind {
            EstimatorKind::Mean => {
                let m = mean(sample);
                (sample.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
            EstimatorKind::Proportion => {
                let p = estimate(sample, spec, None)?;
                (p * (1.0 - p)).sqrt()
            }
            other => {
                return Err(Error::validation(format!(
                    "no plug-in scale formula for {other:?}; use bootstrap variance"
                )))
            }
        },
        SigmaMethod::BootstrapVariance { replicates, seed } => {
            if replicates < 100 {
                return Err(Error::validation(format!(
                    "bootstrap variance needs at least 100 replicates, got {replicates}"
                )));
            }
            let mut rng = StreamSeed::new(seed)
                .child(domain::SIGMA, seed_index)
                .rng(0);
            let mut xs = vec![0.0; n];
            let mut ys = vec![0.0; n];
            let mut scratch = Vec::new();
            let mut values = Vec::with_capacity(replicates);
            for _ in 0..replicates {
                for i in 0..n {
                    let k = rng.random_range(0..n);
                    xs[i] = sample[k];
                    if let Some(y) = response {
                        ys[i] = y[k];
                    }
                }
                let r = response.map(|_| ys.as_slice());
                values.push(estimate_with(&xs, spec.kind, r, &mut scratch)?);
            }
            let m = mean(&values);
            let var =
                values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (replicates - 1) as f64;
            (n as f64 * var).sqrt()
        }
    };
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::numerical(
            "degenerate sample: estimated scale is zero",
        ));
    }
    Ok(sigma)
}

pub fn sigma_hat(sample: &[f64], spec: &EstimatorSpec, response: Option<&[f64]>) -> Result<f64> {
    sigma_hat_indexed(sample, spec, response, 0)
}

/// `σ̂_j` for every item, each computed on the item's own sample.
pub fn sigma_hat_all(data: &PopulationData, spec: &EstimatorSpec) -> Result<Vec<f64>> {
    spec.validate(data)?;
    (0..data.p())
        .map(|j| {
            sigma_hat_indexed(data.sample(j), spec, data.response(), j as u64)
                .map_err(|e| Error::numerical(format!("item {}: {e}", data.label(j))))
        })
        .collect()
}
