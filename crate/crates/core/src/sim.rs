//! Synthetic ranking scenarios, repeated-dataset runs and error metrics.
//!
//! A scenario fixes the parameters `θ_j`, the noise model and the bootstrap
//! plan. Dataset `d` of a scenario is drawn from stream `(seed, d)`, so two
//! scenarios that share a seed and a data model see the same datasets even
//! when their bootstrap plans differ.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::PopulationData;
use crate::engine::{
    bootstrap_rank_distribution, conditional_rank_distribution, interval_width_summary,
    prediction_intervals, ConditionalLoops, RankDistribution,
};
use crate::error::{Error, Result};
use crate::estimators::{estimate_all, EstimatorSpec};
use crate::par;
use crate::ranking::rank_into;
use crate::resampling::{ResamplePlan, Scheme, SizeRule};
use crate::stream::{domain, StreamSeed};

/// z quantile for the two-sided 90% band on scenario averages.
const Z90: f64 = 1.644_853_626_951_472_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum ThetaRule {
    /// `θ_j = 1 - gap·j`.
    FixedSpacing { gap: f64 },
    /// `θ_j = high` for `j ≤ j0`, `low` otherwise.
    TiedBlock { j0: usize, high: f64, low: f64 },
    /// Equal steps `θ_j - θ_{j+1} = base·(10/m)^α`, starting from 1.
    AlphaSpacing {
        alpha: f64,
        #[serde(default = "default_alpha_base")]
        base: f64,
    },
    /// `θ_j = a - ε·j`.
    LinearModel { a: f64, epsilon: f64 },
    /// `θ_j = high` for `j ≤ j0`; the rest are drawn once per scenario from
    /// `U[tail_lo, tail_hi]`.
    UniformTail {
        j0: usize,
        high: f64,
        tail_lo: f64,
        tail_hi: f64,
    },
}

fn default_alpha_base() -> f64 {
    0.2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub sd: f64,
    /// Common correlation between the noise of any two items.
    #[serde(default)]
    pub rho: f64,
}

impl Default for Noise {
    fn default() -> Self {
        Noise { sd: 1.0, rho: 0.0 }
    }
}

/// Resample size as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum MRule {
    Full,
    Fixed {
        m: usize,
    },
    Fraction {
        rho: f64,
    },
    /// `min(10·n^{1/2}, n)`.
    TenRootN,
    /// Grows like `n / log n`, equal to `base_m` at `n = base_n`.
    NOverLogN {
        base_n: usize,
        base_m: usize,
    },
}

impl MRule {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let nf = n as f64;
        let m = match *self {
            MRule::Full => n,
            MRule::Fixed { m } => m,
            MRule::Fraction { rho } => {
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(Error::validation(format!(
                        "fraction must lie in (0, 1], got {rho}"
                    )));
                }
                (rho * nf).round() as usize
            }
            MRule::TenRootN => (10.0 * nf.sqrt()).round().min(nf) as usize,
            MRule::NOverLogN { base_n, base_m } => {
                if base_n < 2 {
                    return Err(Error::validation("base n must be at least 2"));
                }
                let b = base_n as f64;
                (base_m as f64 * (nf / nf.ln()) / (b / b.ln())).round() as usize
            }
        };
        if m < 2 || m > n {
            return Err(Error::validation(format!(
                "resample size {m} outside 2..={n}"
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPlan {
    pub scheme: Scheme,
    pub m: MRule,
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Metric {
    /// Mean width of the prediction intervals over all items.
    MeanWidth,
    /// `Σ_j Σ_r (P(r̂*_j = r | X) - P(r̂_j = r))²` against the Monte Carlo truth.
    SquaredError,
    /// Top-five CDF error against the uniform truth, raw and scaled to 100.
    ErrorTop5,
    /// Total-variation distance of the top `block` rows from uniform on
    /// `1..=block`, averaged over the block.
    TopBlockTv { block: usize },
    /// Bootstrap mass outside `1..=block` for the top `block` items.
    MassOutside { block: usize },
    /// Empirical rank of `item` (1-based) in the generated dataset.
    PointRank { item: usize },
    /// `var(r̂*_j | X)` averaged over the top `block` items.
    ConditionalVariance {
        block: usize,
        outer: usize,
        inner: usize,
    },
}

impl Metric {
    fn needs_bootstrap(&self) -> bool {
        !matches!(
            self,
            Metric::PointRank { .. } | Metric::ConditionalVariance { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub theta_rule: ThetaRule,
    #[serde(default)]
    pub noise: Noise,
    pub plan: ScenarioPlan,
    pub dataset_reps: usize,
    #[serde(default)]
    pub truth_reps: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
    pub metrics: Vec<Metric>,
}

fn default_level() -> f64 {
    0.9
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 2 {
            return Err(Error::validation(format!(
                "scenario {}: n and p must be at least 2",
                self.name
            )));
        }
        if !(0.0..1.0).contains(&self.noise.rho) {
            return Err(Error::validation(format!(
                "scenario {}: rho must lie in [0, 1), got {}",
                self.name, self.noise.rho
            )));
        }
        if !(self.noise.sd >= 0.0) || !self.noise.sd.is_finite() {
            return Err(Error::validation(format!(
                "scenario {}: sd must be finite and non-negative",
                self.name
            )));
        }
        if self.dataset_reps == 0 {
            return Err(Error::validation(format!(
                "scenario {}: dataset_reps must be positive",
                self.name
            )));
        }
        if self.plan.scheme == Scheme::IndependentPopulations {
            return Err(Error::validation(format!(
                "scenario {}: generated data are matrix layout; use synchronous or independent-component",
                self.name
            )));
        }
        self.m()?;
        let block_ok = |b: usize| b >= 1 && b <= self.p;
        for metric in &self.metrics {
            match *metric {
                Metric::SquaredError if self.truth_reps < 500 => {
                    return Err(Error::validation(format!(
                        "scenario {}: squared error needs truth_reps >= 500",
                        self.name
                    )))
                }
                Metric::ErrorTop5 if self.p < 5 => {
                    return Err(Error::validation(format!(
                        "scenario {}: top-five error needs p >= 5",
                        self.name
                    )))
                }
                Metric::TopBlockTv { block } | Metric::MassOutside { block }
                    if !block_ok(block) =>
                {
                    return Err(Error::validation(format!(
                        "scenario {}: block outside 1..=p",
                        self.name
                    )))
                }
                Metric::ConditionalVariance {
                    block,
                    outer,
                    inner,
                } if !block_ok(block) || outer == 0 || inner == 0 => {
                    return Err(Error::validation(format!(
                        "scenario {}: conditional metric needs a valid block and positive loops",
                        self.name
                    )))
                }
                Metric::PointRank { item } if item == 0 || item > self.p => {
                    return Err(Error::validation(format!(
                        "scenario {}: item outside 1..=p",
                        self.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn m(&self) -> Result<usize> {
        self.plan.m.resolve(self.n)
    }

    /// Parameters `θ_1..θ_p`.
    pub fn theta(&self) -> Result<Vec<f64>> {
        let p = self.p;
        let idx = |j: usize| (j + 1) as f64;
        Ok(match self.theta_rule {
            ThetaRule::FixedSpacing { gap } => (0..p).map(|j| 1.0 - gap * idx(j)).collect(),
            ThetaRule::TiedBlock { j0, high, low } => {
                (0..p).map(|j| if j < j0 { high } else { low }).collect()
            }
            ThetaRule::AlphaSpacing { alpha, base } => {
                let step = base * (10.0 / self.m()? as f64).powf(alpha);
                (0..p).map(|j| 1.0 - step * j as f64).collect()
            }
            ThetaRule::LinearModel { a, epsilon } => (0..p).map(|j| a - epsilon * idx(j)).collect(),
            ThetaRule::UniformTail {
                j0,
                high,
                tail_lo,
                tail_hi,
            } => {
                if !(tail_lo <= tail_hi) {
                    return Err(Error::validation("tail_lo must not exceed tail_hi"));
                }
                let mut rng = StreamSeed::new(self.seed).child(domain::THETA, 0).rng(0);
                (0..p)
                    .map(|j| {
                        if j < j0 {
                            high
                        } else {
                            tail_lo + (tail_hi - tail_lo) * rng.random::<f64>()
                        }
                    })
                    .collect()
            }
        })
    }

    fn resample_plan(&self, rep: usize) -> Result<ResamplePlan> {
        let m = self.m()?;
        Ok(ResamplePlan::new(
            self.plan.scheme,
            SizeRule::PerItem(vec![m; self.p]),
            self.plan.replicates,
            StreamSeed::new(self.seed)
                .child(domain::BOOTSTRAP, rep as u64)
                .value(),
        ))
    }
}

/// `X_ij = θ_j + sd·(√ρ·W_i + √(1-ρ)·Z_ij)` with shared `W_i`.
pub fn generate_dataset_with(
    theta: &[f64],
    n: usize,
    noise: Noise,
    seed: StreamSeed,
) -> Result<PopulationData> {
    let p = theta.len();
    let mut rng = seed.rng(0);
    let mut cols = vec![Vec::with_capacity(n); p];
    let (a, b) = (noise.rho.sqrt(), (1.0 - noise.rho).sqrt());
    for _ in 0..n {
        let w: f64 = if noise.rho > 0.0 {
            rng.sample(StandardNormal)
        } else {
            0.0
        };
        for (col, &t) in cols.iter_mut().zip(theta) {
            let z: f64 = rng.sample(StandardNormal);
            col.push(t + noise.sd * (a * w + b * z));
        }
    }
    PopulationData::matrix(cols, None)
}

/// Dataset `rep` of the scenario.
pub fn generate_dataset(spec: &ScenarioSpec, rep: usize) -> Result<PopulationData> {
    spec.validate()?;
    let theta = spec.theta()?;
    generate_dataset_with(&theta, spec.n, spec.noise, dataset_seed(spec, rep))
}

fn dataset_seed(spec: &ScenarioSpec, rep: usize) -> StreamSeed {
    StreamSeed::new(spec.seed).child(domain::DATASET, rep as u64)
}

/// Column means, without materialising a dataset.
fn sample_means(theta: &[f64], n: usize, noise: Noise, seed: StreamSeed) -> Result<Vec<f64>> {
    let d = generate_dataset_with(theta, n, noise, seed)?;
    estimate_all(&d, &EstimatorSpec::MEAN)
}

/// Distribution of the empirical ranks over `truth_reps` fresh datasets,
/// drawn from streams disjoint from the analysed datasets.
pub fn true_rank_distribution(spec: &ScenarioSpec, truth_reps: usize) -> Result<RankDistribution> {
    if truth_reps < 500 {
        return Err(Error::validation(format!(
            "truth needs at least 500 datasets, got {truth_reps}"
        )));
    }
    spec.validate()?;
    let theta = spec.theta()?;
    let p = spec.p;
    let seed = StreamSeed::new(spec.seed).child(domain::TRUTH, 0);
    let ranks = par::map_indexed(truth_reps, |t| -> Result<Vec<u32>> {
        let means = sample_means(
            &theta,
            spec.n,
            spec.noise,
            seed.child(domain::DATASET, t as u64),
        )?;
        let mut r = vec![0u32; p];
        rank_into(&means, &mut Vec::new(), &mut r);
        Ok(r)
    });
    let mut counts = vec![0u32; p * p];
    for r in ranks {
        for (j, &rank) in r?.iter().enumerate() {
            counts[j * p + rank as usize - 1] += 1;
        }
    }
    RankDistribution::from_counts(p, truth_reps, counts, vec![spec.n; p])
}

/// `Σ_j Σ_r (boot[j][r] - truth[j][r])²`.
pub fn squared_error_pointwise(boot: &RankDistribution, truth: &RankDistribution) -> Result<f64> {
    if boot.p() != truth.p() {
        return Err(Error::validation(format!(
            "dimension mismatch: {} items vs {}",
            boot.p(),
            truth.p()
        )));
    }
    let p = boot.p();
    let mut total = 0.0;
    for j in 0..p {
        for r in 1..=p {
            total += (boot.prob(j, r) - truth.prob(j, r)).powi(2);
        }
    }
    Ok(total)
}

/// Same as [`squared_error_pointwise`] on probability rows.
pub fn squared_error_rows(boot: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    if boot.len() != truth.len() || boot.iter().zip(truth).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::validation("dimension mismatch"));
    }
    Ok(boot
        .iter()
        .zip(truth)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
        .sum())
}

const TOP: usize = 5;

/// `Σ_{j≤5} Σ_{r≤5} (P(r̂*_j ≤ r | X) - r/5)²` from CDF rows.
pub fn error_top5_from_cdfs(cdfs: &[[f64; TOP]]) -> Result<f64> {
    if cdfs.len() != TOP {
        return Err(Error::validation("need CDFs for exactly five items"));
    }
    Ok(cdfs
        .iter()
        .flat_map(|c| {
            c.iter()
                .enumerate()
                .map(|(i, v)| (v - (i + 1) as f64 / TOP as f64).powi(2))
        })
        .sum())
}

fn top5_cdfs(boot: &RankDistribution) -> Vec<[f64; TOP]> {
    (0..TOP)
        .map(|j| std::array::from_fn(|i| boot.cdf(j, i + 1)))
        .collect()
}

/// Largest raw top-five error over degenerate bootstrap distributions: every
/// assignment of distinct point-mass ranks to the five items.
pub fn error_top5_max(p: usize) -> Result<f64> {
    if p < TOP {
        return Err(Error::validation(format!(
            "top-five error needs p >= 5, got {p}"
        )));
    }
    // only whether a rank exceeds 5 matters, so ranks up to 10 cover every case
    let limit = p.min(2 * TOP);
    let mut best = 0.0f64;
    let mut ranks = [0usize; TOP];
    fn search(pos: usize, limit: usize, ranks: &mut [usize; TOP], best: &mut f64) {
        if pos == TOP {
            let cdfs: Vec<[f64; TOP]> = ranks
                .iter()
                .map(|&r0| std::array::from_fn(|i| if i + 1 >= r0 { 1.0 } else { 0.0 }))
                .collect();
            *best = best.max(error_top5_from_cdfs(&cdfs).unwrap());
            return;
        }
        for r in 1..=limit {
            if !ranks[..pos].contains(&r) {
                ranks[pos] = r;
                search(pos + 1, limit, ranks, best);
            }
        }
    }
    search(0, limit, &mut ranks, &mut best);
    Ok(best)
}

/// Raw top-five error of a bootstrap distribution.
pub fn error_top5_cdf(boot: &RankDistribution) -> Result<f64> {
    if boot.p() < TOP {
        return Err(Error::validation(format!(
            "top-five error needs p >= 5, got {}",
            boot.p()
        )));
    }
    error_top5_from_cdfs(&top5_cdfs(boot))
}

/// Top-five error rescaled so that 100 is the largest possible value.
pub fn error_top5_scaled(boot: &RankDistribution) -> Result<f64> {
    Ok(100.0 * error_top5_cdf(boot)? / error_top5_max(boot.p())?)
}

/// Total-variation distance between a rank row and uniform on `1..=block`.
pub fn tv_from_uniform(row: &[f64], block: usize) -> f64 {
    let u = 1.0 / block as f64;
    0.5 * row
        .iter()
        .enumerate()
        .map(|(i, &q)| if i < block { (q - u).abs() } else { q.abs() })
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub scenario: String,
    pub rep: usize,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub metric: String,
    pub reps: usize,
    pub mean: f64,
    pub sd: f64,
    /// 90% normal-approximation band for the mean.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub m: usize,
    pub rows: Vec<MetricRow>,
    pub summaries: Vec<MetricSummary>,
    /// Bootstrap rank probabilities averaged over datasets, `p × p` row-major;
    /// empty when no metric runs the bootstrap.
    pub mean_distribution: Vec<f64>,
}

impl ScenarioResult {
    pub fn summary(&self, metric: &str) -> Option<&MetricSummary> {
        self.summaries.iter().find(|s| s.metric == metric)
    }

    /// Row `j` of the dataset-averaged bootstrap distribution.
    pub fn mean_row(&self, j: usize) -> &[f64] {
        let p = self.spec.p;
        &self.mean_distribution[j * p..(j + 1) * p]
    }
}

fn metric_names(metric: &Metric) -> Vec<String> {
    match metric {
        Metric::MeanWidth => vec!["mean_width".into()],
        Metric::SquaredError => vec!["squared_error".into()],
        Metric::ErrorTop5 => vec!["error_top5_raw".into(), "error_top5_scaled".into()],
        Metric::TopBlockTv { .. } => vec!["top_block_tv".into()],
        Metric::MassOutside { .. } => vec!["mass_outside_block".into()],
        Metric::PointRank { item } => vec![format!("point_rank_{item}")],
        Metric::ConditionalVariance { .. } => vec!["conditional_variance".into()],
    }
}

struct RepOutput {
    values: Vec<f64>,
    probs: Vec<f64>,
}

fn run_rep(
    spec: &ScenarioSpec,
    theta: &[f64],
    truth: Option<&RankDistribution>,
    rep: usize,
) -> Result<RepOutput> {
    let data = generate_dataset_with(theta, spec.n, spec.noise, dataset_seed(spec, rep))?;
    let est = EstimatorSpec::MEAN;
    let plan = spec.resample_plan(rep)?;
    let p = spec.p;
    let boot = if spec.metrics.iter().any(Metric::needs_bootstrap) {
        Some(bootstrap_rank_distribution(&data, &est, &plan)?)
    } else {
        None
    };
    let mut values = Vec::new();
    for metric in &spec.metrics {
        match *metric {
            Metric::MeanWidth => {
                let iv = prediction_intervals(boot.as_ref().unwrap(), spec.level)?;
                values.push(interval_width_summary(&iv));
            }
            Metric::SquaredError => {
                values.push(squared_error_pointwise(
                    boot.as_ref().unwrap(),
                    truth.unwrap(),
                )?);
            }
            Metric::ErrorTop5 => {
                let b = boot.as_ref().unwrap();
                values.push(error_top5_cdf(b)?);
                values.push(error_top5_scaled(b)?);
            }
            Metric::TopBlockTv { block } => {
                let b = boot.as_ref().unwrap();
                let tv = (0..block)
                    .map(|j| tv_from_uniform(&b.row(j), block))
                    .sum::<f64>()
                    / block as f64;
                values.push(tv);
            }
            Metric::MassOutside { block } => {
                let b = boot.as_ref().unwrap();
                let mass = (0..block).map(|j| 1.0 - b.cdf(j, block)).sum::<f64>() / block as f64;
                values.push(mass);
            }
            Metric::PointRank { item } => {
                let means = estimate_all(&data, &est)?;
                let mut r = vec![0u32; p];
                rank_into(&means, &mut Vec::new(), &mut r);
                values.push(r[item - 1] as f64);
            }
            Metric::ConditionalVariance {
                block,
                outer,
                inner,
            } => {
                let loops = ConditionalLoops { outer, inner };
                let mut total = 0.0;
                for j in 0..block {
                    total +=
                        conditional_rank_distribution(&data, &est, &plan, loops, j)?.total_variance;
                }
                values.push(total / block as f64);
            }
        }
    }
    let probs = match &boot {
        Some(b) => (0..p).flat_map(|j| b.row(j)).collect(),
        None => Vec::new(),
    };
    Ok(RepOutput { values, probs })
}

/// Runs every dataset replicate of a scenario and summarises each metric.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    spec.validate()?;
    let theta = spec.theta()?;
    let m = spec.m()?;
    let truth = if spec.metrics.contains(&Metric::SquaredError) {
        Some(true_rank_distribution(spec, spec.truth_reps)?)
    } else {
        None
    };
    let names: Vec<String> = spec.metrics.iter().flat_map(metric_names).collect();
    let outputs = par::map_indexed(spec.dataset_reps, |rep| {
        run_rep(spec, &theta, truth.as_ref(), rep)
    });

    let mut rows = Vec::new();
    let mut per_metric = vec![Vec::with_capacity(spec.dataset_reps); names.len()];
    let mut mean_distribution = Vec::new();
    for (rep, out) in outputs.into_iter().enumerate() {
        let out = out.map_err(|e| match e {
            Error::Replicate { replicate, message } => Error::Replicate {
                replicate,
                message: format!("scenario {} dataset {rep}: {message}", spec.name),
            },
            other => other,
        })?;
        for ((name, v), acc) in names.iter().zip(&out.values).zip(&mut per_metric) {
            acc.push(*v);
            rows.push(MetricRow {
                scenario: spec.name.clone(),
                rep,
                n: spec.n,
                p: spec.p,
                m,
                metric: name.clone(),
                value: *v,
            });
        }
        if !out.probs.is_empty() {
            if mean_distribution.is_empty() {
                mean_distribution = vec![0.0; out.probs.len()];
            }
            for (acc, q) in mean_distribution.iter_mut().zip(&out.probs) {
                *acc += q;
            }
        }
    }
    for q in &mut mean_distribution {
        *q /= spec.dataset_reps as f64;
    }

    let mut summaries: Vec<MetricSummary> = names
        .iter()
        .zip(&per_metric)
        .map(|(name, vals)| summarize(spec, m, name, vals))
        .collect();
    for metric in &spec.metrics {
        if let Metric::TopBlockTv { block } = *metric {
            let p = spec.p;
            let tv = (0..block)
                .map(|j| tv_from_uniform(&mean_distribution[j * p..(j + 1) * p], block))
                .sum::<f64>()
                / block as f64;
            summaries.push(MetricSummary {
                scenario: spec.name.clone(),
                n: spec.n,
                p: spec.p,
                m,
                metric: "top_block_tv_pooled".into(),
                reps: spec.dataset_reps,
                mean: tv,
                sd: f64::NAN,
                ci_lo: f64::NAN,
                ci_hi: f64::NAN,
            });
        }
    }
    Ok(ScenarioResult {
        spec: spec.clone(),
        m,
        rows,
        summaries,
        mean_distribution,
    })
}

fn summarize(spec: &ScenarioSpec, m: usize, name: &str, vals: &[f64]) -> MetricSummary {
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let sd = if vals.len() > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    let half = if sd.is_nan() {
        f64::NAN
    } else {
        Z90 * sd / k.sqrt()
    };
    MetricSummary {
        scenario: spec.name.clone(),
        n: spec.n,
        p: spec.p,
        m,
        metric: name.to_string(),
        reps: vals.len(),
        mean,
        sd,
        ci_lo: mean - half,
        ci_hi: mean + half,
    }
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

/// Per-replicate rows as CSV.
pub fn rows_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from("scenario,rep,n,p,m,metric,value\n");
    for r in results.iter().flat_map(|r| &r.rows) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scenario,
            r.rep,
            r.n,
            r.p,
            r.m,
            r.metric,
            fmt_f(r.value)
        );
    }
    out
}

/// Per-metric summaries as CSV.
pub fn summary_csv(results: &[ScenarioResult]) -> String {
    let mut out = String::from("scenario,n,p,m,metric,reps,mean,sd,ci90_lo,ci90_hi\n");
    for s in results.iter().flat_map(|r| &r.summaries) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.scenario,
            s.n,
            s.p,
            s.m,
            s.metric,
            s.reps,
            fmt_f(s.mean),
            fmt_f(s.sd),
            fmt_f(s.ci_lo),
            fmt_f(s.ci_hi)
        );
    }
    out
}

/// How `p` grows with `n` in the high-dimensional schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Growth {
    Constant,
    Linear,
    Quadratic,
}

/// Whether the gap below the top block stays fixed or shrinks like
/// `(log n)^{-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMode {
    Constant,
    Shrinking,
}

pub const HD_BASE_N: usize = 20;
pub const HD_BASE_P: usize = 500;
pub const HD_BASE_GAP: f64 = 0.1;

/// One point of the high-dimensional schedule: five items at 1, the rest
/// uniform on `[0, 1 - gap]`, noise sd 0.25, independent-component
/// resampling with `m ∝ n / log n`.
pub fn high_dim_scenario(
    n: usize,
    growth: Growth,
    gap: GapMode,
    dataset_reps: usize,
    replicates: usize,
    seed: u64,
) -> ScenarioSpec {
    let ratio = n as f64 / HD_BASE_N as f64;
    let p = match growth {
        Growth::Constant => HD_BASE_P as f64,
        Growth::Linear => HD_BASE_P as f64 * ratio,
        Growth::Quadratic => HD_BASE_P as f64 * ratio * ratio,
    }
    .round() as usize;
    let g = match gap {
        GapMode::Constant => HD_BASE_GAP,
        GapMode::Shrinking => HD_BASE_GAP * ((HD_BASE_N as f64).ln() / (n as f64).ln()).sqrt(),
    };
    ScenarioSpec {
        name: format!("highdim-{}-{}-n{n}", growth_name(growth), gap_name(gap)),
        n,
        p,
        theta_rule: ThetaRule::UniformTail {
            j0: TOP,
            high: 1.0,
            tail_lo: 0.0,
            tail_hi: 1.0 - g,
        },
        noise: Noise { sd: 0.25, rho: 0.0 },
        plan: ScenarioPlan {
            scheme: Scheme::IndependentComponent,
            m: MRule::NOverLogN {
                base_n: HD_BASE_N,
                base_m: HD_BASE_N,
            },
            replicates,
        },
        dataset_reps,
        truth_reps: 0,
        level: 0.9,
        seed,
        metrics: vec![Metric::ErrorTop5],
    }
}

fn growth_name(g: Growth) -> &'static str {
    match g {
        Growth::Constant => "const",
        Growth::Linear => "linear",
        Growth::Quadratic => "quadratic",
    }
}

fn gap_name(g: GapMode) -> &'static str {
    match g {
        GapMode::Constant => "fixedgap",
        GapMode::Shrinking => "shrinkgap",
    }
}

fn base_spec(
    name: String,
    n: usize,
    p: usize,
    theta_rule: ThetaRule,
    plan: ScenarioPlan,
    reps: usize,
    seed: u64,
) -> ScenarioSpec {
    ScenarioSpec {
        name,
        n,
        p,
        theta_rule,
        noise: Noise::default(),
        plan,
        dataset_reps: reps,
        truth_reps: 0,
        level: 0.9,
        seed,
        metrics: vec![Metric::MeanWidth],
    }
}

fn ic(m: MRule, replicates: usize) -> ScenarioPlan {
    ScenarioPlan {
        scheme: Scheme::IndependentComponent,
        m,
        replicates,
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "spacing",
    "tied-block",
    "alpha-grid",
    "correlated",
    "highdim",
    "linear-expected-rank",
    "support",
    "conditional",
];

/// Built-in scenario families with their default sizes.
pub fn builtin(name: &str, seed: u64) -> Result<Vec<ScenarioSpec>> {
    let specs = match name {
        "spacing" => [100, 1000, 10_000]
            .iter()
            .map(|&n| {
                base_spec(
                    format!("spacing-n{n}"),
                    n,
                    10,
                    ThetaRule::FixedSpacing { gap: 0.1 },
                    ic(MRule::Full, 1000),
                    50,
                    seed,
                )
            })
            .collect(),
        "tied-block" => [300, 1000]
            .iter()
            .map(|&m| {
                let mut s = base_spec(
                    format!("tied-block-m{m}"),
                    1000,
                    10,
                    ThetaRule::TiedBlock {
                        j0: 5,
                        high: 1.0,
                        low: 0.0,
                    },
                    ic(MRule::Fixed { m }, 2000),
                    50,
                    seed,
                );
                s.metrics = vec![Metric::TopBlockTv { block: 5 }, Metric::MeanWidth];
                s
            })
            .collect(),
        "alpha-grid" => {
            let mut v = Vec::new();
            for &alpha in &[0.2, 0.5, 0.8] {
                for &n in &[400, 2500, 10_000] {
                    v.push(base_spec(
                        format!("alpha{alpha}-n{n}"),
                        n,
                        10,
                        ThetaRule::AlphaSpacing { alpha, base: 0.2 },
                        ic(MRule::TenRootN, 1000),
                        20,
                        seed,
                    ));
                }
            }
            v
        }
        "correlated" => {
            let p = 200;
            let mut v = Vec::new();
            for &rho in &[0.0, 0.25, 0.5] {
                for scheme in [Scheme::Synchronous, Scheme::IndependentComponent] {
                    let tag = if scheme == Scheme::Synchronous {
                        "sync"
                    } else {
                        "indep"
                    };
                    let mut s = base_spec(
                        format!("correlated-rho{rho}-{tag}"),
                        50,
                        p,
                        ThetaRule::LinearModel {
                            a: 1.0,
                            epsilon: 1.0 / (p as f64 - 1.0),
                        },
                        ScenarioPlan {
                            scheme,
                            m: MRule::Full,
                            replicates: 500,
                        },
                        30,
                        seed,
                    );
                    s.noise.rho = rho;
                    s.truth_reps = 2000;
                    s.metrics = vec![Metric::SquaredError];
                    v.push(s);
                }
            }
            v
        }
        "highdim" => [20, 40, 60]
            .iter()
            .map(|&n| high_dim_scenario(n, Growth::Constant, GapMode::Constant, 30, 500, seed))
            .collect(),
        "linear-expected-rank" => {
            let n = 400;
            let mut s = base_spec(
                "linear-expected-rank".into(),
                n,
                2000,
                ThetaRule::LinearModel {
                    a: 0.0,
                    epsilon: (n as f64).powf(-0.6),
                },
                ic(MRule::Full, 1),
                200,
                seed,
            );
            s.metrics = vec![Metric::PointRank { item: 1 }];
            vec![s]
        }
        "support" => {
            let mut s = base_spec(
                "support".into(),
                400,
                6,
                ThetaRule::TiedBlock {
                    j0: 3,
                    high: 1.0,
                    low: 0.0,
                },
                ic(MRule::Full, 2000),
                30,
                seed,
            );
            s.metrics = vec![Metric::MassOutside { block: 3 }];
            vec![s]
        }
        "conditional" => {
            let mut s = base_spec(
                "conditional".into(),
                10_000,
                10,
                ThetaRule::TiedBlock {
                    j0: 5,
                    high: 1.0,
                    low: 0.0,
                },
                ic(MRule::Fixed { m: 200 }, 1),
                30,
                seed,
            );
            s.metrics = vec![Metric::ConditionalVariance {
                block: 5,
                outer: 100,
                inner: 100,
            }];
            vec![s]
        }
        other => {
            return Err(Error::validation(format!(
                "unknown scenario '{other}'; known: {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(specs)
}
