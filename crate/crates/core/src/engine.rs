//! Monte Carlo bootstrap rank distributions, rank prediction intervals and
//! the conditional-rank analysis.

use std::fmt::Write as _;

use serde::Serialize;

use crate::data::PopulationData;
use crate::error::{Error, Result};
use crate::estimators::{estimate_all, EstimatorSpec};
use crate::par;
use crate::ranking::{rank_into, rank_of_value};
use crate::resampling::{
    replicate_estimates, resolve_sizes, single_item_estimate, ResamplePlan, Scheme, Workspace,
};
use crate::stream::{domain, StreamSeed};

/// Replicates are processed in fixed-size waves; per-wave rank vectors are
/// folded into the count matrix in replicate order.
const WAVE: usize = 256;

/// Empirical distribution of bootstrap ranks, stored as integer counts.
/// `counts[j * p + (r - 1)]` is the number of replicates with `r̂*_j = r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankDistribution {
    p: usize,
    replicates: usize,
    counts: Vec<u32>,
    m_used: Vec<usize>,
}

impl RankDistribution {
    /// Builds a distribution from a `p × p` count matrix whose rows each sum
    /// to `replicates`.
    pub fn from_counts(
        p: usize,
        replicates: usize,
        counts: Vec<u32>,
        m_used: Vec<usize>,
    ) -> Result<Self> {
        if counts.len() != p * p {
            return Err(Error::validation(format!(
                "count matrix has {} cells, expected {}",
                counts.len(),
                p * p
            )));
        }
        for j in 0..p {
            let s: u64 = counts[j * p..(j + 1) * p].iter().map(|&c| c as u64).sum();
            if s != replicates as u64 {
                return Err(Error::validation(format!(
                    "row {} sums to {s}, expected {replicates}",
                    j + 1
                )));
            }
        }
        Ok(RankDistribution {
            p,
            replicates,
            counts,
            m_used,
        })
    }

    /// Accumulates rank vectors (each a permutation of `1..=p`).
    pub fn from_rank_vectors<'a>(
        p: usize,
        ranks: impl IntoIterator<Item = &'a [u32]>,
        m_used: Vec<usize>,
    ) -> Self {
        let mut counts = vec![0u32; p * p];
        let mut replicates = 0;
        for rv in ranks {
            for (j, &r) in rv.iter().enumerate() {
                counts[j * p + r as usize - 1] += 1;
            }
            replicates += 1;
        }
        RankDistribution {
            p,
            replicates,
            counts,
            m_used,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn m_used(&self) -> &[usize] {
        &self.m_used
    }

    pub fn row_counts(&self, j: usize) -> &[u32] {
        &self.counts[j * self.p..(j + 1) * self.p]
    }

    /// `P(r̂*_j = r | X)` for `r` in `1..=p`.
    pub fn prob(&self, j: usize, r: usize) -> f64 {
        self.row_counts(j)[r - 1] as f64 / self.replicates as f64
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        let b = self.replicates as f64;
        self.row_counts(j).iter().map(|&c| c as f64 / b).collect()
    }

    /// `P(r̂*_j ≤ r | X)`.
    pub fn cdf(&self, j: usize, r: usize) -> f64 {
        let c: u64 = self.row_counts(j)[..r].iter().map(|&c| c as u64).sum();
        c as f64 / self.replicates as f64
    }

    pub fn mean_rank(&self, j: usize) -> f64 {
        row_moments(self.row_counts(j)).0
    }

    pub fn rank_variance(&self, j: usize) -> f64 {
        row_moments(self.row_counts(j)).1
    }

    /// One row per item: label followed by the `p` rank probabilities.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut s = String::from("item");
        for r in 1..=self.p {
            let _ = write!(s, ",rank_{r}");
        }
        s.push('\n');
        for j in 0..self.p {
            s.push_str(&labels[j]);
            for r in 1..=self.p {
                let _ = write!(s, ",{}", self.prob(j, r));
            }
            s.push('\n');
        }
        s
    }
}

/// Mean and variance (divisor = total count) of a rank histogram.
pub(crate) fn row_moments(counts: &[u32]) -> (f64, f64) {
    let (mut n, mut s1, mut s2) = (0u64, 0u64, 0u64);
    for (i, &c) in counts.iter().enumerate() {
        let r = i as u64 + 1;
        n += c as u64;
        s1 += c as u64 * r;
        s2 += c as u64 * r * r;
    }
    moments_from_sums(n, s1 as u128, s2 as u128)
}

fn moments_from_sums(n: u64, s1: u128, s2: u128) -> (f64, f64) {
    let nf = n as f64;
    let mean = s1 as f64 / nf;
    // n·s2 - s1² is exact in integers
    let var = (n as u128 * s2 - s1 * s1) as f64 / (nf * nf);
    (mean, var)
}

/// Bootstrap distribution of every item's rank.
pub fn bootstrap_rank_distribution(
    data: &PopulationData,
    estimator: &EstimatorSpec,
    plan: &ResamplePlan,
) -> Result<RankDistribution> {
    estimator.validate(data)?;
    let sizes = resolve_sizes(plan, data)?;
    let p = data.p();
    let seed = StreamSeed::new(plan.seed).child(domain::BOOTSTRAP, 0);
    let mut counts = vec![0u32; p * p];

    let mut start = 0;
    while start < plan.replicates {
        let len = WAVE.min(plan.replicates - start);
        let wave = par::map_indexed_init(
            len,
            || (Workspace::default(), vec![0.0; p], Vec::new()),
            |(ws, theta, order), i| {
                let b = start + i;
                let mut rng = seed.rng(b as u64);
                replicate_estimates(
                    data,
                    estimator.kind,
                    plan.scheme,
                    &sizes,
                    None,
                    &mut rng,
                    ws,
                    theta,
                )?;
                if let Some(j) = theta.iter().position(|v| !v.is_finite()) {
                    return Err((j, Error::numerical("non-finite estimate")));
                }
                let mut ranks = vec![0u32; p];
                rank_into(theta, order, &mut ranks);
                Ok(ranks)
            },
        );
        for (i, res) in wave.into_iter().enumerate() {
            match res {
                Ok(ranks) => {
                    for (j, &r) in ranks.iter().enumerate() {
                        counts[j * p + r as usize - 1] += 1;
                    }
                }
                Err((j, e)) => {
                    return Err(Error::Replicate {
                        replicate: start + i,
                        message: format!("item {}: {e}", data.label(j)),
                    })
                }
            }
        }
        start += len;
    }
    Ok(RankDistribution {
        p,
        replicates: plan.replicates,
        counts,
        m_used: sizes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankInterval {
    pub lo: usize,
    pub hi: usize,
}

impl RankInterval {
    pub fn width(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn contains(&self, r: usize) -> bool {
        self.lo <= r && r <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSet {
    pub level: f64,
    pub intervals: Vec<RankInterval>,
}

impl IntervalSet {
    pub fn to_csv(&self, labels: &[String], estimates: &[f64], point_ranks: &[usize]) -> String {
        let mut s = String::from("item,estimate,rank,lo,hi,width,level\n");
        for (j, iv) in self.intervals.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                labels[j],
                estimates[j],
                point_ranks[j],
                iv.lo,
                iv.hi,
                iv.width(),
                self.level
            );
        }
        s
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("level {level} is not in (0,1)")))
    }
}

/// Equal-tail interval from a rank histogram: `lo` is the largest rank with
/// `P(r̂* < lo) ≤ (1-level)/2` and `hi` the smallest with
/// `P(r̂* > hi) ≤ (1-level)/2`.
pub fn interval_from_counts(counts: &[u32], level: f64) -> RankInterval {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    // absorbs rounding in (1 - level) / 2, e.g. level 0.6
    let allowance = (1.0 - level) / 2.0 * total as f64 + 1e-9 * total as f64;
    let p = counts.len();

    let mut below = 0u64;
    let mut lo = 1;
    for r in 1..=p {
        if below as f64 <= allowance {
            lo = r;
        } else {
            break;
        }
        below += counts[r - 1] as u64;
    }
    let mut above = 0u64;
    let mut hi = p;
    for r in (1..=p).rev() {
        if above as f64 <= allowance {
            hi = r;
        } else {
            break;
        }
        above += counts[r - 1] as u64;
    }
    RankInterval { lo, hi: hi.max(lo) }
}

pub fn prediction_intervals(dist: &RankDistribution, level: f64) -> Result<IntervalSet> {
    check_level(level)?;
    Ok(IntervalSet {
        level,
        intervals: (0..dist.p())
            .map(|j| interval_from_counts(dist.row_counts(j), level))
            .collect(),
    })
}

/// Average number of ranks covered by the intervals.
pub fn interval_width_summary(intervals: &IntervalSet) -> f64 {
    if intervals.intervals.is_empty() {
        return 0.0;
    }
    intervals
        .intervals
        .iter()
        .map(|iv| iv.width() as f64)
        .sum::<f64>()
        / intervals.intervals.len() as f64
}

/// Loop sizes for [`conditional_rank_distribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ConditionalLoops {
    pub outer: usize,
    pub inner: usize,
}

impl Default for ConditionalLoops {
    fn default() -> Self {
        ConditionalLoops {
            outer: 200,
            inner: 200,
        }
    }
}

/// Result of the conditional-rank analysis for one item.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalSummary {
    pub item: usize,
    /// The observed estimate `θ̂_j`, held fixed in observed-value mode.
    pub observed_value: f64,
    /// Rank histogram of `θ̂_j` among resampled `θ̂*_k`, `k ≠ j`.
    pub observed_counts: Vec<u32>,
    /// One conditional mean rank `û*_j` per outer replicate.
    pub u_samples: Vec<f64>,
    /// Mean of `r̂*_j` over all (outer, inner) pairs.
    pub total_mean: f64,
    /// `var(r̂*_j | X)` over all (outer, inner) pairs.
    pub total_variance: f64,
}

impl ConditionalSummary {
    pub fn observed_distribution(&self) -> Vec<f64> {
        let total: u64 = self.observed_counts.iter().map(|&c| c as u64).sum();
        self.observed_counts
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect()
    }

    /// Prediction interval in observed-value mode (no bias recentering).
    pub fn observed_interval(&self, level: f64) -> Result<RankInterval> {
        check_level(level)?;
        Ok(interval_from_counts(&self.observed_counts, level))
    }
}

/// Why the conditional analysis refuses synchronous resampling.
pub const SYNCHRONOUS_CONDITIONAL: &str =
    "conditional rank analysis is not available with synchronous \
resampling: a resampled column identifies the resampled rows exactly, so every conditional \
probability P(θ̂*_j ≤ θ̂*_k | X, X*_j) collapses to an indicator and the conditional \
distribution carries no information; use independent-component resampling";

/// Rank of item `j` with its resample held apart from the others.
///
/// Each outer replicate resamples `X_j` alone; `loops.inner` inner
/// replicates then resample every other item and record the rank of `θ̂*_j`
/// among them. One extra pass holds `θ̂*_j` at the observed `θ̂_j`
/// (observed-value mode) to give the conditional display distribution.
pub fn conditional_rank_distribution(
    data: &PopulationData,
    estimator: &EstimatorSpec,
    plan: &ResamplePlan,
    loops: ConditionalLoops,
    j: usize,
) -> Result<ConditionalSummary> {
    if plan.scheme == Scheme::Synchronous {
        return Err(Error::validation(SYNCHRONOUS_CONDITIONAL));
    }
    if j >= data.p() {
        return Err(Error::validation(format!(
            "item index {} out of range 1..={}",
            j + 1,
            data.p()
        )));
    }
    if loops.outer == 0 || loops.inner == 0 {
        return Err(Error::validation(
            "conditional loops need at least one replicate each",
        ));
    }
    let sizes = resolve_sizes(plan, data)?;
    let observed = estimate_all(data, estimator)?[j];
    let p = data.p();
    let seed = StreamSeed::new(plan.seed).child(domain::CONDITIONAL, j as u64);

    struct OuterResult {
        sum: u64,
        sum_sq: u64,
        counts: Option<Vec<u32>>,
    }

    // task `loops.outer` is the observed-value pass
    let results = par::map_indexed_init(
        loops.outer + 1,
        || (Workspace::default(), vec![0.0; p]),
        |(ws, theta), o| -> std::result::Result<OuterResult, (usize, usize, Error)> {
            let mut rng = seed.rng(o as u64);
            let observed_mode = o == loops.outer;
            let v = if observed_mode {
                observed
            } else {
                single_item_estimate(data, estimator.kind, j, sizes[j], &mut rng, ws)
                    .map_err(|e| (o, j, e))?
            };
            let mut counts = observed_mode.then(|| vec![0u32; p]);
            let (mut sum, mut sum_sq) = (0u64, 0u64);
            for _ in 0..loops.inner {
                replicate_estimates(
                    data,
                    estimator.kind,
                    plan.scheme,
                    &sizes,
                    Some(j),
                    &mut rng,
                    ws,
                    theta,
                )
                .map_err(|(k, e)| (o, k, e))?;
                let r = rank_of_value(v, j, theta);
                if let Some(c) = counts.as_mut() {
                    c[r as usize - 1] += 1;
                }
                sum += r as u64;
                sum_sq += (r as u64) * (r as u64);
            }
            Ok(OuterResult {
                sum,
                sum_sq,
                counts,
            })
        },
    );

    let mut u_samples = Vec::with_capacity(loops.outer);
    let (mut s1, mut s2) = (0u128, 0u128);
    let mut observed_counts = Vec::new();
    for res in results {
        let res = res.map_err(|(o, k, e)| Error::Replicate {
            replicate: o,
            message: format!("item {}: {e}", data.label(k)),
        })?;
        match res.counts {
            Some(c) => observed_counts = c,
            None => {
                u_samples.push(res.sum as f64 / loops.inner as f64);
                s1 += res.sum as u128;
                s2 += res.sum_sq as u128;
            }
        }
    }
    let n = (loops.outer * loops.inner) as u64;
    let (total_mean, total_variance) = moments_from_sums(n, s1, s2);
    Ok(ConditionalSummary {
        item: j,
        observed_value: observed,
        observed_counts,
        u_samples,
        total_mean,
        total_variance,
    })
}
