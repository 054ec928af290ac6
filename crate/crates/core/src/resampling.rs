//! Bootstrap resampling under the three schemes.
//!
//! * independent populations: each sample `X_j` is resampled on its own,
//! * synchronous: whole observation vectors (rows) are resampled, so every
//!   column shares one index sequence,
//! * independent component: each column of matrix data gets its own index
//!   sequence, as if the components were independent.
//!
//! Draws for item `j` always come from the replicate's stream in item order,
//! so a replicate is reproducible from `(seed, replicate index)` alone.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Layout, PopulationData};
use crate::error::{Error, Result};
use crate::estimators::{estimate_with, EstimatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    IndependentPopulations,
    Synchronous,
    IndependentComponent,
}

impl Scheme {
    /// The scheme that resamples each item independently for this layout.
    pub fn independent_for(layout: Layout) -> Scheme {
        match layout {
            Layout::IndependentSamples => Scheme::IndependentPopulations,
            Layout::Matrix => Scheme::IndependentComponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeRule {
    /// `m_j = n_j`.
    Full,
    /// `m_j = max(2, round(rho · n_j))`.
    Fraction(f64),
    /// Resample size per item.
    PerItem(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rounding {
    #[default]
    HalfUp,
    Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub scheme: Scheme,
    pub size_rule: SizeRule,
    #[serde(default)]
    pub rounding: Rounding,
    pub replicates: usize,
    pub seed: u64,
}

impl ResamplePlan {
    pub fn new(scheme: Scheme, size_rule: SizeRule, replicates: usize, seed: u64) -> Self {
        ResamplePlan {
            scheme,
            size_rule,
            rounding: Rounding::HalfUp,
            replicates,
            seed,
        }
    }

    pub fn with_rounding(mut self, rounding: Rounding) -> Self {
        self.rounding = rounding;
        self
    }

    /// Checks that the scheme is legal for the data layout and that `B ≥ 1`.
    pub fn validate(&self, data: &PopulationData) -> Result<()> {
        match (self.scheme, data.layout()) {
            (Scheme::IndependentPopulations, Layout::IndependentSamples)
            | (Scheme::Synchronous, Layout::Matrix)
            | (Scheme::IndependentComponent, Layout::Matrix) => {}
            (scheme, layout) => {
                return Err(Error::validation(format!(
                    "scheme {scheme:?} cannot be used with {layout:?} data"
                )))
            }
        }
        if self.replicates == 0 {
            return Err(Error::validation(
                "number of bootstrap replicates must be at least 1",
            ));
        }
        Ok(())
    }
}

fn fraction_size(rho: f64, n: usize, rounding: Rounding) -> usize {
    let x = rho * n as f64;
    let m = match rounding {
        Rounding::HalfUp => x.round(),
        // 0.355 * 200 is 70.999..., so floor with a small allowance.
        Rounding::Floor => (x + 1e-9).floor(),
    };
    (m as usize).clamp(2, n)
}

/// Resample size `m_j` for every item.
pub fn resolve_sizes(plan: &ResamplePlan, data: &PopulationData) -> Result<Vec<usize>> {
    plan.validate(data)?;
    let sizes = data.sizes();
    let m: Vec<usize> = match &plan.size_rule {
        SizeRule::Full => sizes.clone(),
        SizeRule::Fraction(rho) => {
            if !(*rho > 0.0 && *rho <= 1.0) {
                return Err(Error::validation(format!(
                    "resample fraction {rho} is not in (0,1]"
                )));
            }
            sizes
                .iter()
                .map(|&n| fraction_size(*rho, n, plan.rounding))
                .collect()
        }
        SizeRule::PerItem(m) => {
            if m.len() != sizes.len() {
                return Err(Error::validation(format!(
                    "{} resample sizes given for {} items",
                    m.len(),
                    sizes.len()
                )));
            }
            for (j, (&mj, &nj)) in m.iter().zip(&sizes).enumerate() {
                if mj < 2 || mj > nj {
                    return Err(Error::validation(format!(
                        "resample size {mj} for item {} is outside [2, {nj}]",
                        data.label(j)
                    )));
                }
            }
            m.clone()
        }
    };
    if plan.scheme == Scheme::Synchronous && m.iter().any(|&x| x != m[0]) {
        return Err(Error::validation(
            "synchronous resampling needs one resample size for all items",
        ));
    }
    Ok(m)
}

#[inline]
fn draw_into<R: Rng>(rng: &mut R, n: usize, m: usize, idx: &mut Vec<usize>) {
    idx.clear();
    idx.extend((0..m).map(|_| rng.random_range(0..n)));
}

fn gather(col: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| col[i]).collect()
}

/// Independent resample of every sample, `m[j]` draws from `X_j`.
pub fn resample_independent_populations<R: Rng>(
    data: &PopulationData,
    m: &[usize],
    rng: &mut R,
) -> Result<PopulationData> {
    let mut idx = Vec::new();
    let cols = data
        .samples()
        .iter()
        .zip(m)
        .map(|(col, &mj)| {
            draw_into(rng, col.len(), mj, &mut idx);
            gather(col, &idx)
        })
        .collect();
    let out = PopulationData::independent(cols)?;
    relabel(out, data)
}

/// `m` whole rows drawn with replacement; the response follows its rows.
pub fn resample_synchronous<R: Rng>(
    data: &PopulationData,
    m: usize,
    rng: &mut R,
) -> Result<PopulationData> {
    let n = data
        .n_rows()
        .ok_or_else(|| Error::validation("synchronous resampling needs matrix data"))?;
    if m < 2 || m > n {
        return Err(Error::validation(format!(
            "resample size {m} is outside [2, {n}]"
        )));
    }
    let mut idx = Vec::new();
    draw_into(rng, n, m, &mut idx);
    let cols = data.samples().iter().map(|c| gather(c, &idx)).collect();
    let response = data.response().map(|y| gather(y, &idx));
    relabel(PopulationData::matrix(cols, response)?, data)
}

/// Each column resampled with its own index sequence. All `m[j]` must be
/// equal for the result to be matrix data; the response is not carried
/// because it no longer lines up with any single column.
pub fn resample_independent_component<R: Rng>(
    data: &PopulationData,
    m: &[usize],
    rng: &mut R,
) -> Result<PopulationData> {
    if data.layout() != Layout::Matrix {
        return Err(Error::validation(
            "independent-component resampling needs matrix data",
        ));
    }
    let mut idx = Vec::new();
    let cols = data
        .samples()
        .iter()
        .zip(m)
        .map(|(col, &mj)| {
            draw_into(rng, col.len(), mj, &mut idx);
            gather(col, &idx)
        })
        .collect();
    relabel(PopulationData::matrix(cols, None)?, data)
}

fn relabel(out: PopulationData, like: &PopulationData) -> Result<PopulationData> {
    match like.labels() {
        Some(l) => out.with_labels(l.to_vec()),
        None => Ok(out),
    }
}

/// Row indices that produced a synchronously resampled column, recovered by
/// matching values against column `j` of the original data. `None` when
/// column `j` has repeated values or a value is not found.
pub fn recover_row_indices(
    data: &PopulationData,
    j: usize,
    resampled_column: &[f64],
) -> Option<Vec<usize>> {
    let col = data.sample(j);
    let mut lookup = HashMap::with_capacity(col.len());
    for (i, v) in col.iter().enumerate() {
        if lookup.insert(v.to_bits(), i).is_some() {
            return None;
        }
    }
    resampled_column
        .iter()
        .map(|v| lookup.get(&v.to_bits()).copied())
        .collect()
}

/// Reusable buffers for one worker.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    idx: Vec<usize>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    scratch: Vec<f64>,
}

/// Estimator applied to the resample of item `j` drawn with `idx`.
fn estimate_indexed(
    data: &PopulationData,
    kind: EstimatorKind,
    j: usize,
    idx: &[usize],
    xs: &mut Vec<f64>,
    ys: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> Result<f64> {
    let col = data.sample(j);
    match kind {
        EstimatorKind::Mean => Ok(idx.iter().map(|&i| col[i]).sum::<f64>() / idx.len() as f64),
        _ => {
            xs.clear();
            xs.extend(idx.iter().map(|&i| col[i]));
            let response = match data.response() {
                Some(y) if kind == EstimatorKind::CorrelationWithResponse => {
                    ys.clear();
                    ys.extend(idx.iter().map(|&i| y[i]));
                    Some(ys.as_slice())
                }
                _ => None,
            };
            estimate_with(xs, kind, response, scratch)
        }
    }
}

/// Draws one replicate and writes `θ̂*_j` into `out`. Item `skip`, if any,
/// takes no draws and its slot is left untouched; the conditional analysis
/// resamples the focal item separately.
#[allow(clippy::too_many_arguments)]
pub(crate) fn replicate_estimates<R: Rng>(
    data: &PopulationData,
    kind: EstimatorKind,
    scheme: Scheme,
    sizes: &[usize],
    skip: Option<usize>,
    rng: &mut R,
    ws: &mut Workspace,
    out: &mut [f64],
) -> std::result::Result<(), (usize, Error)> {
    let Workspace {
        idx,
        xs,
        ys,
        scratch,
    } = ws;
    if scheme == Scheme::Synchronous {
        let n = data.sample(0).len();
        draw_into(rng, n, sizes[0], idx);
        for j in 0..data.p() {
            if Some(j) == skip {
                continue;
            }
            out[j] = estimate_indexed(data, kind, j, idx, xs, ys, scratch).map_err(|e| (j, e))?;
        }
    } else {
        for j in 0..data.p() {
            if Some(j) == skip {
                continue;
            }
            draw_into(rng, data.sample(j).len(), sizes[j], idx);
            out[j] = estimate_indexed(data, kind, j, idx, xs, ys, scratch).map_err(|e| (j, e))?;
        }
    }
    Ok(())
}

/// `θ̂*_j` for a single item resampled on its own with `m` draws.
pub(crate) fn single_item_estimate<R: Rng>(
    data: &PopulationData,
    kind: EstimatorKind,
    j: usize,
    m: usize,
    rng: &mut R,
    ws: &mut Workspace,
) -> Result<f64> {
    let Workspace {
        idx,
        xs,
        ys,
        scratch,
    } = ws;
    draw_into(rng, data.sample(j).len(), m, idx);
    estimate_indexed(data, kind, j, idx, xs, ys, scratch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{estimate_all, EstimatorSpec};
    use crate::stream::StreamSeed;
    use rand_distr::StandardNormal;

    fn plan(scheme: Scheme, rule: SizeRule) -> ResamplePlan {
        ResamplePlan::new(scheme, rule, 10, 0)
    }

    #[test]
    fn resolve_examples() {
        let d = PopulationData::independent(vec![vec![0.0; 200], vec![0.0; 50]]).unwrap();
        let m = resolve_sizes(
            &plan(Scheme::IndependentPopulations, SizeRule::Fraction(0.355)),
            &d,
        )
        .unwrap();
        assert_eq!(m[0], 71);
        let floor = plan(Scheme::IndependentPopulations, SizeRule::Fraction(0.355))
            .with_rounding(Rounding::Floor);
        assert_eq!(resolve_sizes(&floor, &d).unwrap()[0], 71);
        let m = resolve_sizes(
            &plan(Scheme::IndependentPopulations, SizeRule::Fraction(0.01)),
            &d,
        )
        .unwrap();
        assert_eq!(m[1], 2);
        let d2 = PopulationData::independent(vec![vec![0.0; 5], vec![0.0; 9]]).unwrap();
        assert_eq!(
            resolve_sizes(&plan(Scheme::IndependentPopulations, SizeRule::Full), &d2).unwrap(),
            vec![5, 9]
        );
    }

    #[test]
    fn resolve_errors() {
        let d = PopulationData::independent(vec![vec![0.0; 5], vec![0.0; 9]]).unwrap();
        let bad = plan(
            Scheme::IndependentPopulations,
            SizeRule::PerItem(vec![2, 10]),
        );
        assert!(resolve_sizes(&bad, &d).is_err());
        let bad = plan(
            Scheme::IndependentPopulations,
            SizeRule::PerItem(vec![1, 3]),
        );
        assert!(resolve_sizes(&bad, &d).is_err());
        assert!(resolve_sizes(&plan(Scheme::Synchronous, SizeRule::Full), &d).is_err());
        assert!(resolve_sizes(
            &plan(Scheme::IndependentPopulations, SizeRule::Fraction(0.0)),
            &d
        )
        .is_err());
        let m = PopulationData::matrix(vec![vec![0.0; 5], vec![0.0; 5]], None).unwrap();
        assert!(resolve_sizes(&plan(Scheme::IndependentPopulations, SizeRule::Full), &m).is_err());
        let uneven = plan(Scheme::Synchronous, SizeRule::PerItem(vec![3, 4]));
        assert!(resolve_sizes(&uneven, &m).is_err());
    }

    #[test]
    fn constant_sample_stays_constant() {
        let d = PopulationData::independent(vec![vec![2.5; 3], vec![1.0, 2.0, 3.0]]).unwrap();
        let r =
            resample_independent_populations(&d, &[7, 3], &mut StreamSeed::new(1).rng(0)).unwrap();
        assert_eq!(r.sample(0), &[2.5; 7]);
        assert!(r.sample(1).iter().all(|v| d.sample(1).contains(v)));
        assert_eq!(r.label(0), d.label(0));
    }

    #[test]
    fn two_point_frequencies() {
        let d = PopulationData::independent(vec![vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let draws = 100_000;
        let r = resample_independent_populations(&d, &[draws, 2], &mut StreamSeed::new(9).rng(0))
            .unwrap();
        let ones = r.sample(0).iter().filter(|&&v| v == 1.0).count() as f64 / draws as f64;
        // binomial sd at n=1e5 is 0.0016
        assert!((ones - 0.5).abs() < 0.01, "frequency {ones}");
    }

    #[test]
    fn synchronous_shares_indices() {
        let col: Vec<f64> = (0..20).map(|i| i as f64 * 0.37).collect();
        let d = PopulationData::matrix(vec![col.clone(), col], None).unwrap();
        for b in 0..20 {
            let r = resample_synchronous(&d, 20, &mut StreamSeed::new(3).rng(b)).unwrap();
            assert_eq!(r.sample(0), r.sample(1));
        }
    }

    #[test]
    fn synchronous_row_frequencies_uniform() {
        let n = 10;
        let col: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let d = PopulationData::matrix(vec![col.clone(), col], None).unwrap();
        let reps = 4000;
        let mut counts = vec![0usize; n];
        for b in 0..reps {
            let r = resample_synchronous(&d, n, &mut StreamSeed::new(4).rng(b)).unwrap();
            for &v in r.sample(0) {
                counts[v as usize] += 1;
            }
        }
        let total = (reps * n as u64) as f64;
        let se = (0.1 * 0.9 / total).sqrt();
        for c in counts {
            assert!((c as f64 / total - 0.1).abs() < 3.0 * se + 1e-12);
        }
    }

    #[test]
    fn independent_component_decouples_columns() {
        let n = 200;
        let col: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let d = PopulationData::matrix(vec![col.clone(), col], None).unwrap();
        let reps = 10_000u64;
        // correlation between the first drawn index of each column
        let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut differ = 0;
        for b in 0..reps {
            let r = resample_independent_component(&d, &[n, n], &mut StreamSeed::new(5).rng(b))
                .unwrap();
            if r.sample(0) != r.sample(1) {
                differ += 1;
            }
            let (x, y) = (r.sample(0)[0], r.sample(1)[0]);
            sx += x;
            sy += y;
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        assert_eq!(differ, reps);
        let k = reps as f64;
        let cov = sxy / k - sx / k * sy / k;
        let corr = cov / ((sxx / k - (sx / k).powi(2)) * (syy / k - (sy / k).powi(2))).sqrt();
        assert!(corr.abs() < 0.03, "index correlation {corr}");
    }

    #[test]
    fn marginal_chi_square() {
        // each column of the independent-component scheme is a multinomial draw
        let n = 8;
        let col: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let d = PopulationData::matrix(vec![col.clone(), col.clone(), col], None).unwrap();
        let mut counts = vec![vec![0f64; n]; 3];
        let reps = 2000;
        for b in 0..reps {
            let r = resample_independent_component(&d, &[n, n, n], &mut StreamSeed::new(6).rng(b))
                .unwrap();
            for (j, c) in counts.iter_mut().enumerate() {
                for &v in r.sample(j) {
                    c[v as usize] += 1.0;
                }
            }
        }
        let expected = (reps * n as u64) as f64 / n as f64;
        for c in counts {
            let chi2: f64 = c.iter().map(|o| (o - expected).powi(2) / expected).sum();
            // 7 degrees of freedom, 99.9% quantile is 24.3
            assert!(chi2 < 24.3, "chi2 {chi2}");
        }
    }

    #[test]
    fn row_recovery_reproduces_other_columns() {
        let mut rng = StreamSeed::new(8).rng(0);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..30).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let d = PopulationData::matrix(cols, None).unwrap();
        let r = resample_synchronous(&d, 30, &mut StreamSeed::new(8).rng(1)).unwrap();
        let rows = recover_row_indices(&d, 2, r.sample(2)).unwrap();
        for k in 0..4 {
            let rebuilt: Vec<f64> = rows.iter().map(|&i| d.sample(k)[i]).collect();
            assert_eq!(rebuilt, r.sample(k));
        }
        let ic =
            resample_independent_component(&d, &[30; 4], &mut StreamSeed::new(8).rng(1)).unwrap();
        let rows = recover_row_indices(&d, 0, ic.sample(0)).unwrap();
        let rebuilt: Vec<f64> = rows.iter().map(|&i| d.sample(1)[i]).collect();
        assert_ne!(rebuilt, ic.sample(1));
    }

    #[test]
    fn kernel_matches_materialized_resample() {
        let mut rng = StreamSeed::new(10).rng(0);
        let cols: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..25).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let d = PopulationData::matrix(cols, None).unwrap();
        let sizes = vec![12; 5];
        for scheme in [Scheme::Synchronous, Scheme::IndependentComponent] {
            for kind in [EstimatorKind::Mean, EstimatorKind::Quantile { q: 0.3 }] {
                let seed = StreamSeed::new(77);
                let mut out = vec![0.0; 5];
                replicate_estimates(
                    &d,
                    kind,
                    scheme,
                    &sizes,
                    None,
                    &mut seed.rng(3),
                    &mut Workspace::default(),
                    &mut out,
                )
                .unwrap();
                let r = match scheme {
                    Scheme::Synchronous => resample_synchronous(&d, 12, &mut seed.rng(3)).unwrap(),
                    _ => resample_independent_component(&d, &sizes, &mut seed.rng(3)).unwrap(),
                };
                let spec = EstimatorSpec::new(kind);
                assert_eq!(out, estimate_all(&r, &spec).unwrap());
            }
        }
    }
}
