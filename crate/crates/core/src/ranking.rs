//! Ranks from estimates. Rank 1 is the largest estimate; equal estimates are
//! ordered by item index, so
//! `r_j = 1 + #{k : θ_k > θ_j} + #{k < j : θ_k = θ_j}`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankVector(Vec<usize>);

impl RankVector {
    pub fn ranks(&self) -> &[usize] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn rank_estimates(theta_hat: &[f64]) -> Result<RankVector> {
    if theta_hat.len() < 2 {
        return Err(Error::validation("ranking needs at least 2 items"));
    }
    if let Some(j) = theta_hat.iter().position(|v| !v.is_finite()) {
        return Err(Error::numerical(format!(
            "estimate for item {} is not finite",
            j + 1
        )));
    }
    let mut ranks = vec![0u32; theta_hat.len()];
    let mut order = Vec::new();
    rank_into(theta_hat, &mut order, &mut ranks);
    Ok(RankVector(ranks.into_iter().map(|r| r as usize).collect()))
}

/// Allocation-free ranking for the resampling loops. `order` is scratch space.
/// Inputs must be finite.
pub(crate) fn rank_into(theta: &[f64], order: &mut Vec<u32>, ranks: &mut [u32]) {
    order.clear();
    order.extend(0..theta.len() as u32);
    order.sort_unstable_by(|&a, &b| {
        theta[b as usize]
            .total_cmp(&theta[a as usize])
            .then(a.cmp(&b))
    });
    for (pos, &j) in order.iter().enumerate() {
        ranks[j as usize] = pos as u32 + 1;
    }
}

/// Rank the value `v` would get if it were item `j` among `others`, where
/// `others[k]` is ignored for `k == j`.
pub(crate) fn rank_of_value(v: f64, j: usize, others: &[f64]) -> u32 {
    let mut r = 1u32;
    for (k, &t) in others.iter().enumerate() {
        if k != j && (t > v || (t == v && k < j)) {
            r += 1;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(theta: &[f64]) -> Vec<usize> {
        (0..theta.len())
            .map(|j| {
                1 + (0..theta.len())
                    .filter(|&k| k != j && theta[k] >= theta[j])
                    .count()
            })
            .collect()
    }

    #[test]
    fn examples() {
        assert_eq!(
            rank_estimates(&[0.9, 0.5, 0.7]).unwrap().ranks(),
            &[1, 3, 2]
        );
        assert_eq!(
            rank_estimates(&[1.0, 1.0, 0.0]).unwrap().ranks(),
            &[1, 2, 3]
        );
        let theta: Vec<f64> = (1..=10).map(|j| 1.0 - j as f64 / 10.0).collect();
        let r = rank_estimates(&theta).unwrap();
        assert_eq!(r.ranks(), &(1..=10).collect::<Vec<_>>()[..]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(rank_estimates(&[1.0]).is_err());
        assert!(rank_estimates(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn rank_of_value_agrees_with_full_ranking() {
        let theta = [0.3, 0.8, 0.3, 0.1, 0.8];
        let full = rank_estimates(&theta).unwrap();
        for j in 0..theta.len() {
            assert_eq!(rank_of_value(theta[j], j, &theta) as usize, full.ranks()[j]);
        }
    }

    proptest! {
        #[test]
        fn always_a_permutation(xs in prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 0.5, 2.0, 3.25]), 2..40)) {
            let r = rank_estimates(&xs).unwrap();
            let mut sorted = r.ranks().to_vec();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (1..=xs.len()).collect::<Vec<_>>());
        }

        #[test]
        fn monotone_transform_invariance(xs in prop::collection::vec(-5.0f64..5.0, 2..40)) {
            let r = rank_estimates(&xs).unwrap();
            let t: Vec<f64> = xs.iter().map(|v| v.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(r, rank_estimates(&t).unwrap());
        }

        #[test]
        fn matches_brute_force_without_ties(xs in prop::collection::hash_set(-10_000i64..10_000, 2..60)) {
            let theta: Vec<f64> = xs.into_iter().map(|v| v as f64 / 7.0).collect();
            let r = rank_estimates(&theta).unwrap();
            prop_assert_eq!(r.ranks().to_vec(), brute_force(&theta));
        }
    }
}
