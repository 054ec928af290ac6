//! Normal distribution helpers and the quadrature rules used by the tuning
//! objective and the closed-form oracles.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Gauss–Hermite rule rescaled to integrate against the standard normal
/// density: `sum_i weights[i] * f(nodes[i]) ≈ ∫ f(z) φ(z) dz`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds an `order`-point rule. Roots of the physicists' Hermite
    /// polynomial are found by Newton iteration on the orthonormal recurrence.
    pub fn new(order: usize) -> Self {
        assert!(order >= 2, "Gauss–Hermite order must be at least 2");
        let n = order;
        let mut x_phys = vec![0.0; n];
        let mut w_phys = vec![0.0; n];
        let pim4 = PI.powf(-0.25);
        let m = n.div_ceil(2);
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => {
                    (2.0 * n as f64 + 1.0).sqrt()
                        - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0)
                }
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x_phys[0],
                3 => 1.91 * z - 0.91 * x_phys[1],
                _ => 2.0 * z - x_phys[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x_phys[i] = z;
            x_phys[n - 1 - i] = -z;
            w_phys[i] = 2.0 / (pp * pp);
            w_phys[n - 1 - i] = w_phys[i];
        }
        let sqrt2 = 2f64.sqrt();
        let sqrt_pi = PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = x_phys
            .iter()
            .zip(&w_phys)
            .map(|(&x, &w)| (sqrt2 * x, w / sqrt_pi))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        GaussHermite { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ f(z) φ(z) dz`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

/// Adaptive Simpson quadrature on a finite interval.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }

    // Split up front so narrow features are not missed by the first estimate.
    const PIECES: usize = 64;
    let h = (b - a) / PIECES as f64;
    (0..PIECES)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == PIECES { b } else { lo + h };
            let fa = f(lo);
            let fb = f(hi);
            let fm = f(0.5 * (lo + hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            step(&f, lo, hi, fa, fm, fb, whole, tol / PIECES as f64, 40)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_reference_values() {
        assert_abs_diff_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(normal_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-15);
        assert_abs_diff_eq!(normal_cdf(-1.959_963_984_540_054), 0.025, epsilon = 1e-15);
        assert!(normal_cdf(-40.0) >= 0.0);
    }

    #[test]
    fn hermite_rule_reproduces_gaussian_moments() {
        let gh = GaussHermite::new(64);
        assert_eq!(gh.nodes().len(), 64);
        assert_abs_diff_eq!(gh.integrate(|_| 1.0), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gh.integrate(|z| z), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(gh.integrate(|z| z * z), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gh.integrate(|z| z.powi(4)), 3.0, epsilon = 1e-11);
        assert_abs_diff_eq!(gh.integrate(|z| z.powi(6)), 15.0, epsilon = 1e-10);
    }

    #[test]
    fn hermite_matches_known_expectation() {
        // E Φ(a + bZ) = Φ(a / sqrt(1 + b²)).
        let gh = GaussHermite::new(64);
        for &(a, b) in &[(0.3, 0.5), (-1.2, 1.0), (2.0, 0.1)] {
            let got = gh.integrate(|z| normal_cdf(a + b * z));
            let want = normal_cdf(a / (1.0f64 + b * b).sqrt());
            assert_abs_diff_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn adaptive_integrates_polynomials_and_density() {
        assert_abs_diff_eq!(
            integrate_adaptive(|x| x * x, 0.0, 3.0, 1e-12),
            9.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            integrate_adaptive(normal_pdf, -10.0, 10.0, 1e-13),
            1.0,
            epsilon = 1e-12
        );
    }
}
