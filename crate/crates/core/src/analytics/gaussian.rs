use nalgebra::{DMatrix, DVector};

use super::{AnalyticLimit, LimitAt};
use crate::error::{AbcError, Result};
use crate::special::{norm_pdf, norm_ppf};
use crate::types::ParameterVector;

/// Limit of the exponentiated-quantile summary of N(μ, σ²) data.
///
/// The sample quantile `q̂_α` is asymptotically normal around
/// `q_α = μ + σ z_α` with covariance `σ² α_j(1-α_k) / (φ(z_j)φ(z_k) n)` for
/// `α_j ≤ α_k`; the map `q ↦ e^{q/2}` contributes the factor `s_j s_k / 4`.
#[derive(Clone, Debug)]
pub struct GaussianLimit {
    alphas: Vec<f64>,
    z: Vec<f64>,
}

impl GaussianLimit {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty()
            || !alphas.iter().all(|a| *a > 0.0 && *a < 1.0)
            || alphas.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(AbcError::contract("quantile probabilities must be strictly increasing in (0,1)"));
        }
        let z = alphas.iter().map(|a| norm_ppf(*a)).collect();
        Ok(Self { alphas, z })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

impl AnalyticLimit for GaussianLimit {
    fn at(&self, theta: &ParameterVector) -> Result<LimitAt> {
        if theta.len() != 2 {
            return Err(AbcError::contract("gaussian parameter is (mu, sigma)"));
        }
        let (mu, sigma) = (theta[0], theta[1]);
        if !(sigma > 0.0) {
            return Err(AbcError::domain(format!("sigma must be positive, got {sigma}")));
        }
        let d = self.alphas.len();
        let s = DVector::from_iterator(d, self.z.iter().map(|z| ((mu + sigma * z) / 2.0).exp()));
        let ds = DMatrix::from_fn(d, 2, |j, col| match col {
            0 => s[j] / 2.0,
            _ => self.z[j] * s[j] / 2.0,
        });
        let dens: Vec<f64> = self.z.iter().map(|z| norm_pdf(*z)).collect();
        let a = DMatrix::from_fn(d, d, |j, k| {
            let (lo, hi) = if j <= k { (j, k) } else { (k, j) };
            s[j] * s[k] / 4.0 * sigma * sigma * self.alphas[lo] * (1.0 - self.alphas[hi])
                / (dens[lo] * dens[hi])
        });
        Ok(LimitAt { s, a, ds })
    }
}

/// Evaluates the Gaussian-quantile limit at `theta`.
pub fn gaussian_limit(alphas: &[f64], theta: &ParameterVector) -> Result<LimitAt> {
    GaussianLimit::new(alphas.to_vec())?.at(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::equally_spaced_alphas;
    use crate::rng::derive_stream;

    fn theta(mu: f64, sigma: f64) -> ParameterVector {
        ParameterVector::new(vec![mu, sigma]).unwrap()
    }

    #[test]
    fn median_at_standard_normal() {
        let l = gaussian_limit(&[0.5], &theta(0.0, 1.0)).unwrap();
        assert!((l.s[0] - 1.0).abs() < 1e-15);
        assert!((l.ds[(0, 0)] - 0.5).abs() < 1e-15);
        assert!(l.ds[(0, 1)].abs() < 1e-15);
        // (1/4) · 0.25 / φ(0)² = π/8
        assert!((l.a[(0, 0)] - std::f64::consts::PI / 8.0).abs() < 1e-12, "{}", l.a[(0, 0)]);
    }

    #[test]
    fn median_has_no_sigma_sensitivity() {
        for (mu, sigma) in [(1.0, 2.0), (-4.0, 0.3)] {
            let l = gaussian_limit(&[0.5], &theta(mu, sigma)).unwrap();
            assert!(l.ds[(0, 1)].abs() < 1e-15);
        }
    }

    #[test]
    fn summary_increasing_in_mu() {
        let alphas = equally_spaced_alphas(4);
        let mut prev = gaussian_limit(&alphas, &theta(-3.0, 1.0)).unwrap().s;
        for k in 1..20 {
            let cur = gaussian_limit(&alphas, &theta(-3.0 + 0.3 * k as f64, 1.0)).unwrap().s;
            assert!(cur.iter().zip(prev.iter()).all(|(c, p)| c > p));
            prev = cur;
        }
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        assert!(matches!(gaussian_limit(&[0.5], &theta(0.0, 0.0)), Err(AbcError::Domain(_))));
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let t0 = theta(1.0, 2f64.sqrt());
        for d in [2, 4, 9, 19] {
            let alphas = equally_spaced_alphas(d);
            let l = gaussian_limit(&alphas, &t0).unwrap();
            let h = 1e-6;
            for col in 0..2 {
                let mut plus = t0.clone().into_inner();
                let mut minus = plus.clone();
                plus[col] += h;
                minus[col] -= h;
                let sp = gaussian_limit(&alphas, &ParameterVector::new(plus).unwrap()).unwrap().s;
                let sm = gaussian_limit(&alphas, &ParameterVector::new(minus).unwrap()).unwrap().s;
                for j in 0..d {
                    let fd = (sp[j] - sm[j]) / (2.0 * h);
                    let an = l.ds[(j, col)];
                    let rel = (fd - an).abs() / an.abs().max(1e-12);
                    assert!(rel < 1e-4 || (fd - an).abs() < 1e-9, "d={d} j={j} col={col}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn covariance_positive_definite_over_prior_box() {
        let alphas = equally_spaced_alphas(19);
        for i in 0..500 {
            let mut r = derive_stream(13, i);
            use rand::Rng;
            let mu = -10.0 + 20.0 * r.random::<f64>();
            let sigma = 0.1 + 9.9 * r.random::<f64>();
            let l = gaussian_limit(&alphas, &theta(mu, sigma)).unwrap();
            assert!((&l.a - l.a.transpose()).norm() <= 1e-12 * l.a.norm());
            assert!(l.a.clone().cholesky().is_some(), "mu={mu} sigma={sigma}");
        }
    }
}
