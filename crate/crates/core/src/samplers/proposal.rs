//! Proposal densities: the prior, a location-scale Student t, and their mixture.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{AbcError, Result};
use crate::models::BoxPrior;
use crate::rng::RngStream;
use crate::special::ln_gamma;
use crate::types::ParameterVector;

/// Multivariate Student t with centre `μ`, scale matrix `S` and `γ` degrees of freedom.
#[derive(Clone, Debug)]
pub struct MultivariateT {
    center: DVector<f64>,
    scale: DMatrix<f64>,
    chol: DMatrix<f64>,
    df: f64,
    chi2: ChiSquared<f64>,
    log_norm: f64,
}

impl MultivariateT {
    pub fn new(center: Vec<f64>, scale: DMatrix<f64>, df: f64) -> Result<Self> {
        let p = center.len();
        if p == 0 || scale.nrows() != p || scale.ncols() != p {
            return Err(AbcError::contract("t centre and scale dimensions disagree"));
        }
        if !(df > 0.0 && df.is_finite()) {
            return Err(AbcError::contract(format!("degrees of freedom must be positive, got {df}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(AbcError::contract("t centre must be finite"));
        }
        let chol = scale
            .clone()
            .cholesky()
            .ok_or_else(|| AbcError::numerical("t scale matrix is not positive definite"))?
            .l();
        let log_det: f64 = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let pf = p as f64;
        let log_norm = ln_gamma((df + pf) / 2.0)
            - ln_gamma(df / 2.0)
            - 0.5 * pf * (df * std::f64::consts::PI).ln()
            - 0.5 * log_det;
        Ok(Self {
            center: DVector::from_vec(center),
            scale,
            chol,
            df,
            chi2: ChiSquared::new(df).expect("positive df"),
            log_norm,
        })
    }

    /// The member of the family with the given mean and variance matrix.
    /// For `γ ≤ 2` the variance does not exist and `variance` is used as the scale.
    pub fn from_moments(mean: Vec<f64>, variance: DMatrix<f64>, df: f64) -> Result<Self> {
        let scale = if df > 2.0 {
            variance * ((df - 2.0) / df)
        } else {
            variance
        };
        Self::new(mean, scale, df)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.scale
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    /// Variance matrix `S γ/(γ-2)`, or the scale itself when `γ ≤ 2`.
    pub fn variance(&self) -> DMatrix<f64> {
        if self.df > 2.0 {
            &self.scale * (self.df / (self.df - 2.0))
        } else {
            self.scale.clone()
        }
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.center;
        let y = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is nonsingular");
        let maha = y.norm_squared();
        self.log_norm - 0.5 * (self.df + self.dim() as f64) * (maha / self.df).ln_1p()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let z = DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let w = self.chi2.sample(rng);
        let x = &self.center + &self.chol * z * (self.df / w).sqrt();
        x.iter().copied().collect()
    }
}

/// `q(θ) = β π(θ) + (1-β) t_γ(θ; μ, S)` with `β ∈ (0, 1]`.
#[derive(Clone, Debug)]
pub struct ProposalSpec {
    beta: f64,
    base: MultivariateT,
}

impl ProposalSpec {
    pub fn new(beta: f64, base: MultivariateT) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(AbcError::contract(format!("mixture weight must lie in (0,1], got {beta}")));
        }
        Ok(Self { beta, base })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn base(&self) -> &MultivariateT {
        &self.base
    }
}

/// What the importance sampler draws from.
#[derive(Clone, Debug)]
pub enum Proposal {
    /// Rejection ABC: weights are identically 1.
    Prior,
    Mixture(ProposalSpec),
    /// The t component alone, without the prior floor.
    Student(MultivariateT),
}

impl Proposal {
    pub fn draw(&self, prior: &BoxPrior, rng: &mut RngStream) -> ParameterVector {
        match self {
            Proposal::Prior => prior.sample(rng),
            Proposal::Mixture(spec) if spec.beta >= 1.0 => prior.sample(rng),
            Proposal::Mixture(spec) => {
                let u: f64 = rng.random();
                if u < spec.beta {
                    prior.sample(rng)
                } else {
                    ParameterVector::from_vec_unchecked(spec.base.sample(rng))
                }
            }
            Proposal::Student(t) => ParameterVector::from_vec_unchecked(t.sample(rng)),
        }
    }

    /// `π(θ) / q(θ)`; zero outside the prior support.
    ///
    /// The mixture weight is evaluated as `1 / (β + (1-β) t/π)`, whose
    /// denominator never rounds below `β`, so the bound `w ≤ 1/β` holds exactly.
    pub fn weight(&self, prior: &BoxPrior, theta: &ParameterVector) -> f64 {
        let pi = prior.density(theta.as_slice());
        if pi == 0.0 {
            return 0.0;
        }
        match self {
            Proposal::Prior => 1.0,
            Proposal::Mixture(spec) => {
                if spec.beta >= 1.0 {
                    return 1.0;
                }
                let ratio = (spec.base.ln_pdf(theta.as_slice()) - pi.ln()).exp();
                1.0 / (spec.beta + (1.0 - spec.beta) * ratio)
            }
            Proposal::Student(t) => (pi.ln() - t.ln_pdf(theta.as_slice())).exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn univariate_t_density_matches_closed_form() {
        // γ = 1, S = 1: Cauchy density 1/(π(1+x²))
        let t = MultivariateT::new(vec![0.0], DMatrix::identity(1, 1), 1.0).unwrap();
        for x in [-3.0, 0.0, 0.5, 10.0] {
            let exact = 1.0 / (std::f64::consts::PI * (1.0 + x * x));
            assert!((t.ln_pdf(&[x]).exp() - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn t_density_integrates_to_one_in_2d() {
        let scale = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let t = MultivariateT::new(vec![1.0, -1.0], scale, 5.0).unwrap();
        let (h, lim) = (0.05, 40.0);
        let mut total = 0.0;
        let steps = (2.0 * lim / h) as i64;
        for i in 0..steps {
            for j in 0..steps {
                let x = [1.0 - lim + (i as f64 + 0.5) * h, -1.0 - lim + (j as f64 + 0.5) * h];
                total += t.ln_pdf(&x).exp() * h * h;
            }
        }
        assert!((total - 1.0).abs() < 2e-3, "{total}");
    }

    #[test]
    fn moment_matching_variance() {
        let v = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let t = MultivariateT::from_moments(vec![0.0, 0.0], v.clone(), 5.0).unwrap();
        assert!((t.variance() - &v).norm() < 1e-12);
        assert!((t.scale() - &v * 0.6).norm() < 1e-12);
        let heavy = MultivariateT::from_moments(vec![0.0, 0.0], v.clone(), 2.0).unwrap();
        assert_eq!(heavy.scale(), &v);
    }

    #[test]
    fn t_sample_moments() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let t = MultivariateT::from_moments(vec![2.0, -1.0], v.clone(), 8.0).unwrap();
        let n = 200_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|i| t.sample(&mut derive_stream(3, i))).collect();
        let mean: Vec<f64> = (0..2).map(|j| draws.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        assert!((mean[0] - 2.0).abs() < 0.01 && (mean[1] + 1.0).abs() < 0.01);
        let c01 = draws.iter().map(|x| (x[0] - mean[0]) * (x[1] - mean[1])).sum::<f64>() / n as f64;
        let c00 = draws.iter().map(|x| (x[0] - mean[0]).powi(2)).sum::<f64>() / n as f64;
        assert!((c00 - 1.0).abs() < 0.05 && (c01 - 0.3).abs() < 0.03, "{c00} {c01}");
    }

    #[test]
    fn invalid_inputs() {
        assert!(MultivariateT::new(vec![0.0], DMatrix::identity(1, 1), 0.0).is_err());
        assert!(MultivariateT::new(vec![0.0, 0.0], DMatrix::identity(1, 1), 3.0).is_err());
        assert!(MultivariateT::new(vec![0.0], DMatrix::from_element(1, 1, -1.0), 3.0).is_err());
        let t = MultivariateT::new(vec![0.0], DMatrix::identity(1, 1), 3.0).unwrap();
        assert!(ProposalSpec::new(0.0, t.clone()).is_err());
        assert!(ProposalSpec::new(1.5, t).is_err());
    }

    #[test]
    fn mixture_weights_bounded_and_zero_outside() {
        let prior = BoxPrior::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let t = MultivariateT::new(vec![0.2, 0.1], DMatrix::identity(2, 2) * 1e-4, 5.0).unwrap();
        let q = Proposal::Mixture(ProposalSpec::new(0.05, t).unwrap());
        for i in 0..5000 {
            let theta = q.draw(&prior, &mut derive_stream(21, i));
            let w = q.weight(&prior, &theta);
            assert!(w <= 1.0 / 0.05);
            if !prior.contains(theta.as_slice()) {
                assert_eq!(w, 0.0);
            }
        }
    }
}
