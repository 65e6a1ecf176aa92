//! Stochastic volatility with AR(1) log-variance.
//!
//! ```text
//! x_t = φ x_{t-1} + η_t,   η_t ~ N(0, σ_η²)
//! y_t = σ̄ exp(x_t / 2) ξ_t, ξ_t ~ N(0, 1)
//! ```
//! Parameters are `(φ, σ_η, log σ̄)`. Summaries are taken on `y*_t = log y_t²`:
//! empirical variance, lag-1 autocorrelation and mean.

use rand::Rng;
use rand_distr::StandardNormal;

use super::stats::{lag1_autocorrelation, mean, variance};
use super::{BoxPrior, Model};
use crate::error::{AbcError, Result};
use crate::rng::RngStream;
use crate::types::{ParameterVector, SummaryVector};

#[derive(Clone, Debug)]
pub struct SvModel {
    n: usize,
    prior: BoxPrior,
}

impl SvModel {
    pub fn new(n: usize, prior: BoxPrior) -> Result<Self> {
        if n < 2 {
            return Err(AbcError::contract("data size must be at least 2"));
        }
        if prior.dim() != 3 {
            return Err(AbcError::contract("sv model has three parameters"));
        }
        Ok(Self { n, prior })
    }

    /// `[0,1) × [0.1,3] × [-10,-1]`.
    pub fn default_prior() -> BoxPrior {
        BoxPrior::new(vec![0.0, 0.1, -10.0], vec![1.0, 3.0, -1.0]).expect("valid box")
    }

    pub fn true_parameter() -> ParameterVector {
        ParameterVector::from_vec_unchecked(vec![0.9, 0.675, -4.1])
    }

    /// Simulates the transformed series `y*_t = log y_t² = 2 log σ̄ + x_t + log ξ_t²`,
    /// with `ξ_t²` floored at the smallest positive normal.
    pub fn simulate_log_squares(
        &self,
        theta: &ParameterVector,
        rng: &mut RngStream,
    ) -> Result<Vec<f64>> {
        if theta.len() != 3 {
            return Err(AbcError::contract("sv parameter is (phi, sigma_eta, log sigma_bar)"));
        }
        let (phi, sigma_eta, log_sigma_bar) = (theta[0], theta[1], theta[2]);
        if !(phi.abs() < 1.0) {
            return Err(AbcError::domain(format!("|phi| must be < 1, got {phi}")));
        }
        if !(sigma_eta > 0.0) {
            return Err(AbcError::domain(format!("sigma_eta must be positive, got {sigma_eta}")));
        }
        let stationary_sd = sigma_eta / (1.0 - phi * phi).sqrt();
        let z0: f64 = rng.sample(StandardNormal);
        let mut x = stationary_sd * z0;
        let mut out = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let eta: f64 = rng.sample(StandardNormal);
            let xi: f64 = rng.sample(StandardNormal);
            x = phi * x + sigma_eta * eta;
            // log y² taken term by term, so y² never has to be representable.
            out.push(2.0 * log_sigma_bar + x + (xi * xi).max(f64::MIN_POSITIVE).ln());
        }
        Ok(out)
    }
}

impl Model for SvModel {
    fn prior(&self) -> &BoxPrior {
        &self.prior
    }

    fn summary_dim(&self) -> usize {
        3
    }

    fn data_size(&self) -> usize {
        self.n
    }

    /// Returns the transformed series `y*`; the summaries only need it.
    fn simulate_data(&self, theta: &ParameterVector, rng: &mut RngStream) -> Result<Vec<f64>> {
        self.simulate_log_squares(theta, rng)
    }

    fn summarize(&self, log_squares: &[f64]) -> Result<SummaryVector> {
        if log_squares.len() < 2 {
            return Err(AbcError::contract("need at least two observations"));
        }
        let rho = lag1_autocorrelation(log_squares)?;
        SummaryVector::new(vec![variance(log_squares), rho, mean(log_squares)])
    }
}
