//! Simulator contract and the shipped models.

mod gaussian;
pub mod stats;
mod sv;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AbcError, Result};
use crate::rng::RngStream;
use crate::types::{ParameterVector, SummaryVector};

pub use gaussian::{equally_spaced_alphas, GaussianQuantileModel, QuantileSimulation};
pub use stats::{lag1_autocorrelation, quantile_sorted, sample_quantile};
pub use sv::SvModel;

/// Uniform prior on an axis-aligned box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxPrior {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxPrior {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(AbcError::contract("prior bounds must be nonempty and equal length"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(AbcError::contract(format!("invalid prior interval [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(t, (l, u))| *t >= *l && *t <= *u)
    }

    /// Constant density inside the box.
    pub fn density_inside(&self) -> f64 {
        1.0 / self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product::<f64>()
    }

    pub fn density(&self, theta: &[f64]) -> f64 {
        if self.contains(theta) {
            self.density_inside()
        } else {
            0.0
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> ParameterVector {
        let values = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                let u01: f64 = rng.random();
                (l + u01 * (u - l)).min(*u)
            })
            .collect();
        ParameterVector::from_vec_unchecked(values)
    }

    pub fn mean(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// Per-coordinate variances `(u - l)² / 12`.
    pub fn variances(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l) / 12.0)
            .collect()
    }
}

/// A simulator with a box-uniform prior and a fixed-dimension summary.
pub trait Model: Send + Sync {
    fn prior(&self) -> &BoxPrior;

    /// Summary dimension d.
    fn summary_dim(&self) -> usize;

    /// Number of observations n in a dataset.
    fn data_size(&self) -> usize;

    /// Simulates a raw dataset of `data_size()` observations.
    fn simulate_data(&self, theta: &ParameterVector, rng: &mut RngStream) -> Result<Vec<f64>>;

    /// Maps a dataset to its summary statistic.
    fn summarize(&self, data: &[f64]) -> Result<SummaryVector>;

    /// Draws a dataset at `theta` and returns its summary.
    fn simulate_summary(
        &self,
        theta: &ParameterVector,
        rng: &mut RngStream,
    ) -> Result<SummaryVector> {
        let data = self.simulate_data(theta, rng)?;
        self.summarize(&data)
    }

    /// Parameter dimension p.
    fn param_dim(&self) -> usize {
        self.prior().dim()
    }

    fn prior_sample(&self, rng: &mut RngStream) -> ParameterVector {
        self.prior().sample(rng)
    }

    fn prior_density(&self, theta: &ParameterVector) -> f64 {
        self.prior().density(theta.as_slice())
    }
}
