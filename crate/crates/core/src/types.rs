use serde::{Deserialize, Serialize};

use crate::error::{AbcError, Result};
use crate::kernel::Kernel;

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Wraps `values`, rejecting non-finite entries.
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                    return Err(AbcError::contract(format!(
                        "{} entry {bad} is not finite",
                        stringify!($name)
                    )));
                }
                Ok(Self(values))
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }

            pub fn iter(&self) -> std::slice::Iter<'_, f64> {
                self.0.iter()
            }

            // Internal constructor for values already known to be finite.
            #[allow(dead_code)]
            pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
                Self(values)
            }
        }

        impl std::ops::Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl AsRef<[f64]> for $name {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

real_vector!(
    /// A point in parameter space.
    ParameterVector
);
real_vector!(
    /// A summary statistic of a dataset.
    SummaryVector
);

impl SummaryVector {
    /// Elementwise difference `self - other`.
    pub fn sub(&self, other: &SummaryVector) -> Result<SummaryVector> {
        if self.len() != other.len() {
            return Err(AbcError::contract(format!(
                "summary length {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(SummaryVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Divides every entry by `by`.
    pub fn scale_down(&self, by: f64) -> SummaryVector {
        SummaryVector(self.0.iter().map(|v| v / by).collect())
    }
}

/// One proposed parameter with its importance weight and summary distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedParticle {
    pub theta: ParameterVector,
    /// Prior density over proposal density at `theta`.
    pub weight: f64,
    /// Λ-norm distance between the simulated and observed summaries.
    pub distance: f64,
    pub accepted: bool,
}

/// The accepted particles of one sampler run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub particles: Vec<WeightedParticle>,
    pub n_proposed: usize,
    pub bandwidth: f64,
    pub seed: u64,
    pub kernel: Kernel,
}

impl PosteriorSample {
    pub fn n_accepted(&self) -> usize {
        self.particles.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.particles.len() as f64 / self.n_proposed as f64
    }

    pub fn param_dim(&self) -> usize {
        self.particles.first().map_or(0, |p| p.theta.len())
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|p| p.weight)
    }
}
