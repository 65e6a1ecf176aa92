//! Smoothing kernels on summary space.
//!
//! Every kernel is a non-increasing function of `‖v‖_Λ = sqrt(vᵀΛv)` with
//! `K(0) = 1`, so `K` can be read directly as an acceptance probability.

use serde::{Deserialize, Serialize};

use crate::error::{AbcError, Result};
use crate::types::SummaryVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Uniform,
    Gaussian,
    Epanechnikov,
}

impl std::str::FromStr for KernelFamily {
    type Err = AbcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "gaussian" => Ok(Self::Gaussian),
            "epanechnikov" => Ok(Self::Epanechnikov),
            other => Err(AbcError::contract(format!("unknown kernel family {other:?}"))),
        }
    }
}

/// Kernel family plus the diagonal of the scaling matrix Λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    family: KernelFamily,
    lambda: Vec<f64>,
}

impl Kernel {
    pub fn new(family: KernelFamily, lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(AbcError::contract("kernel needs at least one dimension"));
        }
        if let Some(bad) = lambda.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(AbcError::contract(format!(
                "kernel scaling entries must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { family, lambda })
    }

    /// Kernel with Λ = I on a `dim`-dimensional summary.
    pub fn identity(family: KernelFamily, dim: usize) -> Result<Self> {
        Self::new(family, vec![1.0; dim])
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.lambda.len() {
            return Err(AbcError::contract(format!(
                "kernel dimension {} but vector has length {}",
                self.lambda.len(),
                v.len()
            )));
        }
        Ok(())
    }

    fn squared_norm_unchecked(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.lambda).map(|(x, l)| l * x * x).sum()
    }

    /// `‖v‖²_Λ` on a raw slice, with dimension checking.
    pub fn squared_norm(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        Ok(self.squared_norm_unchecked(v))
    }

    /// Distance `‖a - b‖_Λ` between two summaries.
    pub fn distance(&self, a: &SummaryVector, b: &SummaryVector) -> Result<f64> {
        self.check_dim(a.as_slice())?;
        self.check_dim(b.as_slice())?;
        let sq: f64 = a
            .iter()
            .zip(b.iter())
            .zip(&self.lambda)
            .map(|((x, y), l)| {
                let d = x - y;
                l * d * d
            })
            .sum();
        Ok(sq.sqrt())
    }

    /// Kernel value as a function of the squared Λ-norm.
    pub fn profile_sq(&self, sq_norm: f64) -> f64 {
        match self.family {
            KernelFamily::Uniform => {
                if sq_norm <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => (-0.5 * sq_norm).exp(),
            KernelFamily::Epanechnikov => (1.0 - sq_norm).max(0.0),
        }
    }
}

/// `K(v)`.
pub fn kernel_eval(k: &Kernel, v: &SummaryVector) -> Result<f64> {
    Ok(k.profile_sq(k.squared_norm(v.as_slice())?))
}

/// `K_ε(x) = K(x/ε)`.
pub fn scaled_kernel_eval(k: &Kernel, eps: f64, x: &SummaryVector) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(AbcError::contract(format!("bandwidth must be positive, got {eps}")));
    }
    kernel_eval(k, &x.scale_down(eps))
}

/// `sqrt(vᵀΛv)`.
pub fn lambda_norm(k: &Kernel, v: &SummaryVector) -> Result<f64> {
    Ok(k.squared_norm(v.as_slice())?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> SummaryVector {
        SummaryVector::new(v.to_vec()).unwrap()
    }

    const FAMILIES: [KernelFamily; 3] = [
        KernelFamily::Uniform,
        KernelFamily::Gaussian,
        KernelFamily::Epanechnikov,
    ];

    #[test]
    fn uniform_unit_ball() {
        let k = Kernel::identity(KernelFamily::Uniform, 2).unwrap();
        assert_eq!(kernel_eval(&k, &sv(&[0.5, 0.0])).unwrap(), 1.0);
        assert_eq!(kernel_eval(&k, &sv(&[1.5, 0.0])).unwrap(), 0.0);
        assert_eq!(kernel_eval(&k, &sv(&[1.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_values() {
        let k = Kernel::identity(KernelFamily::Gaussian, 2).unwrap();
        assert_eq!(kernel_eval(&k, &sv(&[0.0, 0.0])).unwrap(), 1.0);
        let v = kernel_eval(&k, &sv(&[1.0, 1.0])).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn scaled_examples() {
        let u = Kernel::identity(KernelFamily::Uniform, 2).unwrap();
        assert_eq!(scaled_kernel_eval(&u, 2.0, &sv(&[1.5, 0.0])).unwrap(), 1.0);
        let g = Kernel::identity(KernelFamily::Gaussian, 2).unwrap();
        assert_eq!(scaled_kernel_eval(&g, 1.0, &sv(&[0.0, 0.0])).unwrap(), 1.0);
        let v = scaled_kernel_eval(&g, 2.0, &sv(&[2.0, 2.0])).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!(scaled_kernel_eval(&g, 0.0, &sv(&[0.0, 0.0])).is_err());
        assert!(scaled_kernel_eval(&g, -1.0, &sv(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn norm_examples() {
        let k = Kernel::identity(KernelFamily::Uniform, 2).unwrap();
        assert_eq!(lambda_norm(&k, &sv(&[3.0, 4.0])).unwrap(), 5.0);
        let k = Kernel::new(KernelFamily::Uniform, vec![4.0, 1.0]).unwrap();
        assert_eq!(lambda_norm(&k, &sv(&[1.0, 0.0])).unwrap(), 2.0);
        assert_eq!(lambda_norm(&k, &sv(&[0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let k = Kernel::identity(KernelFamily::Gaussian, 3).unwrap();
        assert!(kernel_eval(&k, &sv(&[1.0, 2.0])).is_err());
        assert!(lambda_norm(&k, &sv(&[1.0])).is_err());
    }

    #[test]
    fn rejects_bad_lambda() {
        assert!(Kernel::new(KernelFamily::Uniform, vec![1.0, 0.0]).is_err());
        assert!(Kernel::new(KernelFamily::Uniform, vec![-1.0]).is_err());
        assert!(Kernel::new(KernelFamily::Uniform, vec![]).is_err());
    }

    fn lambda_and_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..6).prop_flat_map(|d| {
            (
                prop::collection::vec(0.01f64..10.0, d),
                prop::collection::vec(-5.0f64..5.0, d),
                prop::collection::vec(-5.0f64..5.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn monotone_in_lambda_norm((lambda, a, b) in lambda_and_pair()) {
            for fam in FAMILIES {
                let k = Kernel::new(fam, lambda.clone()).unwrap();
                let (va, vb) = (sv(&a), sv(&b));
                let (na, nb) = (lambda_norm(&k, &va).unwrap(), lambda_norm(&k, &vb).unwrap());
                let (ka, kb) = (kernel_eval(&k, &va).unwrap(), kernel_eval(&k, &vb).unwrap());
                prop_assert!((0.0..=1.0).contains(&ka));
                if na <= nb {
                    prop_assert!(ka >= kb);
                } else {
                    prop_assert!(kb >= ka);
                }
            }
        }

        #[test]
        fn unit_at_origin(lambda in prop::collection::vec(0.01f64..10.0, 1..6)) {
            for fam in FAMILIES {
                let k = Kernel::new(fam, lambda.clone()).unwrap();
                prop_assert_eq!(kernel_eval(&k, &SummaryVector::zeros(lambda.len())).unwrap(), 1.0);
            }
        }

        #[test]
        fn scaled_is_bitwise_rescaled((lambda, x, _b) in lambda_and_pair(), eps in 0.01f64..10.0) {
            for fam in FAMILIES {
                let k = Kernel::new(fam, lambda.clone()).unwrap();
                let xv = sv(&x);
                let direct = kernel_eval(&k, &xv.scale_down(eps)).unwrap();
                prop_assert_eq!(scaled_kernel_eval(&k, eps, &xv).unwrap().to_bits(), direct.to_bits());
            }
        }
    }
}
