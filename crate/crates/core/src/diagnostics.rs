//! Estimators and Monte Carlo diagnostics for weighted ABC output.

use serde::{Deserialize, Serialize};

use crate::error::{AbcError, Result};
use crate::types::{ParameterVector, PosteriorSample};

/// Summary of one sampler run for a function `h(θ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub h_hat: Vec<f64>,
    pub ess: f64,
    pub n_acc: usize,
    pub p_acc_hat: f64,
    pub sigma_is_hat: Vec<f64>,
    pub mcv_hat: Vec<f64>,
}

fn total_weight(sample: &PosteriorSample) -> Result<f64> {
    let total: f64 = sample.weights().sum();
    if !(total > 0.0) {
        return Err(AbcError::contract("accepted particles carry zero total weight"));
    }
    Ok(total)
}

/// Self-normalized weighted mean of `h` over the accepted particles.
pub fn posterior_mean<H>(sample: &PosteriorSample, h: H) -> Result<Vec<f64>>
where
    H: Fn(&ParameterVector) -> Vec<f64>,
{
    let total = total_weight(sample)?;
    let mut acc: Option<Vec<f64>> = None;
    for p in &sample.particles {
        let v = h(&p.theta);
        let slot = acc.get_or_insert_with(|| vec![0.0; v.len()]);
        for (a, x) in slot.iter_mut().zip(&v) {
            *a += p.weight * x;
        }
    }
    Ok(acc.unwrap_or_default().into_iter().map(|a| a / total).collect())
}

/// Posterior mean of θ itself.
pub fn posterior_mean_theta(sample: &PosteriorSample) -> Result<Vec<f64>> {
    posterior_mean(sample, |t| t.as_slice().to_vec())
}

/// `(Σw)² / Σw²` over accepted particles.
pub fn ess(sample: &PosteriorSample) -> f64 {
    let (s, s2) = sample.weights().fold((0.0, 0.0), |(a, b), w| (a + w, b + w * w));
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// Plug-in `N_acc Σ w̄_i² (h(θ_i) - ĥ)²` with `w̄` normalized over accepted particles.
pub fn is_variance_hat<H>(sample: &PosteriorSample, h: H, h_hat: &[f64]) -> Result<Vec<f64>>
where
    H: Fn(&ParameterVector) -> Vec<f64>,
{
    let n_acc = sample.n_accepted();
    if n_acc < 2 {
        return Err(AbcError::contract("IS variance needs at least two accepted particles"));
    }
    let total = total_weight(sample)?;
    let mut acc = vec![0.0; h_hat.len()];
    for p in &sample.particles {
        let wbar = p.weight / total;
        for (a, (x, m)) in acc.iter_mut().zip(h(&p.theta).iter().zip(h_hat)) {
            *a += wbar * wbar * (x - m) * (x - m);
        }
    }
    Ok(acc.into_iter().map(|a| a * n_acc as f64).collect())
}

/// `(1/N) Σ_IS / p_acc`.
pub fn mc_variance_hat(sigma_is_hat: &[f64], p_acc_hat: f64, n_proposed: usize) -> Result<Vec<f64>> {
    if !(p_acc_hat > 0.0) || n_proposed == 0 {
        return Err(AbcError::contract("acceptance probability and budget must be positive"));
    }
    Ok(sigma_is_hat
        .iter()
        .map(|s| s / p_acc_hat / n_proposed as f64)
        .collect())
}

/// `AV_MLES / (AV_ĥ + MCV_ĥ)`.
pub fn efficiency_ratio(av_mles: f64, av_hat: f64, mcv_hat: f64) -> Result<f64> {
    if !(av_mles > 0.0 && av_hat > 0.0 && mcv_hat >= 0.0) {
        return Err(AbcError::contract("efficiency needs positive variances"));
    }
    Ok(av_mles / (av_hat + mcv_hat))
}

/// Full report for `h(θ) = θ`.
pub fn report(sample: &PosteriorSample) -> Result<EstimatorReport> {
    let id = |t: &ParameterVector| t.as_slice().to_vec();
    let h_hat = posterior_mean(sample, id)?;
    let sigma_is_hat = is_variance_hat(sample, id, &h_hat)?;
    let p_acc_hat = sample.acceptance_rate();
    let mcv_hat = mc_variance_hat(&sigma_is_hat, p_acc_hat, sample.n_proposed)?;
    Ok(EstimatorReport {
        h_hat,
        ess: ess(sample),
        n_acc: sample.n_accepted(),
        p_acc_hat,
        sigma_is_hat,
        mcv_hat,
    })
}

/// Per-coordinate mean squared error against a known truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub mse: Vec<f64>,
    pub mse_times_n: Vec<f64>,
    pub replicates: usize,
}

pub fn mse_table(estimates: &[Vec<f64>], truth: &[f64], n: usize) -> Result<MseRow> {
    if estimates.len() < 2 {
        return Err(AbcError::contract("MSE needs at least two replicates"));
    }
    if estimates.iter().any(|e| e.len() != truth.len()) {
        return Err(AbcError::contract("estimate and truth dimensions differ"));
    }
    let r = estimates.len() as f64;
    let mse: Vec<f64> = (0..truth.len())
        .map(|j| estimates.iter().map(|e| (e[j] - truth[j]).powi(2)).sum::<f64>() / r)
        .collect();
    let mse_times_n = mse.iter().map(|m| m * n as f64).collect();
    Ok(MseRow {
        mse,
        mse_times_n,
        replicates: estimates.len(),
    })
}

/// Coordinate-wise ratio of two methods' MSEs (`numerator / denominator`).
pub fn mse_ratio(numerator: &MseRow, denominator: &MseRow) -> Vec<f64> {
    numerator
        .mse
        .iter()
        .zip(&denominator.mse)
        .map(|(a, b)| a / b)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Kernel, KernelFamily};
    use crate::types::WeightedParticle;
    use proptest::prelude::*;

    fn sample(points: &[(f64, f64)], n_proposed: usize) -> PosteriorSample {
        PosteriorSample {
            particles: points
                .iter()
                .map(|&(t, w)| WeightedParticle {
                    theta: ParameterVector::new(vec![t]).unwrap(),
                    weight: w,
                    distance: 0.0,
                    accepted: true,
                })
                .collect(),
            n_proposed,
            bandwidth: 1.0,
            seed: 0,
            kernel: Kernel::identity(KernelFamily::Uniform, 1).unwrap(),
        }
    }

    #[test]
    fn mean_examples() {
        assert_eq!(posterior_mean_theta(&sample(&[(0.0, 1.0), (2.0, 1.0)], 2)).unwrap(), vec![1.0]);
        assert_eq!(posterior_mean_theta(&sample(&[(0.0, 3.0), (4.0, 1.0)], 2)).unwrap(), vec![1.0]);
        assert_eq!(posterior_mean_theta(&sample(&[(0.0, 7.0), (2.0, 7.0)], 2)).unwrap(), vec![1.0]);
        assert!(posterior_mean_theta(&sample(&[(0.0, 0.0)], 2)).is_err());
    }

    #[test]
    fn ess_examples() {
        assert!((ess(&sample(&[(0.0, 1.0); 5], 5)) - 5.0).abs() < 1e-12);
        assert!((ess(&sample(&[(0.0, 2.0), (1.0, 0.0)], 5)) - 1.0).abs() < 1e-12);
        assert!((ess(&sample(&[(0.0, 2.0), (1.0, 1.0)], 5)) - 1.8).abs() < 1e-12);
    }

    #[test]
    fn is_variance_examples() {
        let s = sample(&[(0.0, 1.0), (2.0, 1.0)], 10);
        let m = posterior_mean_theta(&s).unwrap();
        assert!((is_variance_hat(&s, |t| t.as_slice().to_vec(), &m).unwrap()[0] - 1.0).abs() < 1e-15);
        let dominated = sample(&[(5.0, 1e9), (0.0, 1.0)], 10);
        let m = posterior_mean_theta(&dominated).unwrap();
        assert!(is_variance_hat(&dominated, |t| t.as_slice().to_vec(), &m).unwrap()[0] < 1e-6);
        assert!(is_variance_hat(&sample(&[(0.0, 1.0)], 1), |t| t.as_slice().to_vec(), &[0.0]).is_err());
    }

    #[test]
    fn mcv_and_efficiency_examples() {
        assert!((mc_variance_hat(&[1.0], 0.1, 100).unwrap()[0] - 0.1).abs() < 1e-15);
        let a = mc_variance_hat(&[2.0], 0.2, 50).unwrap()[0];
        let b = mc_variance_hat(&[2.0], 0.2, 100).unwrap()[0];
        assert!((a - 2.0 * b).abs() < 1e-15);
        assert!(mc_variance_hat(&[1.0], 0.0, 10).is_err());
        assert_eq!(efficiency_ratio(2.0, 2.0, 0.0).unwrap(), 1.0);
        assert_eq!(efficiency_ratio(2.0, 2.0, 2.0).unwrap(), 0.5);
        assert!(efficiency_ratio(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn mse_examples() {
        let truth = [1.0, 2.0];
        let exact = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        assert_eq!(mse_table(&exact, &truth, 10).unwrap().mse, vec![0.0, 0.0]);
        let off = vec![vec![2.0, 2.0], vec![0.0, 2.0]];
        let row = mse_table(&off, &truth, 10).unwrap();
        assert_eq!(row.mse, vec![1.0, 0.0]);
        assert_eq!(row.mse_times_n, vec![10.0, 0.0]);
        assert_eq!(mse_ratio(&row, &row)[0], 1.0);
        assert!(mse_table(&off[..1], &truth, 10).is_err());
    }

    proptest! {
        #[test]
        fn weight_rescaling_and_bounds(
            pts in prop::collection::vec((-10.0f64..10.0, 0.01f64..10.0), 2..30),
            c in 0.01f64..100.0,
            av in 0.1f64..10.0,
            extra in 0.0f64..10.0,
            mcv in 0.0f64..10.0,
        ) {
            let s = sample(&pts, 100);
            let scaled: Vec<(f64, f64)> = pts.iter().map(|&(t, w)| (t, w * c)).collect();
            let s2 = sample(&scaled, 100);
            let (m1, m2) = (posterior_mean_theta(&s).unwrap()[0], posterior_mean_theta(&s2).unwrap()[0]);
            prop_assert!((m1 - m2).abs() <= 1e-9 * (1.0 + m1.abs()));
            let e = ess(&s);
            prop_assert!(e >= 1.0 - 1e-12 && e <= pts.len() as f64 + 1e-9);
            let equal: Vec<(f64, f64)> = pts.iter().map(|&(t, _)| (t, 1.0)).collect();
            let se = sample(&equal, 100);
            let m = posterior_mean_theta(&se).unwrap();
            let v = is_variance_hat(&se, |t| t.as_slice().to_vec(), &m).unwrap()[0];
            let biased = equal.iter().map(|(t, _)| (t - m[0]).powi(2)).sum::<f64>() / equal.len() as f64;
            prop_assert!((v - biased).abs() <= 1e-9 * (1.0 + biased));
            let av_hat = av + extra;
            prop_assert!(efficiency_ratio(av, av_hat, mcv).unwrap() <= av / av_hat + 1e-15);
        }
    }
}
