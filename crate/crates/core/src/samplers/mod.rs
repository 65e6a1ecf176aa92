//! Rejection and importance-sampling ABC.
//!
//! Particle `i` of a run draws everything (proposal, simulated data, kernel
//! coin) from stream `(seed, offset + i)`, so a run's output does not depend
//! on how the particles are scheduled across threads.

mod iis;
mod proposal;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AbcError, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::models::Model;
use crate::rng::derive_stream;
use crate::types::{ParameterVector, PosteriorSample, SummaryVector, WeightedParticle};

pub use iis::{
    iis_abc, iis_adapt, iis_finish, proposals_close, update_proposal, FinalProposal, IisAdaptation,
    IisConfig, IisTrace, IterationRecord, StopReason, UpdatedProposal,
};
pub use proposal::{MultivariateT, Proposal, ProposalSpec};

/// How the bandwidth of a run is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum BandwidthRule {
    /// Use this ε directly (may be +∞).
    Fixed(f64),
    /// Set ε to the distance quantile giving this fraction of acceptances.
    AcceptanceRate(f64),
}

impl BandwidthRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BandwidthRule::Fixed(eps) if eps > 0.0 => Ok(()),
            BandwidthRule::AcceptanceRate(p) if p > 0.0 && p < 1.0 => Ok(()),
            other => Err(AbcError::contract(format!("invalid bandwidth rule {other:?}"))),
        }
    }
}

/// Number of order statistics kept for rate `p` out of `n`: `⌈p n⌉`, at least 1.
/// Products within 1e-9 of an integer are not rounded up.
pub fn acceptance_count(p: f64, n: usize) -> usize {
    let x = p * n as f64;
    let nearest = x.round();
    let k = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (k as usize).clamp(1, n)
}

/// The `⌈pN⌉`-th smallest distance.
pub fn select_bandwidth(distances: &[f64], p: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(AbcError::contract("bandwidth selection needs at least one distance"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(AbcError::contract(format!("acceptance rate {p} not in (0,1)")));
    }
    let k = acceptance_count(p, distances.len());
    let mut work = distances.to_vec();
    let (_, kth, _) = work.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(kth.max(f64::MIN_POSITIVE))
}

/// One simulated particle before the accept step.
#[derive(Clone, Debug)]
pub struct Proposed<T> {
    pub theta: ParameterVector,
    pub weight: f64,
    /// `None` when the parameter had zero prior density or fell outside the
    /// simulator's domain; such particles are never accepted.
    pub value: Option<T>,
    /// Uniform draw for the kernel's accept/reject coin.
    pub coin: f64,
}

/// Draws `n` parameters from `proposal`, simulates one summary each and maps
/// it through `f`. Particle `i` uses stream `(seed, offset + i)`.
pub fn simulate_particles<T, F>(
    model: &dyn Model,
    proposal: &Proposal,
    n: usize,
    seed: u64,
    offset: u64,
    f: F,
) -> Result<Vec<Proposed<T>>>
where
    T: Send,
    F: Fn(&SummaryVector) -> Result<T> + Sync,
{
    let prior = model.prior();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_stream(seed, offset + i as u64);
            let theta = proposal.draw(prior, &mut rng);
            let weight = proposal.weight(prior, &theta);
            let value = if weight > 0.0 {
                match model.simulate_summary(&theta, &mut rng) {
                    Ok(s) => Some(f(&s)?),
                    Err(AbcError::Domain(_)) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            if !weight.is_finite() {
                return Err(AbcError::contract(format!("non-finite importance weight at {:?}", theta.as_slice())));
            }
            let coin = rng.random::<f64>();
            Ok(Proposed {
                theta,
                weight,
                value,
                coin,
            })
        })
        .collect()
}

/// Kernel accept step on precomputed distances; `f64::INFINITY` marks a
/// particle that can never be accepted.
pub fn accept_by_kernel(distances: &[f64], coins: &[f64], family: KernelFamily, eps: f64) -> Vec<usize> {
    distances
        .iter()
        .zip(coins)
        .enumerate()
        .filter(|(_, (d, u))| {
            if !d.is_finite() {
                return false;
            }
            match family {
                KernelFamily::Uniform => **d <= eps,
                _ => {
                    let r = if eps.is_infinite() { 0.0 } else { **d / eps };
                    let k = match family {
                        KernelFamily::Gaussian => (-0.5 * r * r).exp(),
                        _ => (1.0 - r * r).max(0.0),
                    };
                    **u < k
                }
            }
        })
        .map(|(i, _)| i)
        .collect()
}

/// Resolves the bandwidth for a set of realized distances.
pub fn resolve_bandwidth(rule: BandwidthRule, distances: &[f64]) -> Result<f64> {
    rule.validate()?;
    match rule {
        BandwidthRule::Fixed(eps) => Ok(eps),
        BandwidthRule::AcceptanceRate(p) => select_bandwidth(distances, p),
    }
}

/// Diagonal of a Λ that puts summaries on a common scale: `λ_j = 1/MAD_j²`,
/// with MAD the normal-consistent median absolute deviation of coordinate `j`
/// over `n_pilot` prior-predictive simulations (stream `(seed, i)`).
pub fn pilot_lambda(model: &dyn Model, n_pilot: usize, seed: u64) -> Result<Vec<f64>> {
    if n_pilot < 2 {
        return Err(AbcError::contract("pilot run needs at least two simulations"));
    }
    let pilot = simulate_particles(model, &Proposal::Prior, n_pilot, seed, 0, |s| Ok(s.clone()))?;
    let summaries: Vec<SummaryVector> = pilot.into_iter().filter_map(|p| p.value).collect();
    if summaries.len() < 2 {
        return Err(AbcError::numerical("pilot run produced fewer than two valid summaries"));
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        crate::models::quantile_sorted(v, 0.5)
    };
    (0..model.summary_dim())
        .map(|j| {
            let mut col: Vec<f64> = summaries.iter().map(|s| s[j]).collect();
            let m = median(&mut col);
            let mut dev: Vec<f64> = col.iter().map(|x| (x - m).abs()).collect();
            let mad = 1.482_602_218_505_602 * median(&mut dev);
            if mad > 0.0 && mad.is_finite() {
                Ok(1.0 / (mad * mad))
            } else {
                Err(AbcError::numerical(format!("summary {j} has no spread in the pilot run")))
            }
        })
        .collect()
}

/// Inputs shared by every sampler call on one observed dataset.
#[derive(Clone, Copy)]
pub struct AbcProblem<'a> {
    pub model: &'a dyn Model,
    pub s_obs: &'a SummaryVector,
    pub kernel: &'a Kernel,
}

impl<'a> AbcProblem<'a> {
    pub fn new(model: &'a dyn Model, s_obs: &'a SummaryVector, kernel: &'a Kernel) -> Result<Self> {
        if s_obs.len() != model.summary_dim() || kernel.dim() != model.summary_dim() {
            return Err(AbcError::contract(format!(
                "summary dimension {} but observed summary has {} and kernel {}",
                model.summary_dim(),
                s_obs.len(),
                kernel.dim()
            )));
        }
        Ok(Self { model, s_obs, kernel })
    }
}

/// Importance-sampling ABC with stream offset `offset` (used by the iterative sampler).
pub fn is_abc_at(
    problem: &AbcProblem<'_>,
    proposal: &Proposal,
    rule: BandwidthRule,
    n: usize,
    seed: u64,
    offset: u64,
) -> Result<PosteriorSample> {
    if n == 0 {
        return Err(AbcError::contract("simulation budget must be positive"));
    }
    rule.validate()?;
    let kernel = problem.kernel;
    let s_obs = problem.s_obs;
    let proposed = simulate_particles(problem.model, proposal, n, seed, offset, |s| kernel.distance(s, s_obs))?;
    let distances: Vec<f64> = proposed.iter().map(|p| p.value.unwrap_or(f64::INFINITY)).collect();
    let coins: Vec<f64> = proposed.iter().map(|p| p.coin).collect();
    let eps = resolve_bandwidth(rule, &distances)?;
    let accepted = accept_by_kernel(&distances, &coins, kernel.family(), eps);
    if accepted.is_empty() {
        return Err(AbcError::EmptyAcceptance { proposed: n, bandwidth: eps });
    }
    let mut by_index: Vec<Option<Proposed<f64>>> = proposed.into_iter().map(Some).collect();
    let particles = accepted
        .into_iter()
        .map(|i| {
            let p = by_index[i].take().expect("each index accepted once");
            WeightedParticle {
                theta: p.theta,
                weight: p.weight,
                distance: distances[i],
                accepted: true,
            }
        })
        .collect();
    Ok(PosteriorSample {
        particles,
        n_proposed: n,
        bandwidth: eps,
        seed,
        kernel: kernel.clone(),
    })
}

/// Importance-sampling ABC: propose from `proposal`, weight by prior/proposal.
pub fn is_abc(
    problem: &AbcProblem<'_>,
    proposal: &Proposal,
    rule: BandwidthRule,
    n: usize,
    seed: u64,
) -> Result<PosteriorSample> {
    is_abc_at(problem, proposal, rule, n, seed, 0)
}

/// Rejection ABC: importance sampling with the prior as proposal.
pub fn rejection_abc(problem: &AbcProblem<'_>, rule: BandwidthRule, n: usize, seed: u64) -> Result<PosteriorSample> {
    is_abc(problem, &Proposal::Prior, rule, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{equally_spaced_alphas, GaussianQuantileModel};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    /// Summary equals θ scaled per coordinate; no noise.
    struct Scaled {
        prior: crate::models::BoxPrior,
        scale: Vec<f64>,
    }

    impl Model for Scaled {
        fn prior(&self) -> &crate::models::BoxPrior {
            &self.prior
        }
        fn summary_dim(&self) -> usize {
            self.scale.len()
        }
        fn data_size(&self) -> usize {
            1
        }
        fn simulate_data(&self, theta: &ParameterVector, _: &mut crate::rng::RngStream) -> Result<Vec<f64>> {
            Ok(theta.iter().zip(&self.scale).map(|(t, c)| t * c).collect())
        }
        fn summarize(&self, data: &[f64]) -> Result<SummaryVector> {
            SummaryVector::new(data.to_vec())
        }
    }

    #[test]
    fn pilot_lambda_standardizes() {
        // Uniform on [0, 1] has MAD 1/4, so λ_j = 1/(1.4826 c_j / 4)².
        let m = Scaled {
            prior: crate::models::BoxPrior::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            scale: vec![1.0, 100.0],
        };
        let l = pilot_lambda(&m, 20_000, 3).unwrap();
        for (lj, c) in l.iter().zip(&m.scale) {
            let expect = 1.0 / (1.482_602_218_505_602 * c / 4.0f64).powi(2);
            assert!((lj / expect - 1.0).abs() < 0.05, "{lj} vs {expect}");
        }
        assert_eq!(l, pilot_lambda(&m, 20_000, 3).unwrap());
        assert!(pilot_lambda(&m, 1, 3).is_err());
        let flat = Scaled {
            prior: m.prior.clone(),
            scale: vec![1.0, 0.0],
        };
        assert!(pilot_lambda(&flat, 100, 3).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(select_bandwidth(&[5.0, 1.0, 4.0, 2.0, 3.0], 0.4).unwrap(), 2.0);
        assert_eq!(select_bandwidth(&[5.0], 0.5).unwrap(), 5.0);
        assert_eq!(select_bandwidth(&[2.5; 10], 0.3).unwrap(), 2.5);
        assert!(select_bandwidth(&[], 0.3).is_err());
        assert!(select_bandwidth(&[1.0], 1.0).is_err());
    }

    #[test]
    fn acceptance_count_avoids_spurious_round_up() {
        assert_eq!(acceptance_count(0.05, 10_000), 500);
        assert_eq!(acceptance_count(0.01, 1000), 10);
        assert_eq!(acceptance_count(0.03, 1000), 30);
        assert_eq!(acceptance_count(0.001, 10), 1);
        assert_eq!(acceptance_count(0.25, 10), 3);
    }

    proptest! {
        #[test]
        fn bandwidth_is_kth_order_statistic(
            d in prop::collection::vec(0.0f64..100.0, 1..200),
            p in 0.001f64..0.999,
        ) {
            let eps = select_bandwidth(&d, p).unwrap();
            let mut sorted = d.clone();
            sorted.sort_by(f64::total_cmp);
            let k = (p * d.len() as f64).ceil().max(1.0) as usize;
            let expected = sorted[acceptance_count(p, d.len()) - 1].max(f64::MIN_POSITIVE);
            prop_assert_eq!(eps, expected);
            prop_assert!(acceptance_count(p, d.len()) <= k);
            let accepted = d.iter().filter(|x| **x <= eps).count();
            prop_assert!(accepted as f64 >= p * d.len() as f64 - 1e-9 * d.len() as f64);
        }
    }

    fn gaussian_problem(n: usize) -> (GaussianQuantileModel, SummaryVector, Kernel) {
        let model = GaussianQuantileModel::new(equally_spaced_alphas(2), n, GaussianQuantileModel::default_prior()).unwrap();
        let truth = ParameterVector::new(vec![1.0, 2f64.sqrt()]).unwrap();
        let s_obs = model.simulate_summary(&truth, &mut derive_stream(100, 0)).unwrap();
        let kernel = Kernel::identity(KernelFamily::Uniform, 2).unwrap();
        (model, s_obs, kernel)
    }

    #[test]
    fn rate_mode_accepts_requested_fraction() {
        let (model, s_obs, kernel) = gaussian_problem(1000);
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let out = rejection_abc(&problem, BandwidthRule::AcceptanceRate(0.05), 10_000, 1).unwrap();
        assert_eq!(out.n_accepted(), 500);
        assert!(out.particles.iter().all(|p| p.weight == 1.0 && p.distance <= out.bandwidth));
    }

    #[test]
    fn infinite_bandwidth_accepts_every_valid_draw() {
        let (model, s_obs, kernel) = gaussian_problem(100);
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let out = rejection_abc(&problem, BandwidthRule::Fixed(f64::INFINITY), 4000, 2).unwrap();
        // Half of the prior box has sigma <= 0, which the simulator rejects.
        let frac = out.acceptance_rate();
        assert!((frac - 0.5).abs() < 0.03, "{frac}");
        let mean_mu = out.particles.iter().map(|p| p.theta[0]).sum::<f64>() / out.n_accepted() as f64;
        let mean_sigma = out.particles.iter().map(|p| p.theta[1]).sum::<f64>() / out.n_accepted() as f64;
        assert!(mean_mu.abs() < 0.4 && (mean_sigma - 5.0).abs() < 0.3);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let (model, s_obs, kernel) = gaussian_problem(500);
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| rejection_abc(&problem, BandwidthRule::AcceptanceRate(0.02), 5000, 9).unwrap())
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn beta_one_matches_rejection() {
        let (model, s_obs, kernel) = gaussian_problem(300);
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let t = MultivariateT::new(vec![1.0, 1.0], DMatrix::identity(2, 2), 5.0).unwrap();
        let q = Proposal::Mixture(ProposalSpec::new(1.0, t).unwrap());
        let rule = BandwidthRule::AcceptanceRate(0.03);
        let a = is_abc(&problem, &q, rule, 3000, 4).unwrap();
        let b = rejection_abc(&problem, rule, 3000, 4).unwrap();
        assert!(a.particles.iter().all(|p| p.weight == 1.0));
        assert_eq!(a, b);
    }

    #[test]
    fn shrinking_uniform_bandwidth_nests_accepted_sets() {
        let (model, s_obs, kernel) = gaussian_problem(200);
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let mut prev: Option<Vec<Vec<f64>>> = None;
        for eps in [2.0, 1.0, 0.5, 0.25] {
            let out = rejection_abc(&problem, BandwidthRule::Fixed(eps), 4000, 5).unwrap();
            let set: Vec<Vec<f64>> = out.particles.iter().map(|p| p.theta.as_slice().to_vec()).collect();
            if let Some(bigger) = &prev {
                assert!(set.iter().all(|t| bigger.contains(t)));
            }
            prev = Some(set);
        }
    }

    #[test]
    fn empty_acceptance_is_an_error() {
        let (model, s_obs, kernel) = gaussian_problem(200);
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let r = rejection_abc(&problem, BandwidthRule::Fixed(1e-12), 100, 5);
        assert!(matches!(r, Err(AbcError::EmptyAcceptance { proposed: 100, .. })));
        assert!(rejection_abc(&problem, BandwidthRule::Fixed(1.0), 0, 5).is_err());
    }

    #[test]
    fn smooth_kernel_in_rate_mode_thins_further() {
        let (model, s_obs, _) = gaussian_problem(200);
        let kernel = Kernel::identity(KernelFamily::Gaussian, 2).unwrap();
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let out = rejection_abc(&problem, BandwidthRule::AcceptanceRate(0.1), 5000, 6).unwrap();
        assert!(out.n_accepted() < 5000);
        // Gaussian kernel can accept beyond ε but with decaying probability.
        assert!(out.n_accepted() > 0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (model, _, kernel) = gaussian_problem(200);
        let bad = SummaryVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(AbcProblem::new(&model, &bad, &kernel).is_err());
    }
}
