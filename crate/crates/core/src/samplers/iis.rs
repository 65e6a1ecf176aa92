//! Iterative importance-sampling ABC.
//!
//! Each iteration runs importance-sampling ABC on a small budget with the
//! proposal `βπ + (1-β)q_k`, picks the bandwidth from an acceptance-rate
//! schedule, and refits `q_{k+1}` as a Student t whose mean and variance are
//! the weighted sample mean and `inflation ×` the weighted sample variance.
//! The remaining budget goes to a final run with the last fitted proposal.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::proposal::{MultivariateT, Proposal, ProposalSpec};
use super::{is_abc_at, AbcProblem, BandwidthRule};
use crate::error::{AbcError, Result};
use crate::types::PosteriorSample;

/// Proposal used by the final estimation run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FinalProposal {
    /// `βπ + (1-β) q_{K+1}`
    #[default]
    Mixture,
    /// `q_{K+1}` alone.
    StudentOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IisConfig {
    /// Total simulation budget N.
    pub n_total: usize,
    /// Budget per adaptation iteration N0.
    pub n_per_iter: usize,
    /// Acceptance rates p_1, p_2, ...; the last entry repeats.
    pub rates: Vec<f64>,
    pub beta: f64,
    pub df: f64,
    pub inflation: f64,
    /// Stop once ε_{k-1} - ε_k < eps_stop_rel · ε_{k-1}.
    pub eps_stop_rel: f64,
    /// Proposals are close when the Mahalanobis distance between centres is
    /// below this and the generalized variance ratio is in `variance_ratio_band`.
    pub prop_stop: f64,
    pub variance_ratio_band: (f64, f64),
    pub max_iters: usize,
    pub final_proposal: FinalProposal,
}

impl Default for IisConfig {
    fn default() -> Self {
        Self {
            n_total: 10_000,
            n_per_iter: 1000,
            rates: vec![0.05, 0.04, 0.03, 0.02, 0.01],
            beta: 0.05,
            df: 5.0,
            inflation: 2.0,
            eps_stop_rel: 0.01,
            prop_stop: 0.1,
            variance_ratio_band: (0.8, 1.25),
            max_iters: 8,
            final_proposal: FinalProposal::Mixture,
        }
    }
}

impl IisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(AbcError::contract(m.to_string()));
        if self.n_per_iter == 0 || self.n_per_iter >= self.n_total {
            return bad("per-iteration budget must be positive and below the total budget");
        }
        if self.rates.is_empty() || !self.rates.iter().all(|p| *p > 0.0 && *p < 1.0) {
            return bad("acceptance rates must be nonempty and inside (0,1)");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("mixture weight must lie in (0,1]");
        }
        if !(self.df > 0.0 && self.inflation > 0.0) {
            return bad("degrees of freedom and inflation must be positive");
        }
        if !(self.eps_stop_rel > 0.0 && self.prop_stop > 0.0) {
            return bad("stopping thresholds must be positive");
        }
        let (lo, hi) = self.variance_ratio_band;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
            return bad("variance ratio band must bracket 1");
        }
        Ok(())
    }

    /// Acceptance rate of iteration `k` (0-based).
    pub fn rate(&self, k: usize) -> f64 {
        *self.rates.get(k).unwrap_or_else(|| self.rates.last().expect("nonempty"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub rate: f64,
    pub eps: f64,
    pub n_proposed: usize,
    pub n_accepted: usize,
    /// Centre and variance of the t component used in this iteration.
    pub center: Vec<f64>,
    pub variance: Vec<Vec<f64>>,
    /// True if this iteration re-ran after an empty acceptance.
    pub retried: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Bandwidth,
    ProposalConverged,
    MaxIterations,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IisTrace {
    pub iterations: Vec<IterationRecord>,
    pub stop: StopReason,
    pub final_rate: f64,
    pub final_budget: usize,
    pub final_eps: f64,
    /// Number of simulations consumed, adaptation plus final run.
    pub simulations: usize,
    /// Whether any refit needed covariance regularization.
    pub regularized: bool,
}

/// State after the adaptation loop: the fitted proposal and bookkeeping.
#[derive(Clone, Debug)]
pub struct IisAdaptation {
    pub proposal: MultivariateT,
    pub iterations: Vec<IterationRecord>,
    pub stop: StopReason,
    pub simulations_used: usize,
    pub regularized: bool,
}

/// Weighted moments refit of the t component.
#[derive(Clone, Debug)]
pub struct UpdatedProposal {
    pub proposal: MultivariateT,
    /// True when the weighted covariance was singular and got a diagonal jitter.
    pub regularized: bool,
}

/// Fits a t with the weighted sample mean and `inflation ×` weighted variance.
pub fn update_proposal(sample: &PosteriorSample, df: f64, inflation: f64) -> Result<UpdatedProposal> {
    let p = sample.param_dim();
    if p == 0 || sample.n_accepted() < p + 1 {
        return Err(AbcError::contract(format!(
            "need at least {} particles to refit the proposal, have {}",
            p + 1,
            sample.n_accepted()
        )));
    }
    let total: f64 = sample.weights().sum();
    if !(total > 0.0) {
        return Err(AbcError::contract("particles carry no weight"));
    }
    let mut mean = DVector::zeros(p);
    for part in &sample.particles {
        mean += DVector::from_column_slice(part.theta.as_slice()) * (part.weight / total);
    }
    let mut cov = DMatrix::zeros(p, p);
    for part in &sample.particles {
        let d = DVector::from_column_slice(part.theta.as_slice()) - &mean;
        cov += &d * d.transpose() * (part.weight / total);
    }
    cov = (&cov + cov.transpose()) * 0.5;

    let positive_definite = cov.clone().cholesky().is_some() && cov.determinant() > 0.0;
    let regularized = !positive_definite;
    if regularized {
        let trace = cov.trace();
        let jitter = if trace > 0.0 { 1e-8 * trace / p as f64 } else { 1e-8 };
        cov += DMatrix::identity(p, p) * jitter;
    }
    let proposal = MultivariateT::from_moments(mean.iter().copied().collect(), cov * inflation, df)?;
    Ok(UpdatedProposal { proposal, regularized })
}

/// Moment-based closeness of two t proposals.
pub fn proposals_close(old: &MultivariateT, new: &MultivariateT, max_distance: f64, band: (f64, f64)) -> bool {
    let v_old = old.variance();
    let v_new = new.variance();
    let Some(chol) = v_old.clone().cholesky() else {
        return false;
    };
    let diff = new.center() - old.center();
    let maha = diff.dot(&chol.solve(&diff)).sqrt();
    let ratio = v_new.determinant() / v_old.determinant();
    maha < max_distance && ratio >= band.0 && ratio <= band.1
}

fn variance_rows(t: &MultivariateT) -> Vec<Vec<f64>> {
    let v = t.variance();
    (0..v.nrows()).map(|i| v.row(i).iter().copied().collect()).collect()
}

/// The t that matches the prior's mean and variance.
fn initial_proposal(problem: &AbcProblem<'_>, df: f64) -> Result<MultivariateT> {
    let prior = problem.model.prior();
    let var = DMatrix::from_diagonal(&DVector::from_vec(prior.variances()));
    MultivariateT::from_moments(prior.mean(), var, df)
}

fn mixture(beta: f64, t: &MultivariateT) -> Result<Proposal> {
    Ok(Proposal::Mixture(ProposalSpec::new(beta, t.clone())?))
}

/// Runs the adaptation loop and returns the fitted proposal.
pub fn iis_adapt(problem: &AbcProblem<'_>, cfg: &IisConfig, seed: u64) -> Result<IisAdaptation> {
    cfg.validate()?;
    let mut current = initial_proposal(problem, cfg.df)?;
    let mut previous: Option<MultivariateT> = None;
    let mut iterations = Vec::new();
    let mut used = 0usize;
    let mut regularized = false;
    let mut prev_eps: Option<f64> = None;
    let mut stop = StopReason::MaxIterations;

    let fits = |used: usize| used + cfg.n_per_iter < cfg.n_total;

    for k in 0..cfg.max_iters {
        if !fits(used) {
            stop = StopReason::Budget;
            break;
        }
        let rate = cfg.rate(k);
        let mut used_t = current.clone();
        let mut used_rate = rate;
        let mut retried = false;
        let attempt = is_abc_at(
            problem,
            &mixture(cfg.beta, &current)?,
            BandwidthRule::AcceptanceRate(rate),
            cfg.n_per_iter,
            seed,
            used as u64,
        );
        used += cfg.n_per_iter;
        let sample = match attempt {
            Ok(s) => s,
            Err(AbcError::EmptyAcceptance { .. }) if fits(used) => {
                retried = true;
                used_t = previous.clone().unwrap_or_else(|| current.clone());
                used_rate = (2.0 * rate).min(0.99);
                let again = is_abc_at(
                    problem,
                    &mixture(cfg.beta, &used_t)?,
                    BandwidthRule::AcceptanceRate(used_rate),
                    cfg.n_per_iter,
                    seed,
                    used as u64,
                );
                used += cfg.n_per_iter;
                again.map_err(|e| e.context(format!("adaptation iteration {k} after retry")))?
            }
            Err(e) => return Err(e.context(format!("adaptation iteration {k}"))),
        };
        let eps = sample.bandwidth;
        iterations.push(IterationRecord {
            rate: used_rate,
            eps,
            n_proposed: sample.n_proposed,
            n_accepted: sample.n_accepted(),
            center: used_t.center().iter().copied().collect(),
            variance: variance_rows(&used_t),
            retried,
        });

        let updated = update_proposal(&sample, cfg.df, cfg.inflation)?;
        regularized |= updated.regularized;
        let bandwidth_stalled = prev_eps.is_some_and(|pe| pe - eps < cfg.eps_stop_rel * pe);
        let close = proposals_close(&used_t, &updated.proposal, cfg.prop_stop, cfg.variance_ratio_band);
        previous = Some(used_t);
        current = updated.proposal;
        prev_eps = Some(eps);
        if bandwidth_stalled {
            stop = StopReason::Bandwidth;
            break;
        }
        if close {
            stop = StopReason::ProposalConverged;
            break;
        }
    }
    Ok(IisAdaptation {
        proposal: current,
        iterations,
        stop,
        simulations_used: used,
        regularized,
    })
}

/// Runs the final importance-sampling stage on the remaining budget.
pub fn iis_finish(
    problem: &AbcProblem<'_>,
    cfg: &IisConfig,
    adaptation: &IisAdaptation,
    final_proposal: FinalProposal,
    seed: u64,
) -> Result<(PosteriorSample, IisTrace)> {
    let k = adaptation.iterations.len();
    let budget = cfg.n_total - adaptation.simulations_used;
    let rate = cfg.rate(k);
    let proposal = match final_proposal {
        FinalProposal::Mixture => mixture(cfg.beta, &adaptation.proposal)?,
        FinalProposal::StudentOnly => Proposal::Student(adaptation.proposal.clone()),
    };
    let sample = is_abc_at(
        problem,
        &proposal,
        BandwidthRule::AcceptanceRate(rate),
        budget,
        seed,
        adaptation.simulations_used as u64,
    )
    .map_err(|e| e.context("final importance-sampling stage"))?;
    let trace = IisTrace {
        iterations: adaptation.iterations.clone(),
        stop: adaptation.stop,
        final_rate: rate,
        final_budget: budget,
        final_eps: sample.bandwidth,
        simulations: adaptation.simulations_used + budget,
        regularized: adaptation.regularized,
    };
    Ok((sample, trace))
}

/// Adaptation followed by the final run, per `cfg.final_proposal`.
pub fn iis_abc(problem: &AbcProblem<'_>, cfg: &IisConfig, seed: u64) -> Result<(PosteriorSample, IisTrace)> {
    let adaptation = iis_adapt(problem, cfg, seed)?;
    iis_finish(problem, cfg, &adaptation, cfg.final_proposal, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Kernel, KernelFamily};
    use crate::models::{equally_spaced_alphas, GaussianQuantileModel, Model};
    use crate::rng::derive_stream;
    use crate::samplers::is_abc;
    use crate::types::{ParameterVector, SummaryVector, WeightedParticle};

    fn sample_from(points: &[(f64, f64)]) -> PosteriorSample {
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
            n_proposed: points.len(),
            bandwidth: 1.0,
            seed: 0,
            kernel: Kernel::identity(KernelFamily::Uniform, 1).unwrap(),
        }
    }

    #[test]
    fn refit_from_two_points() {
        let up = update_proposal(&sample_from(&[(0.0, 1.0), (2.0, 1.0)]), 5.0, 2.0).unwrap();
        assert!(!up.regularized);
        assert!((up.proposal.center()[0] - 1.0).abs() < 1e-15);
        assert!((up.proposal.variance()[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn refit_invariant_to_weight_scale() {
        let pts = [(0.3, 0.5), (1.7, 2.0), (-0.4, 1.0)];
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(t, w)| (t, w * 37.0)).collect();
        let a = update_proposal(&sample_from(&pts), 5.0, 2.0).unwrap().proposal;
        let b = update_proposal(&sample_from(&scaled), 5.0, 2.0).unwrap().proposal;
        assert!((a.center() - b.center()).norm() < 1e-12);
        assert!((a.variance() - b.variance()).norm() < 1e-12);
    }

    #[test]
    fn identical_particles_get_regularized() {
        let up = update_proposal(&sample_from(&[(3.0, 1.0), (3.0, 2.0), (3.0, 1.0)]), 5.0, 2.0).unwrap();
        assert!(up.regularized);
        assert_eq!(up.proposal.center()[0], 3.0);
        assert!(up.proposal.variance()[(0, 0)] > 0.0);
    }

    #[test]
    fn too_few_particles() {
        assert!(update_proposal(&sample_from(&[(3.0, 1.0)]), 5.0, 2.0).is_err());
    }

    #[test]
    fn heavy_tail_uses_variance_as_scale() {
        let up = update_proposal(&sample_from(&[(0.0, 1.0), (2.0, 1.0)]), 2.0, 2.0).unwrap();
        assert!((up.proposal.scale()[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn closeness_metric() {
        let t = |c: f64, v: f64| MultivariateT::from_moments(vec![c], DMatrix::from_element(1, 1, v), 5.0).unwrap();
        assert!(proposals_close(&t(0.0, 1.0), &t(0.05, 1.1), 0.1, (0.8, 1.25)));
        assert!(!proposals_close(&t(0.0, 1.0), &t(0.5, 1.0), 0.1, (0.8, 1.25)));
        assert!(!proposals_close(&t(0.0, 1.0), &t(0.0, 2.0), 0.1, (0.8, 1.25)));
    }

    fn setup() -> (GaussianQuantileModel, SummaryVector, Kernel) {
        let model = GaussianQuantileModel::new(equally_spaced_alphas(2), 1000, GaussianQuantileModel::default_prior()).unwrap();
        let truth = ParameterVector::new(vec![1.0, 2f64.sqrt()]).unwrap();
        let s_obs = model.simulate_summary(&truth, &mut derive_stream(55, 0)).unwrap();
        (model, s_obs, Kernel::identity(KernelFamily::Uniform, 2).unwrap())
    }

    #[test]
    fn budget_is_exact() {
        let (model, s_obs, kernel) = setup();
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let cfg = IisConfig::default();
        let (sample, trace) = iis_abc(&problem, &cfg, 3).unwrap();
        let adapt: usize = trace.iterations.iter().map(|r| r.n_proposed).sum();
        assert_eq!(adapt + sample.n_proposed, cfg.n_total);
        assert_eq!(trace.simulations, cfg.n_total);
        assert!(sample.particles.iter().all(|p| p.weight <= 1.0 / cfg.beta));
    }

    #[test]
    fn zero_iterations_equals_single_is_run() {
        let (model, s_obs, kernel) = setup();
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let cfg = IisConfig { max_iters: 0, ..Default::default() };
        let (sample, trace) = iis_abc(&problem, &cfg, 8).unwrap();
        assert!(trace.iterations.is_empty());
        let q1 = initial_proposal(&problem, cfg.df).unwrap();
        let direct = is_abc(
            &problem,
            &mixture(cfg.beta, &q1).unwrap(),
            BandwidthRule::AcceptanceRate(cfg.rate(0)),
            cfg.n_total,
            8,
        )
        .unwrap();
        assert_eq!(sample, direct);
    }

    #[test]
    fn beta_one_is_prior_sampling() {
        let (model, s_obs, kernel) = setup();
        let problem = AbcProblem::new(&model, &s_obs, &kernel).unwrap();
        let cfg = IisConfig { beta: 1.0, ..Default::default() };
        let (sample, trace) = iis_abc(&problem, &cfg, 2).unwrap();
        assert!(sample.particles.iter().all(|p| p.weight == 1.0));
        // Same rate on the same proposal gives bandwidths of the same size.
        let first = trace.iterations[0].eps;
        assert!(trace.iterations.iter().all(|r| r.eps > 0.1 * first));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = IisConfig { n_per_iter: 10_000, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = IisConfig { rates: vec![0.0], ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = IisConfig { beta: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        assert!(IisConfig::default().validate().is_ok());
    }

    #[test]
    fn rate_schedule_repeats_last() {
        let cfg = IisConfig::default();
        assert_eq!(cfg.rate(0), 0.05);
        assert_eq!(cfg.rate(4), 0.01);
        assert_eq!(cfg.rate(12), 0.01);
    }
}
