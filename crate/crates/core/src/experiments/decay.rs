//! Acceptance probability as a function of n at a bandwidth shrinking like
//! n^{-1/2}: the prior as proposal against a proposal adapted by the
//! iterative sampler.

use serde::{Deserialize, Serialize};

use super::{check, EXPERIMENT_DECAY};
use crate::error::{AbcError, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::models::{equally_spaced_alphas, BoxPrior, GaussianQuantileModel, Model, QuantileSimulation};
use crate::rng::{derive_seed, derive_stream};
use crate::samplers::{accept_by_kernel, iis_adapt, simulate_particles, AbcProblem, IisConfig, Proposal, ProposalSpec};
use crate::types::{ParameterVector, SummaryVector};

/// Particles simulated per batch; batching bounds memory without changing
/// which random streams the particles use.
const CHUNK: usize = 1 << 18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalKind {
    Prior,
    Iis,
}

impl ProposalKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProposalKind::Prior => "prior",
            ProposalKind::Iis => "iis",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub n_list: Vec<usize>,
    /// Summary dimension of the Gaussian quantile model.
    pub d: usize,
    /// ε_n = eps_scale / √n.
    pub eps_scale: f64,
    /// Simulations for the prior-proposal estimate at each n.
    pub n_sims: usize,
    /// Simulations for the adapted-proposal estimate at each n.
    pub iis_sims: usize,
    /// Adaptation settings for the iterative proposal.
    pub iis: IisConfig,
    pub seed: u64,
    pub theta0: Vec<f64>,
    pub prior_lower: Vec<f64>,
    pub prior_upper: Vec<f64>,
    pub kernel: KernelFamily,
    pub simulation: QuantileSimulation,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            n_list: vec![100, 1000, 10_000],
            d: 2,
            eps_scale: 4.0,
            n_sims: 4_000_000,
            iis_sims: 100_000,
            iis: IisConfig::default(),
            seed: 0,
            theta0: vec![1.0, std::f64::consts::SQRT_2],
            prior_lower: vec![-10.0, -10.0],
            prior_upper: vec![10.0, 10.0],
            kernel: KernelFamily::Uniform,
            simulation: QuantileSimulation::OrderStatistics,
        }
    }
}

impl DecayConfig {
    pub fn prior(&self) -> Result<BoxPrior> {
        BoxPrior::new(self.prior_lower.clone(), self.prior_upper.clone())
    }

    pub fn eps(&self, n: usize) -> f64 {
        self.eps_scale / (n as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        check(self.n_sims >= 1 && self.iis_sims >= 1, "simulation budgets must be positive")?;
        check(!self.n_list.is_empty(), "n_list is empty")?;
        check(self.n_list.iter().all(|n| *n >= 2), "data size must be at least 2")?;
        check(self.d >= 1, "summary dimension must be positive")?;
        check(self.eps_scale > 0.0 && self.eps_scale.is_finite(), "eps_scale must be positive")?;
        self.iis.validate()?;
        let prior = self.prior()?;
        check(prior.dim() == 2, "prior box must be two-dimensional")?;
        check(
            self.theta0.len() == 2 && prior.contains(&self.theta0) && self.theta0[1] > 0.0,
            "theta0 must be (mu, sigma) with sigma > 0 inside the prior box",
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub proposal: ProposalKind,
    pub n: usize,
    pub p_acc_hat: f64,
    pub ess: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Least-squares slope of log p_acc on log n for the prior proposal.
    pub prior_slope: Option<f64>,
    pub iis_slope: Option<f64>,
}

impl DecayTable {
    pub fn p_acc(&self, proposal: ProposalKind, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.proposal == proposal && r.n == n)
            .map(|r| r.p_acc_hat)
    }
}

/// Least-squares slope of `ln y` on `ln x` over the points with `y > 0`;
/// `None` with fewer than two such points or a single distinct x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Acceptance fraction and ESS of `n_sims` particles at fixed `eps`, without
/// keeping the particles.
fn measure(problem: &AbcProblem<'_>, proposal: &Proposal, eps: f64, n_sims: usize, seed: u64) -> Result<(f64, f64)> {
    let (mut n_acc, mut sw, mut sw2) = (0usize, 0.0, 0.0);
    let mut start = 0;
    while start < n_sims {
        let len = CHUNK.min(n_sims - start);
        let batch = simulate_particles(problem.model, proposal, len, seed, start as u64, |s| {
            problem.kernel.distance(s, problem.s_obs)
        })?;
        let distances: Vec<f64> = batch.iter().map(|p| p.value.unwrap_or(f64::INFINITY)).collect();
        let coins: Vec<f64> = batch.iter().map(|p| p.coin).collect();
        for i in accept_by_kernel(&distances, &coins, problem.kernel.family(), eps) {
            n_acc += 1;
            sw += batch[i].weight;
            sw2 += batch[i].weight * batch[i].weight;
        }
        start += len;
    }
    let ess = if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 };
    Ok((n_acc as f64 / n_sims as f64, ess))
}

/// For each n: one observed dataset at θ₀, then the acceptance fraction at
/// ε_n under the prior and under the mixture proposal fitted by the
/// iterative sampler's adaptation loop. Zero acceptances are reported as
/// `p_acc_hat = 0`.
pub fn run_acceptance_decay(cfg: &DecayConfig) -> Result<DecayTable> {
    cfg.validate()?;
    let prior = cfg.prior()?;
    let kernel = Kernel::identity(cfg.kernel, cfg.d)?;
    let theta0 = ParameterVector::new(cfg.theta0.clone())?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let ctx = |e: AbcError, what: &str| e.context(format!("n = {n}, {what}"));
        let seed = derive_seed(cfg.seed, &[EXPERIMENT_DECAY, n as u64]);
        let model = GaussianQuantileModel::new(equally_spaced_alphas(cfg.d), n, prior.clone())?.with_method(cfg.simulation);
        let data = model.simulate_data(&theta0, &mut derive_stream(derive_seed(seed, &[0]), 0))?;
        let s_obs: SummaryVector = model.summarize(&data)?;
        let problem = AbcProblem::new(&model, &s_obs, &kernel)?;
        let eps = cfg.eps(n);

        let (p, ess) = measure(&problem, &Proposal::Prior, eps, cfg.n_sims, derive_seed(seed, &[1]))
            .map_err(|e| ctx(e, "prior proposal"))?;
        rows.push(DecayRow {
            proposal: ProposalKind::Prior,
            n,
            p_acc_hat: p,
            ess,
            eps,
        });

        let adapted = iis_adapt(&problem, &cfg.iis, derive_seed(seed, &[2])).map_err(|e| ctx(e, "adaptation"))?;
        let q = Proposal::Mixture(ProposalSpec::new(cfg.iis.beta, adapted.proposal)?);
        let (p, ess) =
            measure(&problem, &q, eps, cfg.iis_sims, derive_seed(seed, &[3])).map_err(|e| ctx(e, "adapted proposal"))?;
        rows.push(DecayRow {
            proposal: ProposalKind::Iis,
            n,
            p_acc_hat: p,
            ess,
            eps,
        });
    }
    let slope = |kind: ProposalKind| {
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.proposal == kind)
            .map(|r| (r.n as f64, r.p_acc_hat))
            .unzip();
        loglog_slope(&x, &y)
    };
    Ok(DecayTable {
        prior_slope: slope(ProposalKind::Prior),
        iis_slope: slope(ProposalKind::Iis),
        rows,
    })
}
