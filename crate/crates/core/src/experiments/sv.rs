//! Stochastic-volatility experiment: rejection ABC against the iterative
//! importance sampler, with and without the prior in the final proposal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check, EXPERIMENT_SV};
use crate::diagnostics::{mse_table, posterior_mean_theta, MseRow};
use crate::error::{AbcError, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::models::{BoxPrior, Model, SvModel};
use crate::rng::{derive_seed, derive_stream};
use crate::samplers::{
    iis_adapt, iis_finish, pilot_lambda, rejection_abc, AbcProblem, BandwidthRule, FinalProposal, IisConfig,
};
use crate::types::ParameterVector;

/// Seed tag of the pilot run; replicate tags are dataset indices, so this
/// must not collide with any.
const PILOT_TAG: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvMethod {
    /// Rejection ABC at a fixed acceptance rate.
    Rabc,
    /// Iterative importance sampling with the prior mixed into the final proposal.
    IisMix,
    /// Iterative importance sampling with the fitted t alone in the final run.
    IisT,
}

impl SvMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SvMethod::Rabc => "rabc",
            SvMethod::IisMix => "iis_mix",
            SvMethod::IisT => "iis_t",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvExperimentConfig {
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub theta0: Vec<f64>,
    pub prior_lower: Vec<f64>,
    pub prior_upper: Vec<f64>,
    pub kernel: KernelFamily,
    /// Diagonal of Λ; identity when absent.
    pub lambda: Option<Vec<f64>>,
    /// When set, Λ is instead fitted per data size by `pilot_lambda` with
    /// this many prior-predictive simulations.
    pub pilot_sims: Option<usize>,
    /// Acceptance rate of the rejection sampler.
    pub rabc_rate: f64,
    pub methods: Vec<SvMethod>,
    /// Iterative sampler settings; `n_total` is the budget N of every method.
    pub iis: IisConfig,
}

impl Default for SvExperimentConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl SvExperimentConfig {
    /// Four data sizes and 100 datasets each.
    pub fn full() -> Self {
        Self {
            n_list: vec![100, 500, 2000, 10_000],
            replicates: 100,
            seed: 0,
            theta0: SvModel::true_parameter().into_inner(),
            prior_lower: SvModel::default_prior().lower().to_vec(),
            prior_upper: SvModel::default_prior().upper().to_vec(),
            kernel: KernelFamily::Uniform,
            lambda: None,
            pilot_sims: None,
            rabc_rate: 0.05,
            methods: vec![SvMethod::Rabc, SvMethod::IisMix, SvMethod::IisT],
            iis: IisConfig::default(),
        }
    }

    /// The smallest and a moderately large data size, 50 datasets each.
    pub fn desk() -> Self {
        Self {
            n_list: vec![100, 2000],
            replicates: 50,
            ..Self::full()
        }
    }

    pub fn prior(&self) -> Result<BoxPrior> {
        BoxPrior::new(self.prior_lower.clone(), self.prior_upper.clone())
    }

    /// Kernel for data size `n`.
    pub fn kernel(&self, n: usize) -> Result<Kernel> {
        match (&self.lambda, self.pilot_sims) {
            (Some(_), Some(_)) => Err(AbcError::contract("set at most one of lambda and pilot_sims")),
            (Some(l), None) => Kernel::new(self.kernel, l.clone()),
            (None, Some(m)) => {
                let model = SvModel::new(n, self.prior()?)?;
                let seed = derive_seed(self.seed, &[EXPERIMENT_SV, n as u64, PILOT_TAG]);
                Kernel::new(self.kernel, pilot_lambda(&model, m, seed)?)
            }
            (None, None) => Kernel::identity(self.kernel, 3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check(!self.n_list.is_empty(), "n_list is empty")?;
        check(self.n_list.iter().all(|n| *n >= 2), "data size must be at least 2")?;
        check(self.replicates >= 2, "need at least two replicates")?;
        check(!self.methods.is_empty(), "no methods selected")?;
        BandwidthRule::AcceptanceRate(self.rabc_rate).validate()?;
        self.iis.validate()?;
        check(self.lambda.is_none() || self.pilot_sims.is_none(), "set at most one of lambda and pilot_sims")?;
        check(self.pilot_sims.is_none_or(|m| m >= 2), "pilot run needs at least two simulations")?;
        if let Some(l) = &self.lambda {
            Kernel::new(self.kernel, l.clone())?;
        }
        let prior = self.prior()?;
        check(prior.dim() == 3, "prior box must be three-dimensional")?;
        check(
            self.theta0.len() == 3 && prior.contains(&self.theta0),
            "theta0 must lie inside the prior box",
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvRow {
    pub method: SvMethod,
    pub n: usize,
    /// 1-based parameter coordinate.
    pub coord: usize,
    pub mse: f64,
    pub mse_times_n: f64,
    /// MSE divided by the rejection sampler's MSE; `None` when that method was not run.
    pub ratio_vs_rabc: Option<f64>,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvTable {
    pub seed: u64,
    pub rows: Vec<SvRow>,
}

impl SvTable {
    pub fn find(&self, method: SvMethod, n: usize, coord: usize) -> Option<&SvRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.n == n && r.coord == coord)
    }
}

fn run_cell(cfg: &SvExperimentConfig, prior: &BoxPrior, kernel: &Kernel, n: usize, r: usize) -> Result<Vec<Vec<f64>>> {
    let rep_seed = derive_seed(cfg.seed, &[EXPERIMENT_SV, n as u64, r as u64]);
    let ctx = |what: &str| format!("n = {n}, replicate {r}, {what}");
    let model = SvModel::new(n, prior.clone())?;
    let theta0 = ParameterVector::new(cfg.theta0.clone())?;
    let data = model.simulate_data(&theta0, &mut derive_stream(derive_seed(rep_seed, &[0]), 0))?;
    let s_obs = model.summarize(&data)?;
    let problem = AbcProblem::new(&model, &s_obs, kernel)?;

    let wants_iis = cfg.methods.iter().any(|m| *m != SvMethod::Rabc);
    let iis_seed = derive_seed(rep_seed, &[2]);
    let adaptation = if wants_iis {
        Some(iis_adapt(&problem, &cfg.iis, iis_seed).map_err(|e| e.context(ctx("adaptation")))?)
    } else {
        None
    };
    cfg.methods
        .iter()
        .map(|m| {
            let sample = match m {
                SvMethod::Rabc => rejection_abc(
                    &problem,
                    BandwidthRule::AcceptanceRate(cfg.rabc_rate),
                    cfg.iis.n_total,
                    derive_seed(rep_seed, &[1]),
                ),
                SvMethod::IisMix | SvMethod::IisT => {
                    let fp = if *m == SvMethod::IisMix {
                        FinalProposal::Mixture
                    } else {
                        FinalProposal::StudentOnly
                    };
                    let a = adaptation.as_ref().expect("adapted when an iterative method is selected");
                    iis_finish(&problem, &cfg.iis, a, fp, iis_seed).map(|(s, _)| s)
                }
            }
            .map_err(|e| e.context(ctx(m.name())))?;
            posterior_mean_theta(&sample)
        })
        .collect()
}

/// Runs every (data size, dataset) cell and aggregates MSE per method.
///
/// Both iterative variants share one adaptation run; each then spends the
/// remaining budget on its own final stage, which is what two separate runs
/// with the same seed would do.
pub fn run_sv_experiment(cfg: &SvExperimentConfig) -> Result<SvTable> {
    cfg.validate()?;
    let prior = cfg.prior()?;
    let kernels: Vec<Kernel> = cfg.n_list.iter().map(|&n| cfg.kernel(n)).collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let estimates: Vec<Vec<Vec<f64>>> = cells
        .par_iter()
        .map(|&(n, r)| {
            let ni = cfg.n_list.iter().position(|m| *m == n).expect("n from n_list");
            run_cell(cfg, &prior, &kernels[ni], n, r)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let block = &estimates[ni * cfg.replicates..(ni + 1) * cfg.replicates];
        let tables: Vec<MseRow> = (0..cfg.methods.len())
            .map(|mi| mse_table(&block.iter().map(|e| e[mi].clone()).collect::<Vec<_>>(), &cfg.theta0, n))
            .collect::<Result<_>>()?;
        let rabc = cfg.methods.iter().position(|m| *m == SvMethod::Rabc).map(|i| &tables[i]);
        for (m, t) in cfg.methods.iter().zip(&tables) {
            for j in 0..t.mse.len() {
                rows.push(SvRow {
                    method: *m,
                    n,
                    coord: j + 1,
                    mse: t.mse[j],
                    mse_times_n: t.mse_times_n[j],
                    ratio_vs_rabc: rabc.map(|b| t.mse[j] / b.mse[j]),
                    replicates: t.replicates,
                });
            }
        }
    }
    Ok(SvTable { seed: cfg.seed, rows })
}
