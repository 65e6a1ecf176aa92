//! Normal model with quantile summaries: rejection ABC on the original and
//! the projected summary against the MLES and full-data MLE baselines.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accepted_mean, check, EXPERIMENT_GAUSSIAN};
use crate::analytics::{gaussian_limit, mle_gaussian, mles, reduction_matrix, GaussianLimit, MlesOptions};
use crate::diagnostics::mse_table;
use crate::error::{AbcError, Result};
use crate::kernel::{Kernel, KernelFamily};
use crate::models::{equally_spaced_alphas, BoxPrior, GaussianQuantileModel, Model, QuantileSimulation};
use crate::rng::{derive_seed, derive_stream};
use crate::samplers::{simulate_particles, BandwidthRule, Proposal};
use crate::types::{ParameterVector, SummaryVector};

/// `k` acceptance rates spaced geometrically from `lo` to `hi`.
pub fn rate_grid(lo: f64, hi: f64, k: usize) -> Vec<BandwidthRule> {
    if k == 1 {
        return vec![BandwidthRule::AcceptanceRate(lo)];
    }
    let ratio = (hi / lo).ln() / (k - 1) as f64;
    (0..k)
        .map(|i| BandwidthRule::AcceptanceRate(if i + 1 == k { hi } else { lo * (ratio * i as f64).exp() }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianExperimentConfig {
    /// Observations per dataset.
    pub n: usize,
    pub d_list: Vec<usize>,
    pub bandwidths: Vec<BandwidthRule>,
    /// Also report ABC with ε = ∞, which accepts every valid particle.
    pub unbounded_row: bool,
    pub replicates: usize,
    /// Simulations per replicate and summary dimension.
    pub n_sims: usize,
    pub seed: u64,
    pub theta0: Vec<f64>,
    pub prior_lower: Vec<f64>,
    pub prior_upper: Vec<f64>,
    pub kernel: KernelFamily,
    pub simulation: QuantileSimulation,
    pub mles_restarts: usize,
}

impl Default for GaussianExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl GaussianExperimentConfig {
    /// n = 10⁴ and 100 replicates.
    pub fn desk() -> Self {
        Self {
            n: 10_000,
            d_list: vec![2, 4, 9, 19],
            bandwidths: rate_grid(1e-4, 0.5, 10),
            unbounded_row: true,
            replicates: 100,
            n_sims: 1_000_000,
            seed: 0,
            theta0: vec![1.0, std::f64::consts::SQRT_2],
            prior_lower: vec![-10.0, -10.0],
            prior_upper: vec![10.0, 10.0],
            kernel: KernelFamily::Uniform,
            simulation: QuantileSimulation::OrderStatistics,
            mles_restarts: 5,
        }
    }

    /// n = 10⁵ and 200 replicates.
    pub fn full() -> Self {
        Self {
            n: 100_000,
            replicates: 200,
            ..Self::desk()
        }
    }

    pub fn prior(&self) -> Result<BoxPrior> {
        BoxPrior::new(self.prior_lower.clone(), self.prior_upper.clone())
    }

    pub fn validate(&self) -> Result<()> {
        check(self.n >= 2, "data size must be at least 2")?;
        check(self.replicates >= 2, "need at least two replicates")?;
        check(self.n_sims >= 1, "simulation budget must be positive")?;
        check(!self.d_list.is_empty(), "d_list is empty")?;
        check(self.d_list.iter().all(|d| *d >= 2), "summary dimension must be at least 2")?;
        check(
            !self.bandwidths.is_empty() || self.unbounded_row,
            "no bandwidths to evaluate",
        )?;
        for b in &self.bandwidths {
            b.validate()?;
        }
        let prior = self.prior()?;
        check(prior.dim() == 2, "prior box must be two-dimensional")?;
        check(
            self.theta0.len() == 2 && prior.contains(&self.theta0) && self.theta0[1] > 0.0,
            "theta0 must be (mu, sigma) with sigma > 0 inside the prior box",
        )
    }

    fn rules(&self) -> Vec<BandwidthRule> {
        let mut rules = self.bandwidths.clone();
        if self.unbounded_row {
            rules.push(BandwidthRule::Fixed(f64::INFINITY));
        }
        rules
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianMethod {
    Abc,
    Mles,
    Mle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryVariant {
    Original,
    Reduced,
    /// The full-data MLE, which uses no summary.
    FullData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianRow {
    pub method: GaussianMethod,
    pub d: usize,
    pub variant: SummaryVariant,
    /// `None` for the baselines.
    pub bandwidth: Option<BandwidthRule>,
    /// 1-based parameter coordinate.
    pub coord: usize,
    pub mse: f64,
    pub mse_times_n: f64,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianTable {
    pub seed: u64,
    pub n: usize,
    pub rows: Vec<GaussianRow>,
}

impl GaussianTable {
    /// MSE×n of one coordinate for the first row matching the filter.
    pub fn find(
        &self,
        method: GaussianMethod,
        d: usize,
        variant: SummaryVariant,
        bandwidth: Option<BandwidthRule>,
        coord: usize,
    ) -> Option<&GaussianRow> {
        self.rows.iter().find(|r| {
            r.method == method && r.d == d && r.variant == variant && r.bandwidth == bandwidth && r.coord == coord
        })
    }
}

struct PerDimension {
    mles: Vec<f64>,
    original: Vec<Vec<f64>>,
    reduced: Vec<Vec<f64>>,
}

struct Replicate {
    mle: Vec<f64>,
    dims: Vec<PerDimension>,
}

fn run_replicate(cfg: &GaussianExperimentConfig, prior: &BoxPrior, rules: &[BandwidthRule], r: usize) -> Result<Replicate> {
    let rep_seed = derive_seed(cfg.seed, &[EXPERIMENT_GAUSSIAN, r as u64]);
    let theta0 = ParameterVector::new(cfg.theta0.clone())?;
    let data_model = GaussianQuantileModel::new(vec![0.5], cfg.n, prior.clone())?;
    let data = data_model.simulate_data(&theta0, &mut derive_stream(derive_seed(rep_seed, &[0]), 0))?;
    let mle = mle_gaussian(&data)?;
    let init = ParameterVector::new(
        mle.iter()
            .zip(prior.lower().iter().zip(prior.upper()))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect(),
    )?;

    let mut dims = Vec::with_capacity(cfg.d_list.len());
    for &d in &cfg.d_list {
        let ctx = |e: AbcError, what: &str| e.context(format!("replicate {r}, d = {d}, {what}"));
        let alphas = equally_spaced_alphas(d);
        let model = GaussianQuantileModel::new(alphas.clone(), cfg.n, prior.clone())?.with_method(cfg.simulation);
        let s_obs = model.summarize(&data)?;
        let c = reduction_matrix(&gaussian_limit(&alphas, &theta0)?)?;
        let cs_obs = c.matrix() * DVector::from_column_slice(s_obs.as_slice());

        let limit = GaussianLimit::new(alphas)?;
        let opts = MlesOptions {
            restarts: cfg.mles_restarts,
            seed: derive_seed(rep_seed, &[2, d as u64]),
            ..MlesOptions::default()
        };
        let fit = mles(&limit, prior, &s_obs, cfg.n, &init, &opts).map_err(|e| ctx(e, "MLES"))?;

        let k_orig = Kernel::identity(cfg.kernel, d)?;
        let k_red = Kernel::identity(cfg.kernel, 2)?;
        let cs_obs = SummaryVector::new(cs_obs.iter().copied().collect())?;
        let pool = simulate_particles(
            &model,
            &Proposal::Prior,
            cfg.n_sims,
            derive_seed(rep_seed, &[1, d as u64]),
            0,
            |s| {
                let cs = c.matrix() * DVector::from_column_slice(s.as_slice());
                let cs = SummaryVector::new(cs.iter().copied().collect())?;
                Ok((k_orig.distance(s, &s_obs)?, k_red.distance(&cs, &cs_obs)?))
            },
        )
        .map_err(|e| ctx(e, "simulation"))?;
        let orig: Vec<f64> = pool.iter().map(|p| p.value.map_or(f64::INFINITY, |v| v.0)).collect();
        let red: Vec<f64> = pool.iter().map(|p| p.value.map_or(f64::INFINITY, |v| v.1)).collect();

        let mut original = Vec::with_capacity(rules.len());
        let mut reduced = Vec::with_capacity(rules.len());
        for rule in rules {
            let what = format!("bandwidth {rule:?}");
            original.push(accepted_mean(&pool, &orig, cfg.kernel, *rule).map_err(|e| ctx(e, &what))?.0);
            reduced.push(accepted_mean(&pool, &red, cfg.kernel, *rule).map_err(|e| ctx(e, &what))?.0);
        }
        dims.push(PerDimension {
            mles: fit.theta.into_inner(),
            original,
            reduced,
        });
    }
    Ok(Replicate {
        mle: mle.into_inner(),
        dims,
    })
}

/// Runs every replicate and aggregates MSE per method, summary dimension,
/// summary variant, bandwidth and coordinate.
///
/// Within a replicate and dimension, one pool of `n_sims` prior draws serves
/// every bandwidth and both summary variants; this is the same as running
/// each cell separately with the same seed.
pub fn run_gaussian_experiment(cfg: &GaussianExperimentConfig) -> Result<GaussianTable> {
    cfg.validate()?;
    let prior = cfg.prior()?;
    let rules = cfg.rules();
    let reps: Vec<Replicate> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &prior, &rules, r))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut push = |method, d, variant, bandwidth, est: Vec<Vec<f64>>| -> Result<()> {
        let t = mse_table(&est, &cfg.theta0, cfg.n)?;
        for j in 0..t.mse.len() {
            rows.push(GaussianRow {
                method,
                d,
                variant,
                bandwidth,
                coord: j + 1,
                mse: t.mse[j],
                mse_times_n: t.mse_times_n[j],
                replicates: t.replicates,
            });
        }
        Ok(())
    };
    for (di, &d) in cfg.d_list.iter().enumerate() {
        push(GaussianMethod::Mle, d, SummaryVariant::FullData, None, reps.iter().map(|r| r.mle.clone()).collect())?;
        push(
            GaussianMethod::Mles,
            d,
            SummaryVariant::Original,
            None,
            reps.iter().map(|r| r.dims[di].mles.clone()).collect(),
        )?;
        for (bi, rule) in rules.iter().enumerate() {
            for (variant, pick) in [
                (SummaryVariant::Original, false),
                (SummaryVariant::Reduced, true),
            ] {
                let est = reps
                    .iter()
                    .map(|r| {
                        let pd = &r.dims[di];
                        if pick { pd.reduced[bi].clone() } else { pd.original[bi].clone() }
                    })
                    .collect();
                push(GaussianMethod::Abc, d, variant, Some(*rule), est)?;
            }
        }
    }
    Ok(GaussianTable {
        seed: cfg.seed,
        n: cfg.n,
        rows,
    })
}
