//! Replicated experiment harnesses.
//!
//! Every harness derives the seed of replicate `r` as
//! `derive_seed(seed, [experiment id, r])`, so results do not depend on the
//! order in which replicates run or on the worker count.

mod decay;
mod gaussian;
mod sv;

use crate::error::{AbcError, Result};
use crate::samplers::{accept_by_kernel, resolve_bandwidth, BandwidthRule, Proposed};
use crate::kernel::KernelFamily;

pub use decay::{loglog_slope, run_acceptance_decay, DecayConfig, DecayRow, DecayTable, ProposalKind};
pub use gaussian::{
    rate_grid, run_gaussian_experiment, GaussianExperimentConfig, GaussianMethod, GaussianRow, GaussianTable,
    SummaryVariant,
};
pub use sv::{run_sv_experiment, SvExperimentConfig, SvMethod, SvRow, SvTable};

pub(crate) const EXPERIMENT_GAUSSIAN: u64 = 1;
pub(crate) const EXPERIMENT_SV: u64 = 2;
pub(crate) const EXPERIMENT_DECAY: u64 = 3;

/// Weighted mean of the accepted parameters after applying `rule` to
/// `distances`. Returns the mean together with the realized bandwidth.
pub(crate) fn accepted_mean<T>(
    particles: &[Proposed<T>],
    distances: &[f64],
    family: KernelFamily,
    rule: BandwidthRule,
) -> Result<(Vec<f64>, f64)> {
    let eps = resolve_bandwidth(rule, distances)?;
    let coins: Vec<f64> = particles.iter().map(|p| p.coin).collect();
    let accepted = accept_by_kernel(distances, &coins, family, eps);
    if accepted.is_empty() {
        return Err(AbcError::EmptyAcceptance {
            proposed: particles.len(),
            bandwidth: eps,
        });
    }
    let p = particles[accepted[0]].theta.len();
    let mut sum = vec![0.0; p];
    let mut total = 0.0;
    for &i in &accepted {
        let w = particles[i].weight;
        total += w;
        for (s, t) in sum.iter_mut().zip(particles[i].theta.iter()) {
            *s += w * t;
        }
    }
    Ok((sum.into_iter().map(|s| s / total).collect(), eps))
}

pub(crate) fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(AbcError::Contract(msg.to_string()))
    }
}
