//! Large-n analytic quantities: the summary's limit mean `s(θ)`, its
//! asymptotic covariance `A(θ)` and Jacobian `Ds(θ)`, the information
//! `I(θ) = DsᵀA⁻¹Ds`, the projection `C = Ds(θ₀)ᵀA(θ₀)⁻¹`, and estimators
//! built on them.

mod gaussian;
pub mod nelder_mead;

use nalgebra::{DMatrix, DVector};

use crate::error::{AbcError, Result};
use crate::models::{stats, BoxPrior, Model};
use crate::rng::{derive_stream, RngStream};
use crate::types::{ParameterVector, SummaryVector};

pub use gaussian::{gaussian_limit, GaussianLimit};
use nelder_mead::{minimize, NelderMeadOptions};

/// Limit quantities evaluated at one parameter value.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitAt {
    /// `s(θ)`, length d.
    pub s: DVector<f64>,
    /// `A(θ)`, d × d, symmetric positive definite.
    pub a: DMatrix<f64>,
    /// `Ds(θ)`, d × p.
    pub ds: DMatrix<f64>,
}

impl LimitAt {
    pub fn summary_dim(&self) -> usize {
        self.s.len()
    }

    pub fn param_dim(&self) -> usize {
        self.ds.ncols()
    }

    /// Limit of the linearly transformed summary `C s`.
    pub fn transformed(&self, c: &ReductionMatrix) -> LimitAt {
        let c = c.matrix();
        LimitAt {
            s: c * &self.s,
            a: c * &self.a * c.transpose(),
            ds: c * &self.ds,
        }
    }
}

/// A model family whose summaries obey a CLT with rate `√n`.
pub trait AnalyticLimit: Send + Sync {
    fn at(&self, theta: &ParameterVector) -> Result<LimitAt>;
}

/// `I(θ) = Ds(θ)ᵀ A(θ)⁻¹ Ds(θ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct InformationMatrix(DMatrix<f64>);

impl InformationMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.0
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| AbcError::numerical("information matrix is not positive definite"))
    }
}

/// `C = Ds(θ₀)ᵀ A(θ₀)⁻¹`, p × d.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionMatrix(DMatrix<f64>);

impl ReductionMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self(matrix)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Output dimension p.
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    /// Input dimension d.
    pub fn cols(&self) -> usize {
        self.0.ncols()
    }
}

// A⁻¹ M via Cholesky.
fn solve_spd(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| AbcError::numerical("summary covariance is not positive definite"))?;
    Ok(chol.solve(m))
}

pub fn fisher_info_summary(limit: &LimitAt) -> Result<InformationMatrix> {
    let a_inv_ds = solve_spd(&limit.a, &limit.ds)?;
    let info = limit.ds.transpose() * a_inv_ds;
    // Symmetrize away rounding asymmetry.
    let sym = (&info + info.transpose()) * 0.5;
    Ok(InformationMatrix(sym))
}

pub fn reduction_matrix(limit: &LimitAt) -> Result<ReductionMatrix> {
    let (d, p) = (limit.summary_dim(), limit.param_dim());
    if d < p {
        return Err(AbcError::contract(format!(
            "summary dimension {d} is below parameter dimension {p}"
        )));
    }
    // C = Dsᵀ A⁻¹ = (A⁻¹ Ds)ᵀ since A is symmetric.
    Ok(ReductionMatrix(solve_spd(&limit.a, &limit.ds)?.transpose()))
}

pub fn reduce_summary(c: &ReductionMatrix, s: &SummaryVector) -> Result<SummaryVector> {
    if s.len() != c.cols() {
        return Err(AbcError::contract(format!(
            "summary has length {}, reduction expects {}",
            s.len(),
            c.cols()
        )));
    }
    let out = c.matrix() * DVector::from_column_slice(s.as_slice());
    SummaryVector::new(out.iter().copied().collect())
}

/// Wraps a model so that its summaries are projected through `C`.
pub struct ReducedModel<M> {
    inner: M,
    c: ReductionMatrix,
}

impl<M: Model> ReducedModel<M> {
    pub fn new(inner: M, c: ReductionMatrix) -> Result<Self> {
        if c.cols() != inner.summary_dim() {
            return Err(AbcError::contract("reduction does not match model summary dimension"));
        }
        Ok(Self { inner, c })
    }

    pub fn reduction(&self) -> &ReductionMatrix {
        &self.c
    }
}

impl<M: Model> Model for ReducedModel<M> {
    fn prior(&self) -> &BoxPrior {
        self.inner.prior()
    }

    fn summary_dim(&self) -> usize {
        self.c.rows()
    }

    fn data_size(&self) -> usize {
        self.inner.data_size()
    }

    fn simulate_data(&self, theta: &ParameterVector, rng: &mut RngStream) -> Result<Vec<f64>> {
        self.inner.simulate_data(theta, rng)
    }

    fn summarize(&self, data: &[f64]) -> Result<SummaryVector> {
        reduce_summary(&self.c, &self.inner.summarize(data)?)
    }

    fn simulate_summary(&self, theta: &ParameterVector, rng: &mut RngStream) -> Result<SummaryVector> {
        reduce_summary(&self.c, &self.inner.simulate_summary(theta, rng)?)
    }
}

/// Settings for the synthetic-likelihood maximizer.
#[derive(Clone, Debug)]
pub struct MlesOptions {
    /// Extra starts drawn uniformly from the prior box.
    pub restarts: usize,
    pub nelder_mead: NelderMeadOptions,
    /// Keep the `-½ log|A(θ)/n|` term; without it the objective is a pure
    /// A(θ)⁻¹-weighted least-squares residual.
    pub include_log_det: bool,
    pub seed: u64,
}

impl Default for MlesOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            nelder_mead: NelderMeadOptions::default(),
            include_log_det: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MlesResult {
    pub theta: ParameterVector,
    pub log_likelihood: f64,
}

/// Gaussian synthetic log-likelihood `log N(s_obs; s(θ), A(θ)/n)` up to the
/// `-(d/2) log 2π` constant.
pub fn synthetic_log_likelihood(
    limit: &dyn AnalyticLimit,
    s_obs: &SummaryVector,
    n: usize,
    theta: &ParameterVector,
    include_log_det: bool,
) -> Result<f64> {
    let at = limit.at(theta)?;
    if at.summary_dim() != s_obs.len() {
        return Err(AbcError::contract("observed summary dimension mismatch"));
    }
    let chol = at
        .a
        .clone()
        .cholesky()
        .ok_or_else(|| AbcError::numerical("summary covariance is not positive definite"))?;
    let r = DVector::from_column_slice(s_obs.as_slice()) - &at.s;
    let quad = r.dot(&chol.solve(&r));
    let nf = n as f64;
    let mut ll = -0.5 * nf * quad;
    if include_log_det {
        let log_det_a: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_det = log_det_a - at.summary_dim() as f64 * nf.ln();
        ll -= 0.5 * log_det;
    }
    Ok(ll)
}

/// Maximum synthetic-likelihood estimate over the prior box.
///
/// Runs Nelder–Mead from `theta_init` and from `opts.restarts` prior draws,
/// and returns the best converged optimum.
pub fn mles(
    limit: &dyn AnalyticLimit,
    prior: &BoxPrior,
    s_obs: &SummaryVector,
    n: usize,
    theta_init: &ParameterVector,
    opts: &MlesOptions,
) -> Result<MlesResult> {
    if !prior.contains(theta_init.as_slice()) {
        return Err(AbcError::contract(format!(
            "initial value {:?} outside the prior box",
            theta_init.as_slice()
        )));
    }
    let objective = |x: &[f64]| {
        let theta = ParameterVector::from_vec_unchecked(x.to_vec());
        match synthetic_log_likelihood(limit, s_obs, n, &theta, opts.include_log_det) {
            Ok(ll) => -ll,
            Err(_) => f64::INFINITY,
        }
    };

    let mut starts = vec![theta_init.as_slice().to_vec()];
    let mut rng = derive_stream(opts.seed, 0);
    for _ in 0..opts.restarts {
        // Only feasible starts; give up on a restart after a bounded number of tries.
        for _ in 0..100 {
            let candidate = prior.sample(&mut rng).into_inner();
            if objective(&candidate).is_finite() {
                starts.push(candidate);
                break;
            }
        }
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut best_any: Option<(Vec<f64>, f64)> = None;
    for start in &starts {
        let r = minimize(objective, start, prior.lower(), prior.upper(), &opts.nelder_mead);
        let better = |slot: &Option<(Vec<f64>, f64)>| slot.as_ref().is_none_or(|(_, v)| r.value < *v);
        if better(&best_any) {
            best_any = Some((r.x.clone(), r.value));
        }
        if r.converged && r.value.is_finite() && better(&best) {
            best = Some((r.x, r.value));
        }
    }
    match best {
        Some((x, v)) => Ok(MlesResult {
            theta: ParameterVector::new(x)?,
            log_likelihood: -v,
        }),
        None => {
            let (x, v) = best_any.expect("at least one start");
            Err(AbcError::NoConvergence { best: x, value: -v })
        }
    }
}

/// Full-data Gaussian MLE `(mean, sd)` with the `1/n` divisor.
pub fn mle_gaussian(data: &[f64]) -> Result<ParameterVector> {
    if data.len() < 2 {
        return Err(AbcError::contract("gaussian MLE needs at least two observations"));
    }
    ParameterVector::new(vec![stats::mean(data), stats::variance(data).sqrt()])
}

/// `(1/n) Dhᵀ I(θ₀)⁻¹ Dh`, the asymptotic variance of an efficient estimator of h(θ).
pub fn asymptotic_variance(info: &InformationMatrix, dh: &[f64], n: usize) -> Result<f64> {
    let p = info.matrix().nrows();
    if dh.len() != p {
        return Err(AbcError::contract("gradient length does not match parameter dimension"));
    }
    let inv = info.inverse()?;
    let g = DVector::from_column_slice(dh);
    Ok(g.dot(&(&inv * &g)) / n as f64)
}
