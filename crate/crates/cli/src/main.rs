//! `isabc`: runs the ABC experiment harnesses and one-shot samplers, writing
//! CSV tables and a `manifest.json` that reproduces the run.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use isabc::diagnostics::report;
use isabc::experiments::{
    run_acceptance_decay, run_gaussian_experiment, run_sv_experiment, DecayConfig, GaussianExperimentConfig,
    SvExperimentConfig,
};
use isabc::models::{equally_spaced_alphas, GaussianQuantileModel, Model, SvModel};
use isabc::samplers::{iis_abc, rejection_abc, AbcProblem};
use isabc::{derive_seed, derive_stream, AbcError, Kernel, ParameterVector, SummaryVector};

use config::{read_summary_row, resolve, ModelKind, SampleConfig, SamplerKind};
use output::Manifest;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or output directory; exit code 2.
    Config(String),
    /// The run itself failed; exit code 1.
    Run(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
        }
    }
}

fn bad_config(e: AbcError) -> CliError {
    CliError::Config(e.to_string())
}

fn failed(e: AbcError) -> CliError {
    CliError::Run(e.to_string())
}

#[derive(Parser)]
#[command(name = "isabc", version, about = "Likelihood-free inference by importance-sampling ABC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Master seed; drawn from entropy when neither this nor the config sets one.
    #[arg(long)]
    seed: Option<u64>,
    /// Size of the worker pool.
    #[arg(long)]
    workers: Option<usize>,
    /// Reduced-scale preset (the default).
    #[arg(long, conflicts_with = "full")]
    desk: bool,
    /// Full-scale preset.
    #[arg(long)]
    full: bool,
    /// Number of replicated datasets.
    #[arg(long)]
    replicates: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Gaussian quantile experiment; writes gaussian_mse.csv.
    RunGaussian(Common),
    /// Stochastic-volatility experiment; writes sv_mse.csv.
    RunSv(Common),
    /// One ABC run on one observed summary; writes particles.csv and report.csv.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Option<ModelKind>,
        /// CSV file holding the observed summary as one row.
        #[arg(long)]
        s_obs: Option<PathBuf>,
        /// Comma-separated parameter at which to simulate the observed data.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        truth: Option<Vec<f64>>,
    },
    /// Acceptance probability against data size; writes decay.csv.
    Decay(Common),
}

fn pick_seed(flag: Option<u64>, file_seeded: bool, current: u64) -> u64 {
    match flag {
        Some(s) => s,
        None if file_seeded => current,
        None => rand::random(),
    }
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--workers must be positive".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Run(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn no_replicates(c: &Common, command: &str) -> Result<(), CliError> {
    if c.replicates.is_some() {
        return Err(CliError::Config(format!("--replicates does not apply to {command}")));
    }
    Ok(())
}

fn run_gaussian(c: &Common) -> Result<(), CliError> {
    let preset = if c.full {
        GaussianExperimentConfig::full()
    } else {
        GaussianExperimentConfig::desk()
    };
    let (mut cfg, seeded) = resolve(preset, c.config.as_deref())?;
    cfg.seed = pick_seed(c.seed, seeded, cfg.seed);
    if let Some(r) = c.replicates {
        cfg.replicates = r;
    }
    cfg.validate().map_err(bad_config)?;
    prepare_out(&c.out)?;
    let start = Instant::now();
    let table = with_workers(c.workers, || run_gaussian_experiment(&cfg))?.map_err(failed)?;
    output::write_gaussian(&c.out, &table)?;
    output::write_manifest(
        &c.out,
        &Manifest {
            command: "run-gaussian",
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            workers: c.workers,
            wall_time_secs: start.elapsed().as_secs_f64(),
            config: &cfg,
            results: serde_json::Value::Null,
        },
    )
}

fn run_sv(c: &Common) -> Result<(), CliError> {
    let preset = if c.full {
        SvExperimentConfig::full()
    } else {
        SvExperimentConfig::desk()
    };
    let (mut cfg, seeded) = resolve(preset, c.config.as_deref())?;
    cfg.seed = pick_seed(c.seed, seeded, cfg.seed);
    if let Some(r) = c.replicates {
        cfg.replicates = r;
    }
    cfg.validate().map_err(bad_config)?;
    prepare_out(&c.out)?;
    let start = Instant::now();
    let table = with_workers(c.workers, || run_sv_experiment(&cfg))?.map_err(failed)?;
    output::write_sv(&c.out, &table)?;
    output::write_manifest(
        &c.out,
        &Manifest {
            command: "run-sv",
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            workers: c.workers,
            wall_time_secs: start.elapsed().as_secs_f64(),
            config: &cfg,
            results: serde_json::Value::Null,
        },
    )
}

fn run_decay(c: &Common) -> Result<(), CliError> {
    no_replicates(c, "decay")?;
    let (mut cfg, seeded) = resolve(DecayConfig::default(), c.config.as_deref())?;
    cfg.seed = pick_seed(c.seed, seeded, cfg.seed);
    cfg.validate().map_err(bad_config)?;
    prepare_out(&c.out)?;
    let start = Instant::now();
    let table = with_workers(c.workers, || run_acceptance_decay(&cfg))?.map_err(failed)?;
    output::write_decay(&c.out, &table)?;
    output::write_manifest(
        &c.out,
        &Manifest {
            command: "decay",
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            workers: c.workers,
            wall_time_secs: start.elapsed().as_secs_f64(),
            config: &cfg,
            results: json!({ "prior_slope": table.prior_slope, "iis_slope": table.iis_slope }),
        },
    )
}

fn build_model(cfg: &SampleConfig) -> Result<(Box<dyn Model>, ParameterVector), AbcError> {
    match cfg.model {
        ModelKind::Gaussian => {
            let m = GaussianQuantileModel::new(
                equally_spaced_alphas(cfg.d),
                cfg.n,
                GaussianQuantileModel::default_prior(),
            )?;
            let truth = cfg.truth.clone().unwrap_or(vec![1.0, std::f64::consts::SQRT_2]);
            Ok((Box::new(m), ParameterVector::new(truth)?))
        }
        ModelKind::Sv => {
            let m = SvModel::new(cfg.n, SvModel::default_prior())?;
            let truth = match &cfg.truth {
                Some(t) => ParameterVector::new(t.clone())?,
                None => SvModel::true_parameter(),
            };
            Ok((Box::new(m), truth))
        }
    }
}

fn run_sample(c: &Common, model: Option<ModelKind>, s_obs: Option<&Path>, truth: Option<Vec<f64>>) -> Result<(), CliError> {
    no_replicates(c, "sample")?;
    let (mut cfg, seeded) = resolve(SampleConfig::default(), c.config.as_deref())?;
    cfg.seed = pick_seed(c.seed, seeded, cfg.seed);
    if let Some(m) = model {
        cfg.model = m;
    }
    if let Some(path) = s_obs {
        cfg.s_obs = Some(read_summary_row(path)?);
    }
    if truth.is_some() {
        cfg.truth = truth;
    }

    let (model, truth) = build_model(&cfg).map_err(bad_config)?;
    if truth.len() != model.param_dim() || !model.prior().contains(truth.as_slice()) {
        return Err(CliError::Config(format!("truth {:?} is outside the prior box", truth.as_slice())));
    }
    let kernel = match &cfg.lambda {
        Some(l) => Kernel::new(cfg.kernel, l.clone()),
        None => Kernel::identity(cfg.kernel, model.summary_dim()),
    }
    .map_err(bad_config)?;
    match cfg.sampler {
        SamplerKind::Rejection => {
            cfg.bandwidth.validate().map_err(bad_config)?;
            if cfg.n_sims == 0 {
                return Err(CliError::Config("n_sims must be positive".into()));
            }
        }
        SamplerKind::Iis => cfg.iis.validate().map_err(bad_config)?,
    }
    // An explicit summary fixes the data; the truth is then only recorded.
    let s_obs = match &cfg.s_obs {
        Some(s) => SummaryVector::new(s.clone()).map_err(bad_config)?,
        None => {
            let mut rng = derive_stream(derive_seed(cfg.seed, &[0]), 0);
            let data = model.simulate_data(&truth, &mut rng).map_err(bad_config)?;
            model.summarize(&data).map_err(failed)?
        }
    };
    let problem = AbcProblem::new(model.as_ref(), &s_obs, &kernel).map_err(bad_config)?;
    prepare_out(&c.out)?;

    let start = Instant::now();
    let (sample, trace) = with_workers(c.workers, || match cfg.sampler {
        SamplerKind::Rejection => {
            rejection_abc(&problem, cfg.bandwidth, cfg.n_sims, derive_seed(cfg.seed, &[1])).map(|s| (s, None))
        }
        SamplerKind::Iis => iis_abc(&problem, &cfg.iis, derive_seed(cfg.seed, &[2])).map(|(s, t)| (s, Some(t))),
    })?
    .map_err(failed)?;
    let rep = report(&sample).map_err(failed)?;
    output::write_particles(&c.out, &sample)?;
    output::write_report(&c.out, &rep, sample.bandwidth)?;
    output::write_manifest(
        &c.out,
        &Manifest {
            command: "sample",
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            workers: c.workers,
            wall_time_secs: start.elapsed().as_secs_f64(),
            config: &cfg,
            results: json!({
                "s_obs": s_obs.as_slice(),
                "bandwidth": sample.bandwidth,
                "n_proposed": sample.n_proposed,
                "n_accepted": sample.n_accepted(),
                "iis_trace": trace,
            }),
        },
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::RunGaussian(c) => run_gaussian(c),
        Command::RunSv(c) => run_sv(c),
        Command::Decay(c) => run_decay(c),
        Command::Sample {
            common,
            model,
            s_obs,
            truth,
        } => run_sample(common, *model, s_obs.as_deref(), truth.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("isabc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
