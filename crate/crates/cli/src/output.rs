//! CSV tables and the run manifest.

use std::fs::File;
use std::path::Path;

use serde::Serialize;

use isabc::diagnostics::EstimatorReport;
use isabc::experiments::{DecayTable, GaussianTable, SvTable};
use isabc::samplers::BandwidthRule;
use isabc::PosteriorSample;

use crate::CliError;

/// Fixed 17-significant-digit scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<File>, CliError> {
    let path = dir.join(name);
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(|e| CliError::Run(format!("cannot create {}: {e}", path.display())))
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Run(format!("writing output: {e}"))
}

fn bandwidth_label(b: &Option<BandwidthRule>) -> String {
    match b {
        None => String::new(),
        Some(BandwidthRule::AcceptanceRate(p)) => format!("rate:{}", num(*p)),
        Some(BandwidthRule::Fixed(e)) => format!("eps:{}", num(*e)),
    }
}

fn snake<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => unreachable!("unit enum variants serialize as strings"),
    }
}

pub fn write_gaussian(dir: &Path, table: &GaussianTable) -> Result<(), CliError> {
    let mut w = writer(dir, "gaussian_mse.csv")?;
    w.write_record([
        "method",
        "d",
        "summary_variant",
        "eps_or_rate",
        "coord",
        "mse",
        "mse_times_n",
        "replicates",
        "seed",
    ])
    .map_err(io)?;
    for r in &table.rows {
        w.write_record([
            snake(&r.method),
            r.d.to_string(),
            snake(&r.variant),
            bandwidth_label(&r.bandwidth),
            r.coord.to_string(),
            num(r.mse),
            num(r.mse_times_n),
            r.replicates.to_string(),
            table.seed.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_sv(dir: &Path, table: &SvTable) -> Result<(), CliError> {
    let mut w = writer(dir, "sv_mse.csv")?;
    w.write_record(["method", "n", "coord", "mse", "mse_times_n", "ratio_vs_rabc", "replicates", "seed"])
        .map_err(io)?;
    for r in &table.rows {
        w.write_record([
            r.method.name().to_string(),
            r.n.to_string(),
            r.coord.to_string(),
            num(r.mse),
            num(r.mse_times_n),
            r.ratio_vs_rabc.map(num).unwrap_or_default(),
            r.replicates.to_string(),
            table.seed.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_decay(dir: &Path, table: &DecayTable) -> Result<(), CliError> {
    let mut w = writer(dir, "decay.csv")?;
    w.write_record(["proposal", "n", "p_acc_hat", "ess", "eps"]).map_err(io)?;
    for r in &table.rows {
        w.write_record([
            r.proposal.name().to_string(),
            r.n.to_string(),
            num(r.p_acc_hat),
            num(r.ess),
            num(r.eps),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_particles(dir: &Path, sample: &PosteriorSample) -> Result<(), CliError> {
    let mut w = writer(dir, "particles.csv")?;
    let p = sample.param_dim();
    let mut header: Vec<String> = (1..=p).map(|j| format!("theta_{j}")).collect();
    header.extend(["weight".to_string(), "distance".to_string()]);
    w.write_record(&header).map_err(io)?;
    for particle in &sample.particles {
        let mut row: Vec<String> = particle.theta.iter().map(|v| num(*v)).collect();
        row.push(num(particle.weight));
        row.push(num(particle.distance));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One row per parameter coordinate; run-level fields repeat on every row.
pub fn write_report(dir: &Path, report: &EstimatorReport, bandwidth: f64) -> Result<(), CliError> {
    let mut w = writer(dir, "report.csv")?;
    w.write_record([
        "coord",
        "h_hat",
        "sigma_is_hat",
        "mcv_hat",
        "ess",
        "n_acc",
        "p_acc_hat",
        "bandwidth",
    ])
    .map_err(io)?;
    for j in 0..report.h_hat.len() {
        w.write_record([
            (j + 1).to_string(),
            num(report.h_hat[j]),
            num(report.sigma_is_hat[j]),
            num(report.mcv_hat[j]),
            num(report.ess),
            report.n_acc.to_string(),
            num(report.p_acc_hat),
            num(bandwidth),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize, R: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub workers: Option<usize>,
    pub wall_time_secs: f64,
    pub config: &'a C,
    /// Scalars derived from the run that have no CSV of their own.
    pub results: R,
}

pub fn write_manifest<C: Serialize, R: Serialize>(dir: &Path, m: &Manifest<'_, C, R>) -> Result<(), CliError> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(m).map_err(io)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))
}
