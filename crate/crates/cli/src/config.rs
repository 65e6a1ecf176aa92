//! Config resolution: preset, then the config file, then command-line flags.
//!
//! A config file is either TOML holding the command's config table or a
//! `manifest.json` written by an earlier run, whose `config` field is used.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use isabc::samplers::{BandwidthRule, IisConfig};
use isabc::KernelFamily;

use crate::CliError;

/// Overlays `patch` onto `base`, recursing into tables.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return match v {
            Value::Object(mut m) if m.contains_key("config") => Ok(m.remove("config").expect("checked")),
            other => Ok(other),
        };
    }
    let t: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::to_value(t).map_err(|e| CliError::Config(e.to_string()))
}

/// Resolves a config of type `T`. Returns it together with whether the file
/// fixed the seed.
pub fn resolve<T>(preset: T, file: Option<&Path>) -> Result<(T, bool), CliError>
where
    T: Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(preset).map_err(|e| CliError::Config(e.to_string()))?;
    let mut seeded = false;
    if let Some(path) = file {
        let patch = read_file(path)?;
        seeded = patch.get("seed").is_some();
        merge(&mut value, patch);
    }
    let cfg = serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    Ok((cfg, seeded))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gaussian,
    Sv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Prior proposal with `bandwidth` and `n_sims`.
    Rejection,
    /// Iterative importance sampling with the `iis` settings.
    Iis,
}

/// One-shot ABC on a single observed summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub model: ModelKind,
    /// Observations per dataset.
    pub n: usize,
    /// Number of quantiles for the Gaussian model.
    pub d: usize,
    /// Observed summary; simulated at `truth` when absent.
    pub s_obs: Option<Vec<f64>>,
    /// Parameter used to simulate the observed data; the model's reference
    /// value when absent.
    pub truth: Option<Vec<f64>>,
    pub sampler: SamplerKind,
    pub bandwidth: BandwidthRule,
    pub n_sims: usize,
    pub iis: IisConfig,
    pub kernel: KernelFamily,
    pub lambda: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Gaussian,
            n: 1000,
            d: 2,
            s_obs: None,
            truth: None,
            sampler: SamplerKind::Rejection,
            bandwidth: BandwidthRule::AcceptanceRate(0.01),
            n_sims: 100_000,
            iis: IisConfig::default(),
            kernel: KernelFamily::Uniform,
            lambda: None,
            seed: 0,
        }
    }
}

/// Reads a summary written as one CSV row, with or without a header row.
pub fn read_summary_row(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        if let Ok(values) = parsed {
            return Ok(values);
        }
    }
    Err(CliError::Config(format!("{} holds no numeric row", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use isabc::experiments::GaussianExperimentConfig;
    use std::io::Write;

    #[test]
    fn file_overrides_preset_and_keeps_the_rest() {
        let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        writeln!(f, "replicates = 7\nd_list = [2]\nseed = 3").unwrap();
        let (cfg, seeded): (GaussianExperimentConfig, bool) =
            resolve(GaussianExperimentConfig::full(), Some(f.path())).unwrap();
        assert!(seeded);
        assert_eq!(cfg.replicates, 7);
        assert_eq!(cfg.d_list, vec![2]);
        assert_eq!(cfg.n, 100_000);
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn nested_tables_merge() {
        let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        writeln!(f, "[iis]\nn_total = 5000").unwrap();
        let (cfg, seeded): (SampleConfig, bool) = resolve(SampleConfig::default(), Some(f.path())).unwrap();
        assert!(!seeded);
        assert_eq!(cfg.iis.n_total, 5000);
        assert_eq!(cfg.iis.n_per_iter, 1000);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        writeln!(f, "replicats = 7").unwrap();
        assert!(resolve(GaussianExperimentConfig::desk(), Some(f.path())).is_err());
    }

    #[test]
    fn manifest_config_field_is_used() {
        let mut f = tempfile::Builder::new().suffix(".json").tempfile().unwrap();
        let mut cfg = GaussianExperimentConfig::desk();
        cfg.replicates = 9;
        let manifest = serde_json::json!({ "command": "run-gaussian", "config": cfg });
        write!(f, "{manifest}").unwrap();
        let (back, seeded): (GaussianExperimentConfig, bool) =
            resolve(GaussianExperimentConfig::full(), Some(f.path())).unwrap();
        assert!(seeded);
        assert_eq!(back, cfg);
    }

    #[test]
    fn summary_row_with_header() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "s_1,s_2\n1.5, 2.5").unwrap();
        assert_eq!(read_summary_row(f.path()).unwrap(), vec![1.5, 2.5]);
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "a,b").unwrap();
        assert!(read_summary_row(g.path()).is_err());
    }
}
