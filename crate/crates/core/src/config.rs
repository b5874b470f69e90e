//! Run configuration: a single JSON document describing the model, the data
//! source, the MCMC schedule, and output paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crm::Hyperparams;
use crate::error::{Error, Result};

fn default_beta() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_thin() -> u64 {
    1
}
fn default_chains() -> u64 {
    1
}
fn default_sigma0_max() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kappa: f64,
    pub sigma0: f64,
    pub tau: f64,
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_true")]
    pub fix_beta: bool,
}

impl ModelConfig {
    pub fn hyperparams(&self) -> Result<Hyperparams> {
        Hyperparams::new(self.kappa, self.sigma0, self.tau, self.alpha, self.beta)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub n: usize,
    pub directed: bool,
    pub weighted: bool,
    #[serde(default)]
    pub mask_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub iterations: u64,
    pub burn_in: u64,
    #[serde(default = "default_thin")]
    pub thin: u64,
    #[serde(default = "default_chains")]
    pub chains: u64,
    pub seed: u64,
    #[serde(default = "default_sigma0_max")]
    pub sigma0_max: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    #[serde(default)]
    pub summary_path: Option<PathBuf>,
    #[serde(default)]
    pub samples_path: Option<PathBuf>,
    #[serde(default)]
    pub edge_list_path: Option<PathBuf>,
    #[serde(default)]
    pub ground_truth_path: Option<PathBuf>,
    #[serde(default)]
    pub predictions_path: Option<PathBuf>,
    #[serde(default)]
    pub report_path: Option<PathBuf>,
    /// keep only the top-k affiliation entries per community in the sample
    /// archive; full vectors when absent
    #[serde(default)]
    pub sparse_top_k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsConfig {
    pub n_grid: Vec<u64>,
    pub replicates: u64,
    #[serde(default)]
    pub j_max: Option<u64>,
    #[serde(default)]
    pub experiment: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub data: Option<DataConfig>,
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub asymptotics: Option<AsymptoticsConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.hyperparams()?;
        if self.mcmc.thin == 0 {
            return Err(Error::Config("mcmc.thin must be >= 1".into()));
        }
        if self.mcmc.chains == 0 {
            return Err(Error::Config("mcmc.chains must be >= 1".into()));
        }
        if self.mcmc.sigma0_max != 0.5 && self.mcmc.sigma0_max != 0.25 {
            return Err(Error::Config(
                "mcmc.sigma0_max must be 0.5 or 0.25".into(),
            ));
        }
        if self.model.sigma0 >= self.mcmc.sigma0_max {
            return Err(Error::Config(format!(
                "model.sigma0 = {} must lie below mcmc.sigma0_max = {}",
                self.model.sigma0, self.mcmc.sigma0_max
            )));
        }
        if let Some(data) = &self.data {
            if data.n == 0 {
                return Err(Error::Config("data.n must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"kappa": 1.0, "sigma0": 0.2, "tau": 0.15, "alpha": 0.05},
        "mcmc": {"iterations": 100, "burn_in": 10, "seed": 7}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.model.beta, 1.0);
        assert!(cfg.model.fix_beta);
        assert_eq!(cfg.mcmc.thin, 1);
        assert_eq!(cfg.mcmc.chains, 1);
        assert_eq!(cfg.mcmc.sigma0_max, 0.5);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = MINIMAL.replace("\"seed\": 7", "\"seed\": 7, \"bogus\": 1");
        assert!(serde_json::from_str::<RunConfig>(&bad).is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        cfg.mcmc.sigma0_max = 0.3;
        assert!(cfg.validate().is_err());
        let mut cfg: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        cfg.model.sigma0 = 0.6;
        assert!(cfg.validate().is_err());
        let mut cfg: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        cfg.mcmc.thin = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sigma0_below_quarter_cap_accepted() {
        let mut cfg: RunConfig = serde_json::from_str(MINIMAL).unwrap();
        cfg.mcmc.sigma0_max = 0.25;
        cfg.model.sigma0 = 0.2;
        cfg.validate().unwrap();
    }
}
