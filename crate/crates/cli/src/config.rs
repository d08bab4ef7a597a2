//! Run configuration: TOML file, command-line overrides, resolved snapshot.

use std::path::{Path, PathBuf};

use anyhow::Context;
use bgfe::dp_prior::DpHyper;
use bgfe::gibbs::ChainSettings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub panel: Option<PathBuf>,
    pub constraints: Option<PathBuf>,
    /// Constraint strength; ignored when `c_grid` is set.
    pub c: f64,
    pub c_grid: Option<Vec<f64>>,
    /// Append the lag of y to the `x` or `z` block.
    pub make_lag: Option<String>,
    pub model: ModelSection,
    pub prior: PriorSection,
    pub chain: ChainSection,
    pub forecast: ForecastSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            panel: None,
            constraints: None,
            c: 0.5,
            c_grid: None,
            make_lag: None,
            model: ModelSection::default(),
            prior: PriorSection::default(),
            chain: ChainSection::default(),
            forecast: ForecastSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Names of x-columns with common rather than group-specific coefficients.
    pub common_x: Vec<String>,
    pub heteroskedastic: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            common_x: Vec::new(),
            heteroskedastic: true,
        }
    }
}

/// Unset entries fall back to the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub a: Option<f64>,
    pub m: Option<f64>,
    pub n: Option<f64>,
    pub update_a: Option<bool>,
    pub mu_alpha: Option<Vec<f64>>,
    /// Row-major covariance.
    pub sigma_alpha: Option<Vec<f64>>,
    pub nu_sigma: Option<f64>,
    pub delta_sigma: Option<f64>,
    pub gamma_var: Option<f64>,
}

impl PriorSection {
    pub fn hyper(&self, p: usize) -> DpHyper {
        let mut h = DpHyper::default_for(p);
        if let Some(v) = self.a {
            h.a = v;
        }
        if let Some(v) = self.m {
            h.m = v;
        }
        if let Some(v) = self.n {
            h.n = v;
        }
        if let Some(v) = self.update_a {
            h.update_a = v;
        }
        if let Some(v) = &self.mu_alpha {
            h.mu_alpha = v.clone();
        }
        if let Some(v) = &self.sigma_alpha {
            h.sigma_alpha = v.clone();
        }
        if let Some(v) = self.nu_sigma {
            h.nu_sigma = v;
        }
        if let Some(v) = self.delta_sigma {
            h.delta_sigma = v;
        }
        if let Some(v) = self.gamma_var {
            h.gamma_var = v;
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub burn: usize,
    pub keep: usize,
    pub thin: usize,
}

impl Default for ChainSection {
    fn default() -> Self {
        let d = ChainSettings::default();
        Self {
            burn: d.n_burn,
            keep: d.n_keep,
            thin: d.thin,
        }
    }
}

impl ChainSection {
    pub fn settings(&self) -> ChainSettings {
        ChainSettings {
            n_burn: self.burn,
            n_keep: self.keep,
            thin: self.thin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    /// Trailing periods held out of estimation and forecast.
    pub holdout: usize,
    pub alpha: f64,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            holdout: 0,
            alpha: 0.05,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).map_err(|e| crate::UsageError(format!("config {}: {e}", p.display())).into())
            }
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the resolved TOML.
    pub fn hash(&self) -> anyhow::Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Writes `config.toml` into `dir` and returns the hash.
    pub fn snapshot(&self, dir: &Path) -> anyhow::Result<String> {
        std::fs::write(dir.join("config.toml"), self.to_toml()?)?;
        self.hash()
    }
}
