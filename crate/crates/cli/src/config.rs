use anyhow::{Context, Result};
use beb_core::analysis::SweepConfig;
use beb_core::{Settings, SystemParams};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub duration: f64,
    pub sample_dt: f64,
    pub force_rk: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { duration: 500.0, sample_dt: 0.05, force_rk: false }
    }
}

/// Everything that affects the numbers a command writes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub params: SystemParams,
    pub settings: Settings,
    pub sweep: SweepConfig,
    pub simulate: SimulateConfig,
}

impl Config {
    /// Reads a TOML file, or the `config` object of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: Config = if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Manifest {
                config: Config,
            }
            serde_json::from_str::<Manifest>(&text).with_context(|| format!("invalid manifest {}", path.display()))?.config
        } else {
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))?
        };
        cfg.params.validate()?;
        Ok(cfg)
    }
}
