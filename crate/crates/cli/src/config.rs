//! Run configuration: defaults, optional TOML file, then flags.
//!
//! Precedence is defaults < config file < command-line flags; the resolved
//! seed additionally falls back to the `NDIF_SEED` environment variable when
//! neither a flag nor the file supplies one. Each command echoes the
//! effective configuration next to its outputs for reproducibility.

use ndif_core::checkpoint::ScheduleSpec;
use ndif_core::data::SyntheticConfig;
use ndif_core::inpaint::ForecastConfig;
use ndif_core::train::TrainConfig;
use ndif_core::unet::UNetConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SEED_ENV: &str = "NDIF_SEED";

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    /// Run seed; resolution order: flag, this field, `NDIF_SEED`, then 0.
    pub seed: Option<u64>,
    pub data: DataSection,
    pub unet: UNetConfig,
    pub schedule: ScheduleSpec,
    pub forecast: ForecastSection,
    pub train: TrainSection,
}

/// Synthetic-generator knobs (seed handled at the run level).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DataSection {
    pub n_events: usize,
    pub cdm_rate_per_day: f64,
    pub sigma7_range_m: (f64, f64),
    pub sigma0_range_m: (f64, f64),
    pub jitter_std: f64,
    pub jump_probability: f64,
    pub jump_factor_range: (f64, f64),
    pub fractions: (f64, f64, f64),
}

impl Default for DataSection {
    fn default() -> Self {
        let base = SyntheticConfig::default();
        DataSection {
            n_events: base.n_events,
            cdm_rate_per_day: base.cdm_rate_per_day,
            sigma7_range_m: base.sigma7_range_m,
            sigma0_range_m: base.sigma0_range_m,
            jitter_std: base.jitter_std,
            jump_probability: base.jump_probability,
            jump_factor_range: base.jump_factor_range,
            fractions: (0.8, 0.1, 0.1),
        }
    }
}

impl DataSection {
    pub fn synthetic_config(&self, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            n_events: self.n_events,
            cdm_rate_per_day: self.cdm_rate_per_day,
            sigma7_range_m: self.sigma7_range_m,
            sigma0_range_m: self.sigma0_range_m,
            jitter_std: self.jitter_std,
            jump_probability: self.jump_probability,
            jump_factor_range: self.jump_factor_range,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ForecastSection {
    pub num_samples: usize,
    pub resample_count: usize,
    pub jump_length: usize,
    pub point_estimate: ndif_core::inpaint::PointEstimate,
}

impl Default for ForecastSection {
    fn default() -> Self {
        let base = ForecastConfig::default();
        ForecastSection {
            num_samples: base.num_samples,
            resample_count: base.resample_count,
            jump_length: base.jump_length,
            point_estimate: base.point_estimate,
        }
    }
}

impl ForecastSection {
    pub fn forecast_config(&self, seed: u64) -> ForecastConfig {
        ForecastConfig {
            num_samples: self.num_samples,
            resample_count: self.resample_count,
            jump_length: self.jump_length,
            point_estimate: self.point_estimate,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let base = TrainConfig::default();
        TrainSection {
            epochs: base.epochs,
            batch_size: base.batch_size,
            learning_rate: base.learning_rate,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with a config file, when given.
    pub fn load(config_path: Option<&Path>) -> Result<Self, String> {
        match config_path {
            None => Ok(RunConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
        }
    }

    /// Flag beats file beats environment beats zero.
    pub fn resolve_seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed)
            .or_else(|| std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok()))
            .unwrap_or(0)
    }

    /// Persist the effective configuration (with the resolved seed).
    pub fn echo(&self, seed: u64, path: &Path) -> std::io::Result<()> {
        let mut effective = self.clone();
        effective.seed = Some(seed);
        let text = toml::to_string_pretty(&effective).expect("config serializes");
        std::fs::write(path, text)
    }
}
