//! Pipeline configuration: one JSON file with defaults for every stage, so
//! commands can run bare or with selective overrides.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use throughcast::hmm::{EvalProtocol, TrainOptions};
use throughcast::sim::SimulationConfig;

/// Settings shared across subcommands. Every field has a default; a config
/// file only needs the fields it overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Sampling period of the trace CSV rows.
    pub epoch_seconds: u32,
    /// Sessions must be strictly longer than this many epochs to be kept.
    pub min_epochs: usize,
    /// Largest autocorrelation lag reported per session.
    pub max_autocorr_lag: usize,
    /// Width of the mean-throughput bins in the stability summary.
    pub bin_width_kbps: f64,
    /// Fraction of sessions assigned to the training side of the split.
    pub split_fraction: f64,
    /// State count used when fitting a state model directly.
    pub num_states: usize,
    /// State counts tried by the model-size sweep.
    pub sweep_states: Vec<usize>,
    /// Autoregressive order for fitted linear models.
    pub ar_order: usize,
    /// Moving-average order for fitted linear models.
    pub ma_order: usize,
    pub train: TrainOptions,
    pub eval: EvalProtocol,
    pub sim: SimulationConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            epoch_seconds: 60,
            min_epochs: 6,
            max_autocorr_lag: 4,
            bin_width_kbps: 800.0,
            split_fraction: 0.5,
            num_states: 4,
            sweep_states: vec![1, 2, 3, 4, 6, 8],
            ar_order: 5,
            ma_order: 1,
            train: TrainOptions::default(),
            eval: EvalProtocol::default(),
            sim: SimulationConfig::default(),
        }
    }
}

impl AppConfig {
    /// Loads the config file if given, otherwise the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                let config: Self = serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?;
                config.validate()?;
                Ok(config)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        anyhow::ensure!(self.epoch_seconds > 0, "epoch_seconds must be positive");
        anyhow::ensure!(
            self.split_fraction > 0.0 && self.split_fraction < 1.0,
            "split_fraction must be strictly between 0 and 1"
        );
        anyhow::ensure!(
            self.min_epochs >= self.max_autocorr_lag,
            "min_epochs must be at least max_autocorr_lag so kept sessions support every lag"
        );
        anyhow::ensure!(self.ar_order >= 1, "ar_order must be at least 1");
        anyhow::ensure!(self.ma_order >= 1, "ma_order must be at least 1");
        anyhow::ensure!(self.num_states >= 1, "num_states must be at least 1");
        anyhow::ensure!(!self.sweep_states.is_empty(), "sweep_states must not be empty");
        Ok(())
    }
}
