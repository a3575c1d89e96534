//! Synthetic return-window generators behind one uniform interface.
//!
//! Three families: an ARIMA-GARCH statistical baseline, a dense
//! variational autoencoder, and a desk-scale TimeGAN. Each fits on a
//! raw [`ReturnSeries`] (standardizing internally) and samples
//! [`SyntheticDataset`]s of standardized windows that destandardize
//! back to return units. (data, config, seed) fully determine both the
//! fitted model and its samples.

pub mod arima_garch;
pub mod config;
pub mod dataset;
pub mod timegan;
pub mod vae;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use arima_garch::ArimaGarchModel;
pub use config::{Family, GeneratorConfig, Phase, TrainingLog};
pub use dataset::SyntheticDataset;
pub use timegan::TimeganModel;
pub use vae::VaeModel;

use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;

/// A fitted generator of any family. Serialized with a `family` tag so
/// a saved model file reloads into the right variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorModel {
    ArimaGarch(ArimaGarchModel),
    Vae(VaeModel),
    TimeGan(TimeganModel),
}

impl GeneratorModel {
    /// Fit the family named by the config. The seed drives neural
    /// initialization, shuffling, and noise; the ARIMA-GARCH fit is
    /// deterministic from the data alone and ignores it.
    pub fn fit(
        returns: &ReturnSeries,
        config: &GeneratorConfig,
        seed: u64,
    ) -> Result<(Self, TrainingLog)> {
        match config.family {
            Family::ArimaGarch => {
                let (m, log) = ArimaGarchModel::fit(returns, config)?;
                Ok((Self::ArimaGarch(m), log))
            }
            Family::Vae => {
                let (m, log) = VaeModel::fit(returns, config, seed)?;
                Ok((Self::Vae(m), log))
            }
            Family::TimeGan => {
                let (m, log) = TimeganModel::fit(returns, config, seed)?;
                Ok((Self::TimeGan(m), log))
            }
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::ArimaGarch(_) => Family::ArimaGarch,
            Self::Vae(_) => Family::Vae,
            Self::TimeGan(_) => Family::TimeGan,
        }
    }

    pub fn assets(&self) -> &[String] {
        match self {
            Self::ArimaGarch(m) => &m.assets,
            Self::Vae(m) => &m.assets,
            Self::TimeGan(m) => &m.assets,
        }
    }

    pub fn window_length(&self) -> usize {
        match self {
            Self::ArimaGarch(m) => m.window_length,
            Self::Vae(m) => m.window_length,
            Self::TimeGan(m) => m.window_length,
        }
    }

    /// Draw `n_windows` synthetic windows; deterministic per seed.
    pub fn sample(&self, n_windows: usize, seed: u64) -> Result<SyntheticDataset> {
        match self {
            Self::ArimaGarch(m) => m.sample(n_windows, seed),
            Self::Vae(m) => m.sample(n_windows, seed),
            Self::TimeGan(m) => m.sample(n_windows, seed),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = self.to_json()?;
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&body)
    }
}
