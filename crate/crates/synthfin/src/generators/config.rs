//! Generator family selection, hyperparameters, and training diagnostics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three generator families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ArimaGarch,
    Vae,
    TimeGan,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::ArimaGarch => "arima_garch",
            Family::Vae => "vae",
            Family::TimeGan => "time_gan",
        };
        f.write_str(s)
    }
}

/// Hyperparameters shared by all families. The statistical family ignores
/// the network sizes but still validates them, so configs stay uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub family: Family,
    /// Length of each training / sampled window.
    #[serde(default = "default_window_length")]
    pub window_length: usize,
    /// Step between consecutive training windows.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub hidden_dim: usize,
    #[serde(default)]
    pub latent_dim: usize,
    #[serde(default)]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
}

fn default_window_length() -> usize {
    20
}

fn default_stride() -> usize {
    1
}

fn default_batch_size() -> usize {
    128
}

fn default_learning_rate() -> f64 {
    0.001
}

impl GeneratorConfig {
    /// ARMA(1,1)+GARCH(1,1); network fields are unused placeholders.
    pub fn arima_garch() -> Self {
        Self {
            family: Family::ArimaGarch,
            window_length: default_window_length(),
            stride: default_stride(),
            hidden_dim: 1,
            latent_dim: 1,
            epochs: 1,
            batch_size: 1,
            learning_rate: default_learning_rate(),
        }
    }

    /// Dense variational autoencoder: hidden 32, latent 16, 150 epochs.
    pub fn vae() -> Self {
        Self {
            family: Family::Vae,
            window_length: default_window_length(),
            stride: default_stride(),
            hidden_dim: 32,
            latent_dim: 16,
            epochs: 150,
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
        }
    }

    /// Adversarial sequence model: hidden 24, noise dim 8, 100 epochs.
    pub fn time_gan() -> Self {
        Self {
            family: Family::TimeGan,
            window_length: default_window_length(),
            stride: default_stride(),
            hidden_dim: 24,
            latent_dim: 8,
            epochs: 100,
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
        }
    }

    /// Family defaults (what the named constructors produce).
    pub fn defaults_for(family: Family) -> Self {
        match family {
            Family::ArimaGarch => Self::arima_garch(),
            Family::Vae => Self::vae(),
            Family::TimeGan => Self::time_gan(),
        }
    }

    /// Replace unset (zero) training fields with the family defaults,
    /// so a config file can name just the family. Zero is invalid for
    /// all of them, so it unambiguously means "unset".
    pub fn or_family_defaults(mut self) -> Self {
        let d = Self::defaults_for(self.family);
        if self.hidden_dim == 0 {
            self.hidden_dim = d.hidden_dim;
        }
        if self.latent_dim == 0 {
            self.latent_dim = d.latent_dim;
        }
        if self.epochs == 0 {
            self.epochs = d.epochs;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length < 2 {
            return Err(Error::Config(format!(
                "window_length must be >= 2, got {}",
                self.window_length
            )));
        }
        if self.stride < 1 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if self.hidden_dim < 1 || self.latent_dim < 1 {
            return Err(Error::Config(format!(
                "hidden_dim/latent_dim must be >= 1, got {}/{}",
                self.hidden_dim, self.latent_dim
            )));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Which stage of training an epoch belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Fit,
    Embedding,
    Supervised,
    Joint,
}

/// Loss values of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub losses: BTreeMap<String, f64>,
}

/// Per-epoch diagnostics collected during a fit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub warnings: Vec<String>,
}

impl TrainingLog {
    pub fn record(&mut self, epoch: usize, phase: Phase, losses: &[(&str, f64)]) {
        self.epochs.push(EpochRecord {
            epoch,
            phase,
            losses: losses
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        });
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// Last recorded value of a named loss, if any epoch produced it.
    pub fn last_loss(&self, name: &str) -> Option<f64> {
        self.epochs
            .iter()
            .rev()
            .find_map(|e| e.losses.get(name).copied())
    }
}
