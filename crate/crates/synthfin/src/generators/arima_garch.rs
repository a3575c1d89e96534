//! Statistical baseline generator: ARMA(1,1) mean dynamics with
//! GARCH(1,1) conditional variance, fitted per asset on standardized
//! returns.
//!
//! The mean equation is estimated by conditional least squares (innovation
//! recursion started at zero), the variance equation by Gaussian QMLE on
//! the mean-equation residuals. Sampling runs the joint recursion with a
//! burn-in per window so every window starts from the stationary regime.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::config::{Family, GeneratorConfig, Phase, TrainingLog};
use crate::generators::dataset::SyntheticDataset;
use crate::market_data::{standardize, ReturnSeries, StandardizationParams};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::risk::{fit_garch, GarchParams};

/// Steps discarded at the start of every sampled window.
pub const SAMPLE_BURN_IN: usize = 500;

/// ARMA(1,1): `x[t] = c + phi x[t-1] + u[t] + theta u[t-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmaParams {
    pub c: f64,
    pub phi: f64,
    pub theta: f64,
}

impl ArmaParams {
    pub fn new(c: f64, phi: f64, theta: f64) -> Result<Self> {
        if !(c.is_finite() && phi.is_finite() && theta.is_finite()) {
            return Err(Error::Domain("non-finite ARMA parameter".into()));
        }
        if phi.abs() >= 1.0 {
            return Err(Error::Domain(format!(
                "|phi| must be < 1 for stationarity, got {phi}"
            )));
        }
        if theta.abs() >= 1.0 {
            return Err(Error::Domain(format!(
                "|theta| must be < 1 for invertibility, got {theta}"
            )));
        }
        Ok(Self { c, phi, theta })
    }

    /// Stationary mean `c / (1 - phi)` (zero-mean innovations).
    pub fn unconditional_mean(&self) -> f64 {
        self.c / (1.0 - self.phi)
    }
}

/// Innovations recovered by the conditional recursion, `u[0] = 0`.
///
/// Returns `u[1..n]`: the first observation has no lag and only anchors
/// the recursion.
pub fn arma_residuals(values: &[f64], params: &ArmaParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len().saturating_sub(1));
    let mut u_prev = 0.0;
    for t in 1..values.len() {
        let u = values[t] - params.c - params.phi * values[t - 1] - params.theta * u_prev;
        out.push(u);
        u_prev = u;
    }
    out
}

/// Fit ARMA(1,1) by conditional least squares.
///
/// Minimizes the sum of squared recursion innovations over (c, phi,
/// theta), with phi and theta kept inside the unit interval through a tanh
/// reparameterization.
pub fn fit_arma(values: &[f64]) -> Result<(ArmaParams, f64)> {
    if values.len() < 20 {
        return Err(Error::InsufficientData {
            needed: 20,
            got: values.len(),
        });
    }
    let decode = |x: &[f64]| ArmaParams {
        c: x[0],
        phi: x[1].tanh(),
        theta: x[2].tanh(),
    };
    let objective = |x: &[f64]| -> f64 {
        let p = decode(x);
        arma_residuals(values, &p).iter().map(|u| u * u).sum()
    };
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let opts = NelderMeadOptions {
        max_iter: 3000,
        tol: 1e-12,
        initial_step: 0.2,
    };
    let min = nelder_mead(objective, &[mean, 0.0, 0.0], &opts)?;
    let p = decode(&min.x);
    Ok((ArmaParams::new(p.c, p.phi, p.theta)?, min.value))
}

/// Fitted dynamics of one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetDynamics {
    pub arma: ArmaParams,
    pub garch: GarchParams,
    /// Conditional least-squares objective at the ARMA optimum.
    pub cls_objective: f64,
    /// Gaussian log-likelihood at the GARCH optimum.
    pub garch_log_likelihood: f64,
}

/// ARMA(1,1)+GARCH(1,1) generator, one independent model per asset.
///
/// Cross-asset dependence is not modeled; each asset's windows are drawn
/// from its own recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaGarchModel {
    pub assets: Vec<String>,
    pub window_length: usize,
    pub per_asset: Vec<AssetDynamics>,
    pub standardization: StandardizationParams,
}

impl ArimaGarchModel {
    /// Fit on raw returns; standardization happens internally and its
    /// parameters ride along for destandardizing samples.
    pub fn fit(returns: &ReturnSeries, config: &GeneratorConfig) -> Result<(Self, TrainingLog)> {
        config.validate()?;
        if config.family != Family::ArimaGarch {
            return Err(Error::Config(format!(
                "config family {} given to the arima_garch fitter",
                config.family
            )));
        }
        if returns.len() < 250 {
            return Err(Error::InsufficientData {
                needed: 250,
                got: returns.len(),
            });
        }
        let (std_series, params) = standardize(returns)?;
        let mut log = TrainingLog::default();
        let mut per_asset = Vec::with_capacity(returns.n_assets());
        for (idx, col) in std_series.values.iter().enumerate() {
            let (arma, cls) = fit_arma(col)?;
            let residuals = arma_residuals(col, &arma);
            let gfit = fit_garch(&residuals)?;
            log.record(
                idx,
                Phase::Fit,
                &[
                    ("cls_objective", cls),
                    ("garch_log_likelihood", gfit.log_likelihood),
                    ("phi", arma.phi),
                    ("theta", arma.theta),
                    ("persistence", gfit.params.alpha + gfit.params.beta),
                ],
            );
            per_asset.push(AssetDynamics {
                arma,
                garch: gfit.params,
                cls_objective: cls,
                garch_log_likelihood: gfit.log_likelihood,
            });
        }
        Ok((
            Self {
                assets: returns.assets.clone(),
                window_length: config.window_length,
                per_asset,
                standardization: params,
            },
            log,
        ))
    }

    /// One window of one asset: burn in the joint recursion, keep the tail.
    fn sample_track(&self, asset: usize, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let dyn_ = &self.per_asset[asset];
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let t_len = self.window_length;
        let mut sigma2 = dyn_.garch.unconditional_variance();
        let mut e_prev = 0.0;
        let mut u_prev = 0.0;
        let mut x_prev = dyn_.arma.unconditional_mean();
        out.clear();
        for step in 0..SAMPLE_BURN_IN + t_len {
            if step > 0 {
                sigma2 = dyn_.garch.omega
                    + dyn_.garch.alpha * e_prev * e_prev
                    + dyn_.garch.beta * sigma2;
            }
            let e = sigma2.sqrt() * normal.sample(rng);
            let u = dyn_.garch.mu + e;
            let x = dyn_.arma.c + dyn_.arma.phi * x_prev + u + dyn_.arma.theta * u_prev;
            e_prev = e;
            u_prev = u;
            x_prev = x;
            if step >= SAMPLE_BURN_IN {
                out.push(x);
            }
        }
    }

    /// Draw `n_windows` independent standardized windows.
    pub fn sample(&self, n_windows: usize, seed: u64) -> Result<SyntheticDataset> {
        if n_windows == 0 {
            return Err(Error::Contract("n_windows must be >= 1".into()));
        }
        let a = self.assets.len();
        let t_len = self.window_length;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut windows = Vec::with_capacity(n_windows);
        let mut track = Vec::with_capacity(t_len);
        for _ in 0..n_windows {
            let mut win = vec![0.0; t_len * a];
            for asset in 0..a {
                self.sample_track(asset, &mut rng, &mut track);
                for (t, v) in track.iter().enumerate() {
                    win[t * a + asset] = *v;
                }
            }
            windows.push(win);
        }
        SyntheticDataset::new(
            self.assets.clone(),
            t_len,
            windows,
            self.standardization.clone(),
        )
    }
}
