//! Synthetic financial return generation and evaluation workbench.
//!
//! The crate covers an end-to-end workflow for daily return data:
//!
//! 1. [`market_data`] — price ingestion, log-returns, standardization,
//!    stationarity checks, rolling windows.
//! 2. [`generators`] — three synthetic-return families (ARIMA-GARCH,
//!    sequence VAE, TimeGAN) behind one fit/sample interface, built on the
//!    in-crate [`autodiff`] engine.
//! 3. [`fidelity`] — distributional and temporal similarity metrics
//!    (KS, Wasserstein-1, ACF, DTW, moment gaps).
//! 4. [`portfolio`] — closed-form mean-variance optimization with a
//!    long-only active-set variant.
//! 5. [`risk`] — GARCH(1,1) maximum likelihood, parametric VaR/ES.
//! 6. [`backtest`] — rolling-window train/hold evaluation with Sharpe,
//!    Sortino, and drawdown metrics.
//! 7. [`pipeline`] — the `synthfin` CLI commands and their JSON/CSV
//!    artifacts.
//!
//! Every fit and sample operation is deterministic given its config and
//! seed; reports serialize to stable JSON so repeated runs are
//! byte-identical.

pub mod autodiff;
pub mod backtest;
pub mod error;
pub mod fidelity;
pub mod generators;
pub mod market_data;
pub mod optimize;
pub mod pipeline;
pub mod portfolio;
pub mod risk;
pub mod sampledata;

pub use error::{Error, Result};
