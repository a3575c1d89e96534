//! Container for sampled synthetic return windows.

use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{ReturnSeries, StandardizationParams, WindowSet};

/// A batch of synthetic windows in standardized units, plus the params
/// that map them back to raw returns.
///
/// Windows are row-major `[t * n_assets + a]`, the same layout as
/// [`WindowSet`]. Standardized units are what the generators produce and
/// what fidelity metrics compare; raw units are what portfolio, risk, and
/// backtest consumers need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub assets: Vec<String>,
    pub window_length: usize,
    pub windows: Vec<Vec<f64>>,
    pub standardization: StandardizationParams,
}

impl SyntheticDataset {
    pub fn new(
        assets: Vec<String>,
        window_length: usize,
        windows: Vec<Vec<f64>>,
        standardization: StandardizationParams,
    ) -> Result<Self> {
        if assets.is_empty() {
            return Err(Error::Contract("dataset needs at least one asset".into()));
        }
        if standardization.mean.len() != assets.len()
            || standardization.std.len() != assets.len()
        {
            return Err(Error::Contract(
                "standardization params must cover every asset".into(),
            ));
        }
        let expect = window_length * assets.len();
        if windows.is_empty() {
            return Err(Error::Contract("dataset needs at least one window".into()));
        }
        if let Some(w) = windows.iter().find(|w| w.len() != expect) {
            return Err(Error::Contract(format!(
                "window has {} values, expected {expect}",
                w.len()
            )));
        }
        if windows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite synthetic value".into()));
        }
        Ok(Self {
            assets,
            window_length,
            windows,
            standardization,
        })
    }

    pub fn n_windows(&self) -> usize {
        self.windows.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// View as a standardized window set (for fidelity comparisons).
    pub fn window_set(&self) -> WindowSet {
        WindowSet {
            window_length: self.window_length,
            assets: self.assets.clone(),
            windows: self.windows.clone(),
            source_params: self.standardization.clone(),
        }
    }

    /// Concatenate all windows into one raw-unit return series with
    /// synthetic consecutive dates starting at `start`.
    pub fn to_return_series(&self, start: NaiveDate) -> Result<ReturnSeries> {
        let a = self.n_assets();
        let total = self.n_windows() * self.window_length;
        let mut values = vec![Vec::with_capacity(total); a];
        for w in &self.windows {
            for t in 0..self.window_length {
                for (asset, col) in values.iter_mut().enumerate() {
                    col.push(
                        self.standardization
                            .destandardize(asset, w[t * a + asset]),
                    );
                }
            }
        }
        let dates = (0..total as u64).map(|i| start + Days::new(i)).collect();
        ReturnSeries::new(dates, self.assets.clone(), values)
    }

    /// CSV with header `seq_id,t,<asset>...`, values in raw return units
    /// at full double precision.
    pub fn to_csv(&self) -> String {
        let a = self.n_assets();
        let mut out = String::from("seq_id,t");
        for asset in &self.assets {
            out.push(',');
            out.push_str(asset);
        }
        out.push('\n');
        for (w, win) in self.windows.iter().enumerate() {
            for t in 0..self.window_length {
                let _ = write!(out, "{w},{t}");
                for asset in 0..a {
                    let raw = self
                        .standardization
                        .destandardize(asset, win[t * a + asset]);
                    let _ = write!(out, ",{raw:.16e}");
                }
                out.push('\n');
            }
        }
        out
    }
}
