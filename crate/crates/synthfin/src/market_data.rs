//! Price ingestion and return preprocessing.
//!
//! Turns daily close-price CSVs into log-return series, standardizes them,
//! checks stationarity with an augmented Dickey-Fuller regression, and cuts
//! rolling windows for the generative models. Missing calendar dates
//! (weekends, holidays) are ignored: returns are computed between
//! consecutive rows.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Expected CSV layout for [`load_prices`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvSchema {
    /// Accept either layout, inferred from the header.
    Auto,
    /// Header must be exactly `date,close`.
    SingleClose,
    /// Header `date,<asset1>,<asset2>,...` with at least one asset column.
    MultiAsset,
}

/// Daily close prices for one or more assets, sorted by date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// Column-major: `closes[asset][t]`, all strictly positive.
    pub closes: Vec<Vec<f64>>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, closes: Vec<Vec<f64>>) -> Result<Self> {
        if assets.is_empty() || closes.len() != assets.len() {
            return Err(Error::Contract(
                "asset names and price columns must match and be non-empty".into(),
            ));
        }
        for col in &closes {
            if col.len() != dates.len() {
                return Err(Error::Contract(format!(
                    "price column length {} != date count {}",
                    col.len(),
                    dates.len()
                )));
            }
            if let Some(p) = col.iter().find(|p| !p.is_finite() || **p <= 0.0) {
                return Err(Error::Domain(format!("non-positive or non-finite price {p}")));
            }
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Domain(format!(
                    "dates not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self {
            dates,
            assets,
            closes,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Daily log-returns for one or more assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// Column-major: `values[asset][t]`.
    pub values: Vec<Vec<f64>>,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if assets.is_empty() || values.len() != assets.len() {
            return Err(Error::Contract(
                "asset names and return columns must match and be non-empty".into(),
            ));
        }
        for col in &values {
            if col.len() != dates.len() {
                return Err(Error::Contract(format!(
                    "return column length {} != date count {}",
                    col.len(),
                    dates.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("non-finite return value".into()));
            }
        }
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn column(&self, asset: usize) -> &[f64] {
        &self.values[asset]
    }

    /// Chronological sub-series over `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<ReturnSeries> {
        if start >= end || end > self.len() {
            return Err(Error::Contract(format!(
                "invalid slice [{start}, {end}) of series length {}",
                self.len()
            )));
        }
        Ok(ReturnSeries {
            dates: self.dates[start..end].to_vec(),
            assets: self.assets.clone(),
            values: self
                .values
                .iter()
                .map(|col| col[start..end].to_vec())
                .collect(),
        })
    }

    /// CSV with header `date,<asset>...` and full double precision values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date");
        for a in &self.assets {
            out.push(',');
            out.push_str(a);
        }
        out.push('\n');
        for t in 0..self.len() {
            let _ = write!(out, "{}", self.dates[t]);
            for col in &self.values {
                let _ = write!(out, ",{:.16e}", col[t]);
            }
            out.push('\n');
        }
        out
    }
}

/// Per-asset mean/std pair that maps raw returns to standardized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationParams {
    /// Identity transform for `n_assets` columns.
    pub fn identity(n_assets: usize) -> Self {
        Self {
            mean: vec![0.0; n_assets],
            std: vec![1.0; n_assets],
        }
    }

    /// Map a standardized value back to raw return units.
    pub fn destandardize(&self, asset: usize, v: f64) -> f64 {
        v * self.std[asset] + self.mean[asset]
    }
}

/// A batch of fixed-length standardized return windows.
///
/// Each window is stored row-major as `[t * n_assets + a]`, so one window of
/// a univariate series is just a `T`-vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub window_length: usize,
    pub assets: Vec<String>,
    pub windows: Vec<Vec<f64>>,
    pub source_params: StandardizationParams,
}

impl WindowSet {
    pub fn n_windows(&self) -> usize {
        self.windows.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// All values of all windows in one vector (window-major, then time,
    /// then asset).
    pub fn flatten(&self) -> Vec<f64> {
        self.windows.iter().flatten().copied().collect()
    }

    /// Values of one asset in one window, in time order.
    pub fn asset_track(&self, window: usize, asset: usize) -> Vec<f64> {
        let a = self.n_assets();
        (0..self.window_length)
            .map(|t| self.windows[window][t * a + asset])
            .collect()
    }
}

/// Augmented Dickey-Fuller regression outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lag_order: usize,
    pub reject_unit_root_5pct: bool,
    pub critical_value_5pct: f64,
}

/// Sample moments of a return series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator).
    pub std: f64,
    /// Moment-ratio skewness m3 / m2^1.5.
    pub skewness: f64,
    /// Non-excess (Pearson) kurtosis m4 / m2^2; a normal series gives ~3.
    pub kurtosis: f64,
}

/// Parse a daily price CSV (`date,close` or `date,<asset>...`).
///
/// Rows may arrive in any order; they are sorted by date. Duplicate dates
/// and non-positive prices are rejected.
pub fn load_prices(path: &Path, schema: CsvSchema) -> Result<PriceSeries> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_prices(&text, schema)
}

/// CSV-text variant of [`load_prices`].
pub fn parse_prices(text: &str, schema: CsvSchema) -> Result<PriceSeries> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::MalformedInput {
            line: 1,
            msg: "empty file".into(),
        })?;
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if cols.len() < 2 || cols[0].trim() != "date" {
        return Err(Error::MalformedInput {
            line: 1,
            msg: format!("expected header `date,<asset>...`, got `{header}`"),
        });
    }
    match schema {
        CsvSchema::SingleClose if cols.len() != 2 || cols[1].trim() != "close" => {
            return Err(Error::MalformedInput {
                line: 1,
                msg: format!("expected header `date,close`, got `{header}`"),
            });
        }
        _ => {}
    }
    let assets: Vec<String> = cols[1..].iter().map(|c| c.trim().to_string()).collect();
    if assets.iter().any(|a| a.is_empty()) {
        return Err(Error::MalformedInput {
            line: 1,
            msg: "empty asset name in header".into(),
        });
    }

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != assets.len() + 1 {
            return Err(Error::MalformedInput {
                line: line_no,
                msg: format!(
                    "expected {} fields, got {}",
                    assets.len() + 1,
                    fields.len()
                ),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0].trim(), "%Y-%m-%d").map_err(|e| {
            Error::MalformedInput {
                line: line_no,
                msg: format!("bad date `{}`: {e}", fields[0]),
            }
        })?;
        let mut prices = Vec::with_capacity(assets.len());
        for f in &fields[1..] {
            let p: f64 = f.trim().parse().map_err(|e| Error::MalformedInput {
                line: line_no,
                msg: format!("bad price `{f}`: {e}"),
            })?;
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::Domain(format!(
                    "non-positive price {p} at line {line_no}"
                )));
            }
            prices.push(p);
        }
        rows.push((date, prices));
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }

    rows.sort_by_key(|(d, _)| *d);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(Error::Domain(format!("duplicate date {}", w[0].0)));
        }
    }

    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    let closes: Vec<Vec<f64>> = (0..assets.len())
        .map(|a| rows.iter().map(|(_, p)| p[a]).collect())
        .collect();
    PriceSeries::new(dates, assets, closes)
}

/// Log-returns between consecutive observations: `ln(P[t+1] / P[t])`.
pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: prices.len(),
        });
    }
    let values: Vec<Vec<f64>> = prices
        .closes
        .iter()
        .map(|col| col.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
        .collect();
    ReturnSeries::new(prices.dates[1..].to_vec(), prices.assets.clone(), values)
}

fn mean_of(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation, n-1 denominator.
fn sample_std(xs: &[f64]) -> f64 {
    let m = mean_of(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Standardize each asset column to zero mean and unit sample variance.
///
/// The returned params invert the transform exactly:
/// `raw = standardized * std + mean`.
pub fn standardize(returns: &ReturnSeries) -> Result<(ReturnSeries, StandardizationParams)> {
    if returns.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: returns.len(),
        });
    }
    let mut means = Vec::with_capacity(returns.n_assets());
    let mut stds = Vec::with_capacity(returns.n_assets());
    let mut values = Vec::with_capacity(returns.n_assets());
    for col in &returns.values {
        let m = mean_of(col);
        let s = sample_std(col);
        if s <= 0.0 || !s.is_finite() {
            return Err(Error::DegenerateSeries(
                "zero variance, cannot standardize".into(),
            ));
        }
        values.push(col.iter().map(|x| (x - m) / s).collect::<Vec<f64>>());
        means.push(m);
        stds.push(s);
    }
    let out = ReturnSeries::new(returns.dates.clone(), returns.assets.clone(), values)?;
    Ok((out, StandardizationParams {
        mean: means,
        std: stds,
    }))
}

/// Invert [`standardize`] using the stored params.
pub fn destandardize(returns: &ReturnSeries, params: &StandardizationParams) -> Result<ReturnSeries> {
    if params.mean.len() != returns.n_assets() {
        return Err(Error::Contract(format!(
            "params cover {} assets, series has {}",
            params.mean.len(),
            returns.n_assets()
        )));
    }
    let values = returns
        .values
        .iter()
        .enumerate()
        .map(|(a, col)| col.iter().map(|v| params.destandardize(a, *v)).collect())
        .collect();
    ReturnSeries::new(returns.dates.clone(), returns.assets.clone(), values)
}

/// Schwert's rule of thumb for the ADF lag order.
pub fn adf_default_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// 5% critical value for the constant-only ADF regression, from the
/// MacKinnon response-surface constants.
fn adf_critical_5pct(n_eff: usize) -> f64 {
    // MacKinnon (2010), no-trend variant, one variable.
    let t = n_eff as f64;
    -2.86154 - 2.8903 / t - 4.234 / (t * t) - 40.04 / (t * t * t)
}

/// Augmented Dickey-Fuller test with intercept, no trend, and `lags`
/// lagged differences.
///
/// Regresses `Δx_t` on `[1, x_{t-1}, Δx_{t-1}, ..., Δx_{t-lags}]` and
/// reports the t-statistic of the level coefficient against the stored 5%
/// critical value.
pub fn adf_test(values: &[f64], lags: usize) -> Result<AdfResult> {
    let n = values.len();
    if n < lags + 10 {
        return Err(Error::InsufficientData {
            needed: lags + 10,
            got: n,
        });
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    // Row t of the regression explains diffs[t] for t in lags..diffs.len().
    let n_eff = diffs.len() - lags;
    let k = 2 + lags;
    if n_eff <= k {
        return Err(Error::InsufficientData {
            needed: lags + k + 1,
            got: n,
        });
    }
    let mut x = DMatrix::<f64>::zeros(n_eff, k);
    let mut y = DVector::<f64>::zeros(n_eff);
    for row in 0..n_eff {
        let t = row + lags;
        y[row] = diffs[t];
        x[(row, 0)] = 1.0;
        x[(row, 1)] = values[t];
        for j in 0..lags {
            x[(row, 2 + j)] = diffs[t - 1 - j];
        }
    }
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let chol = Cholesky::new(xtx.clone())
        .ok_or_else(|| Error::Singular("ADF regression matrix not positive definite".into()))?;
    let beta = chol.solve(&xty);
    let resid = &y - &x * &beta;
    let dof = n_eff - k;
    let s2 = resid.dot(&resid) / dof as f64;
    let xtx_inv = chol.inverse();
    let se = (s2 * xtx_inv[(1, 1)]).sqrt();
    if se <= 0.0 || !se.is_finite() {
        return Err(Error::DegenerateSeries(
            "ADF regression has zero residual variance".into(),
        ));
    }
    let statistic = beta[1] / se;
    let critical = adf_critical_5pct(n_eff);
    Ok(AdfResult {
        statistic,
        lag_order: lags,
        reject_unit_root_5pct: statistic < critical,
        critical_value_5pct: critical,
    })
}

/// Run [`adf_test`] per asset column.
pub fn adf_test_series(returns: &ReturnSeries, lags: usize) -> Result<Vec<AdfResult>> {
    returns
        .values
        .iter()
        .map(|col| adf_test(col, lags))
        .collect()
}

/// Cut rolling windows of length `window_length` at the given stride.
///
/// Window count is `floor((len - T) / stride) + 1`.
pub fn make_windows(
    returns: &ReturnSeries,
    window_length: usize,
    stride: usize,
) -> Result<WindowSet> {
    make_windows_with_params(
        returns,
        window_length,
        stride,
        StandardizationParams::identity(returns.n_assets()),
    )
}

/// [`make_windows`] carrying the standardization params of the source
/// series so windows can be mapped back to raw units later.
pub fn make_windows_with_params(
    returns: &ReturnSeries,
    window_length: usize,
    stride: usize,
    source_params: StandardizationParams,
) -> Result<WindowSet> {
    if window_length < 2 {
        return Err(Error::Contract(format!(
            "window length must be >= 2, got {window_length}"
        )));
    }
    if stride < 1 {
        return Err(Error::Contract("stride must be >= 1".into()));
    }
    let n = returns.len();
    if n < window_length {
        return Err(Error::InsufficientData {
            needed: window_length,
            got: n,
        });
    }
    let a = returns.n_assets();
    let count = (n - window_length) / stride + 1;
    let mut windows = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * stride;
        let mut win = Vec::with_capacity(window_length * a);
        for t in 0..window_length {
            for col in &returns.values {
                win.push(col[start + t]);
            }
        }
        windows.push(win);
    }
    Ok(WindowSet {
        window_length,
        assets: returns.assets.clone(),
        windows,
        source_params,
    })
}

/// Sample moments: mean, std (n-1), moment-ratio skewness, and Pearson
/// (non-excess) kurtosis.
pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    let n = values.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let m = mean_of(values);
    let nf = n as f64;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for x in values {
        let d = x - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(Error::DegenerateSeries("zero variance".into()));
    }
    Ok(SummaryStats {
        mean: m,
        std: sample_std(values),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}
