//! Rolling-window strategy evaluation.
//!
//! Each window trains an allocation on `train_span` days — from the real
//! series or from synthetic draws of matching total length — then holds
//! the weights over the next `test_span` days. Aggregate Sharpe,
//! Sortino, and drawdowns are computed on the concatenated out-of-sample
//! return path. Two drawdown definitions are reported: the running-peak
//! maximum drawdown, and the order-blind range (max − min)/max over the
//! whole path.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{GeneratorConfig, GeneratorModel};
use crate::market_data::ReturnSeries;
use crate::portfolio::{estimate_moments, solve_long_only, solve_mean_variance, ReturnTarget};

/// Trading days per year, used by the optional annualization.
pub const TRADING_DAYS: f64 = 252.0;

fn default_train_span() -> usize {
    1260
}
fn default_test_span() -> usize {
    126
}

/// Rolling-window evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestConfig {
    /// Days of history each window trains on (about five trading years).
    #[serde(default = "default_train_span")]
    pub train_span: usize,
    /// Days each window holds the weights out of sample (about six months).
    #[serde(default = "default_test_span")]
    pub test_span: usize,
    /// Per-day risk-free rate subtracted before Sharpe/Sortino.
    #[serde(default)]
    pub risk_free_rate: f64,
    /// Per-day portfolio return target; min-variance when omitted.
    #[serde(default)]
    pub target: ReturnTarget,
    /// Solve with non-negative weights.
    #[serde(default)]
    pub long_only: bool,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            train_span: default_train_span(),
            test_span: default_test_span(),
            risk_free_rate: 0.0,
            target: ReturnTarget::MinVariance,
            long_only: false,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_span == 0 || self.test_span == 0 {
            return Err(Error::Config("train_span and test_span must be positive".into()));
        }
        if !self.risk_free_rate.is_finite() {
            return Err(Error::Config("risk_free_rate must be finite".into()));
        }
        Ok(())
    }

    /// Closed-form number of rolling windows on `n_obs` observations.
    pub fn window_count(&self, n_obs: usize) -> usize {
        if n_obs <= self.train_span {
            0
        } else {
            (n_obs - self.train_span) / self.test_span
        }
    }
}

/// Where each window's training data comes from.
#[derive(Debug, Clone, Copy)]
pub enum TrainSource<'a> {
    /// Estimate moments directly on the real training span.
    Real,
    /// Fit a generator on the training span and estimate moments on
    /// synthetic draws truncated to the same total length. With
    /// `global_model` the generator is fitted once on the first
    /// training span and reused for every window.
    Synthetic {
        config: &'a GeneratorConfig,
        global_model: bool,
    },
}

/// One rolling window: index ranges into the input series, the solved
/// weights, and the realized out-of-sample portfolio returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub index: usize,
    pub train_start: usize,
    pub train_end: usize,
    pub test_start: usize,
    pub test_end: usize,
    pub weights: Vec<f64>,
    pub portfolio_returns: Vec<f64>,
}

/// Both drawdown definitions over one positive path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drawdowns {
    /// max over t of (running peak − value_t) / running peak.
    pub max_drawdown: f64,
    /// (global max − global min) / global max, order-blind.
    pub range_drawdown: f64,
}

/// Aggregate results over the concatenated out-of-sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub assets: Vec<String>,
    pub config: BacktestConfig,
    pub windows: Vec<WindowRecord>,
    pub oos_dates: Vec<NaiveDate>,
    pub sharpe: f64,
    /// None when the path has no losing day (ratio is unbounded).
    pub sortino: Option<f64>,
    pub max_drawdown: f64,
    pub range_drawdown: f64,
    /// True once Sharpe/Sortino have been scaled by sqrt(252).
    pub annualized: bool,
}

/// Mean excess return over sample standard deviation (n−1), per period.
pub fn sharpe(excess_returns: &[f64]) -> Result<f64> {
    let n = excess_returns.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = excess_returns.iter().sum::<f64>() / n as f64;
    let var = excess_returns
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::DegenerateSeries(
            "zero volatility: Sharpe ratio undefined".into(),
        ));
    }
    Ok(mean / var.sqrt())
}

/// Mean excess return over downside deviation sqrt(mean(min(x,0)²))
/// with a full-sample denominator.
pub fn sortino(excess_returns: &[f64]) -> Result<f64> {
    let n = excess_returns.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if !excess_returns.iter().any(|&x| x < 0.0) {
        return Err(Error::DegenerateSeries(
            "no downside observations: Sortino ratio unbounded".into(),
        ));
    }
    let mean = excess_returns.iter().sum::<f64>() / n as f64;
    let downside = excess_returns
        .iter()
        .map(|&x| {
            let d = x.min(0.0);
            d * d
        })
        .sum::<f64>()
        / n as f64;
    Ok(mean / downside.sqrt())
}

/// Both drawdown definitions on a strictly positive value path.
pub fn max_drawdown(path: &[f64]) -> Result<Drawdowns> {
    if path.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: path.len(),
        });
    }
    if path.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain(
            "drawdowns need a strictly positive value path".into(),
        ));
    }
    let mut peak = path[0];
    let mut running = 0.0f64;
    let mut hi = path[0];
    let mut lo = path[0];
    for &v in &path[1..] {
        peak = peak.max(v);
        running = running.max((peak - v) / peak);
        hi = hi.max(v);
        lo = lo.min(v);
    }
    Ok(Drawdowns {
        max_drawdown: running,
        range_drawdown: (hi - lo) / hi,
    })
}

/// Wealth path from daily returns: 1, then cumulative product of (1+r).
fn wealth_path(returns: &[f64]) -> Result<Vec<f64>> {
    let mut path = Vec::with_capacity(returns.len() + 1);
    let mut w = 1.0;
    path.push(w);
    for &r in returns {
        w *= 1.0 + r;
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::Domain(format!(
                "wealth path hit a non-positive value after a return of {r}"
            )));
        }
        path.push(w);
    }
    Ok(path)
}

fn moments_from_synthetic(
    model: &GeneratorModel,
    train_span: usize,
    start_date: NaiveDate,
    sample_seed: u64,
) -> Result<crate::portfolio::EstimatedMoments> {
    let t_len = model.window_length();
    let n_draws = train_span.div_ceil(t_len);
    let ds = model.sample(n_draws, sample_seed)?;
    let series = ds.to_return_series(start_date)?;
    // Truncate to exactly the real training length for estimation parity.
    let series = series.slice(0, train_span)?;
    estimate_moments(&series)
}

/// Roll training/holding windows across `returns` and score the
/// concatenated out-of-sample path. `seed` drives generator fitting and
/// sampling when the training source is synthetic.
pub fn run_backtest(
    source: TrainSource,
    returns: &ReturnSeries,
    config: &BacktestConfig,
    seed: u64,
) -> Result<BacktestReport> {
    config.validate()?;
    let n_assets = returns.n_assets();
    if config.train_span <= n_assets + 2 {
        return Err(Error::Config(format!(
            "train_span {} must exceed n_assets + 2 = {}",
            config.train_span,
            n_assets + 2
        )));
    }
    let n_obs = returns.len();
    let n_windows = config.window_count(n_obs);
    if n_windows == 0 {
        return Err(Error::InsufficientData {
            needed: config.train_span + config.test_span,
            got: n_obs,
        });
    }

    let global = match source {
        TrainSource::Synthetic {
            config: gen_config,
            global_model: true,
        } => {
            let first_train = returns.slice(0, config.train_span)?;
            Some(GeneratorModel::fit(&first_train, gen_config, seed)?.0)
        }
        _ => None,
    };

    let mut windows = Vec::with_capacity(n_windows);
    let mut oos_returns = Vec::with_capacity(n_windows * config.test_span);
    let mut oos_dates = Vec::with_capacity(n_windows * config.test_span);

    for i in 0..n_windows {
        let train_start = i * config.test_span;
        let train_end = train_start + config.train_span;
        let test_end = train_end + config.test_span;
        let train = returns.slice(train_start, train_end)?;

        let moments = match source {
            TrainSource::Real => estimate_moments(&train)?,
            TrainSource::Synthetic {
                config: gen_config,
                global_model,
            } => {
                let sample_seed = seed.wrapping_add(2 * i as u64 + 1);
                if global_model {
                    moments_from_synthetic(
                        global.as_ref().expect("global model fitted above"),
                        config.train_span,
                        train.dates[0],
                        sample_seed,
                    )?
                } else {
                    let fit_seed = seed.wrapping_add(2 * i as u64);
                    let (model, _) = GeneratorModel::fit(&train, gen_config, fit_seed)?;
                    moments_from_synthetic(
                        &model,
                        config.train_span,
                        train.dates[0],
                        sample_seed,
                    )?
                }
            }
        };

        let solved = if config.long_only {
            solve_long_only(&moments, config.target)?
        } else {
            solve_mean_variance(&moments, config.target)?
        };

        let mut path = Vec::with_capacity(config.test_span);
        for t in train_end..test_end {
            let mut r = 0.0;
            for (a, w) in solved.weights.iter().enumerate() {
                r += w * returns.values[a][t];
            }
            path.push(r);
            oos_dates.push(returns.dates[t]);
        }
        oos_returns.extend_from_slice(&path);

        windows.push(WindowRecord {
            index: i,
            train_start,
            train_end,
            test_start: train_end,
            test_end,
            weights: solved.weights,
            portfolio_returns: path,
        });
    }

    let excess: Vec<f64> = oos_returns
        .iter()
        .map(|r| r - config.risk_free_rate)
        .collect();
    let sharpe_ratio = sharpe(&excess)?;
    let sortino_ratio = match sortino(&excess) {
        Ok(v) => Some(v),
        Err(Error::DegenerateSeries(_)) => None,
        Err(e) => return Err(e),
    };
    let dd = max_drawdown(&wealth_path(&oos_returns)?)?;

    Ok(BacktestReport {
        assets: returns.assets.clone(),
        config: config.clone(),
        windows,
        oos_dates,
        sharpe: sharpe_ratio,
        sortino: sortino_ratio,
        max_drawdown: dd.max_drawdown,
        range_drawdown: dd.range_drawdown,
        annualized: false,
    })
}

impl BacktestReport {
    /// The concatenated out-of-sample daily portfolio returns.
    pub fn oos_path(&self) -> Vec<f64> {
        self.windows
            .iter()
            .flat_map(|w| w.portfolio_returns.iter().copied())
            .collect()
    }

    /// Scale Sharpe/Sortino by sqrt(252); callable once.
    pub fn annualize(&mut self) -> Result<()> {
        if self.annualized {
            return Err(Error::Contract("report is already annualized".into()));
        }
        let k = TRADING_DAYS.sqrt();
        self.sharpe *= k;
        if let Some(s) = self.sortino.as_mut() {
            *s *= k;
        }
        self.annualized = true;
        Ok(())
    }

    /// CSV of the out-of-sample path: date, portfolio return.
    pub fn oos_csv(&self) -> String {
        let mut out = String::from("date,portfolio_return\n");
        for (date, r) in self.oos_dates.iter().zip(self.oos_path()) {
            out.push_str(&format!("{date},{r:.16e}\n"));
        }
        out
    }
}
