//! End-to-end run orchestration: ingest prices, fit a generator, sample,
//! then evaluate statistical fidelity, portfolio utility, risk utility,
//! and rolling backtests, writing machine-readable artifacts.
//!
//! Everything here is deterministic in (config file, data file): seeds
//! are explicit, maps are ordered, artifacts carry no timestamps, and
//! JSON floats round-trip exactly.

pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backtest::{run_backtest, BacktestConfig, BacktestReport, TrainSource};
use crate::error::{Error, Result};
use crate::fidelity::{fidelity_report, FidelityReport};
use crate::generators::{GeneratorConfig, GeneratorModel, SyntheticDataset, TrainingLog};
use crate::market_data::{
    load_prices, log_returns, make_windows, standardize, CsvSchema, ReturnSeries,
};
use crate::portfolio::{
    compare_allocations, estimate_moments, solve_long_only, solve_mean_variance, AllocationGap,
    ReturnTarget, Weights,
};
use crate::risk::{risk_report, RiskMetrics};

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_confidence() -> f64 {
    0.95
}
fn default_acf_max_lag() -> usize {
    10
}
fn default_dtw_pairs() -> usize {
    20
}

/// One JSON file drives every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Price CSV: `date,close` or `date,<asset>,<asset>,...`.
    pub input: PathBuf,
    /// Artifact directory; `--out` overrides.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub generator: GeneratorConfig,
    /// First seed drives the pipeline; two or more enable robustness.
    pub seeds: Vec<u64>,
    /// Confidence level for VaR/ES.
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Return target for the portfolio stage.
    #[serde(default)]
    pub target: ReturnTarget,
    /// Solve the portfolio stage with non-negative weights.
    #[serde(default)]
    pub long_only: bool,
    /// Synthetic windows to draw for evaluation; real window count when
    /// omitted.
    #[serde(default)]
    pub n_windows: Option<usize>,
    #[serde(default = "default_acf_max_lag")]
    pub acf_max_lag: usize,
    #[serde(default = "default_dtw_pairs")]
    pub dtw_pairs: usize,
    #[serde(default)]
    pub backtest: BacktestConfig,
    /// Reuse one generator fit for every backtest window instead of
    /// refitting per window.
    #[serde(default)]
    pub global_model: bool,
    /// Scale backtest Sharpe/Sortino by sqrt(252).
    #[serde(default)]
    pub annualize: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut config: RunConfig = serde_json::from_str(&body)?;
        config.generator = config.generator.or_family_defaults();
        Ok(config)
    }

    /// Fail fast with a field-level message before any computation.
    pub fn validate(&self) -> Result<()> {
        if !self.input.exists() {
            return Err(Error::Config(format!(
                "input path {} does not exist",
                self.input.display()
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must list at least one seed".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!(
                "confidence {} must lie strictly between 0 and 1",
                self.confidence
            )));
        }
        if self.acf_max_lag == 0 || self.acf_max_lag + 1 >= self.generator.window_length {
            return Err(Error::Config(format!(
                "acf_max_lag {} must be >= 1 and < window_length - 1 = {}",
                self.acf_max_lag,
                self.generator.window_length.saturating_sub(1)
            )));
        }
        if self.dtw_pairs == 0 {
            return Err(Error::Config("dtw_pairs must be >= 1".into()));
        }
        if let Some(n) = self.n_windows {
            if n == 0 {
                return Err(Error::Config("n_windows must be >= 1 when given".into()));
            }
        }
        self.generator.validate()?;
        self.backtest.validate()?;
        Ok(())
    }
}

/// Weight comparison between real-moment and synthetic-moment solves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioUtility {
    pub target: ReturnTarget,
    pub long_only: bool,
    pub real: Weights,
    pub synthetic: Weights,
    pub gap: AllocationGap,
}

/// Signed per-asset gaps (synthetic minus real) of the risk measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskGap {
    pub asset: String,
    pub volatility_gap: f64,
    pub var_gap: f64,
    pub es_gap: f64,
}

/// Risk measures on real vs synthetic series, per asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskUtility {
    pub confidence: f64,
    pub real: Vec<RiskMetrics>,
    pub synthetic: Vec<RiskMetrics>,
    pub gaps: Vec<RiskGap>,
}

/// Condensed backtest aggregates for the summary and tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestAggregates {
    pub sharpe: f64,
    pub sortino: Option<f64>,
    pub max_drawdown: f64,
    pub range_drawdown: f64,
    pub windows: usize,
    pub annualized: bool,
}

impl BacktestAggregates {
    fn from_report(r: &BacktestReport) -> Self {
        Self {
            sharpe: r.sharpe,
            sortino: r.sortino,
            max_drawdown: r.max_drawdown,
            range_drawdown: r.range_drawdown,
            windows: r.windows.len(),
            annualized: r.annualized,
        }
    }
}

/// Real-trained vs synthetic-trained backtest aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestUtility {
    pub real: BacktestAggregates,
    pub synthetic: BacktestAggregates,
}

/// The utility dimension: portfolio, risk, and backtest comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySummary {
    pub portfolio: PortfolioUtility,
    pub risk: RiskUtility,
    pub backtest: BacktestUtility,
}

/// One seed's evaluation for the robustness dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEvaluation {
    pub seed: u64,
    pub fidelity: FidelityReport,
    pub weights: Weights,
    pub risk: Vec<RiskMetrics>,
}

/// Across-seed sample standard deviation and max-min gap of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub std: f64,
    pub max_gap: f64,
}

fn dispersion(values: &[f64]) -> Dispersion {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Dispersion {
        std: var.max(0.0).sqrt(),
        max_gap: hi - lo,
    }
}

/// Stability of metrics and weights across generator seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedEvaluation>,
    pub dispersion: BTreeMap<String, Dispersion>,
}

/// Dispersion block reproduced in summary.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub seeds: Vec<u64>,
    pub dispersion: BTreeMap<String, Dispersion>,
}

/// The three evaluation dimensions; a null dimension carries a reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub fidelity: Option<FidelityReport>,
    pub utility: Option<UtilitySummary>,
    pub robustness: Option<RobustnessSummary>,
    pub reasons: BTreeMap<String, String>,
}

/// Everything a pipeline run produces, before touching the filesystem.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub returns: ReturnSeries,
    pub model: GeneratorModel,
    pub training_log: TrainingLog,
    pub synthetic: SyntheticDataset,
    pub fidelity: FidelityReport,
    pub utility: UtilitySummary,
    pub backtest_real: BacktestReport,
    pub backtest_synthetic: BacktestReport,
    pub robustness: Option<RobustnessReport>,
    pub summary: Summary,
}

fn solve_stage(
    returns: &ReturnSeries,
    target: ReturnTarget,
    long_only: bool,
) -> Result<Weights> {
    let moments = estimate_moments(returns)?;
    if long_only {
        solve_long_only(&moments, target)
    } else {
        solve_mean_variance(&moments, target)
    }
}

fn fit_sample_evaluate(
    returns: &ReturnSeries,
    config: &RunConfig,
    seed: u64,
) -> Result<(GeneratorModel, TrainingLog, SyntheticDataset, FidelityReport, ReturnSeries)> {
    let (model, training_log) = GeneratorModel::fit(returns, &config.generator, seed)?;
    let (std_series, _) = standardize(returns)?;
    let real_windows = make_windows(
        &std_series,
        config.generator.window_length,
        config.generator.stride,
    )?;
    let n_windows = config.n_windows.unwrap_or_else(|| real_windows.n_windows());
    let synthetic = model.sample(n_windows, seed)?;
    let fidelity = fidelity_report(
        &real_windows,
        &synthetic.window_set(),
        config.acf_max_lag,
        config.dtw_pairs,
        seed,
    )?;
    let synthetic_series = synthetic.to_return_series(returns.dates[0])?;
    Ok((model, training_log, synthetic, fidelity, synthetic_series))
}

fn risk_utility(
    real: &ReturnSeries,
    synthetic: &ReturnSeries,
    confidence: f64,
) -> Result<RiskUtility> {
    let real_metrics = risk_report(real, confidence)?;
    let synth_metrics = risk_report(synthetic, confidence)?;
    let gaps = real_metrics
        .iter()
        .zip(&synth_metrics)
        .map(|(r, s)| RiskGap {
            asset: r.asset.clone(),
            volatility_gap: s.volatility - r.volatility,
            var_gap: s.var - r.var,
            es_gap: s.es - r.es,
        })
        .collect();
    Ok(RiskUtility {
        confidence,
        real: real_metrics,
        synthetic: synth_metrics,
        gaps,
    })
}

/// Load prices and turn them into log returns.
pub fn ingest(input: &Path) -> Result<ReturnSeries> {
    let prices = load_prices(input, CsvSchema::Auto)?;
    log_returns(&prices)
}

/// Run the full pipeline in memory.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput> {
    config.validate()?;
    let returns = ingest(&config.input)?;
    let seed = config.seeds[0];

    let (model, training_log, synthetic, fidelity, synthetic_series) =
        fit_sample_evaluate(&returns, config, seed)?;

    let real_weights = solve_stage(&returns, config.target, config.long_only)?;
    let synth_weights = solve_stage(&synthetic_series, config.target, config.long_only)?;
    let gap = compare_allocations(&real_weights, &synth_weights)?;
    let portfolio = PortfolioUtility {
        target: config.target,
        long_only: config.long_only,
        real: real_weights,
        synthetic: synth_weights,
        gap,
    };

    let risk = risk_utility(&returns, &synthetic_series, config.confidence)?;

    let mut backtest_real = run_backtest(TrainSource::Real, &returns, &config.backtest, seed)?;
    let mut backtest_synthetic = run_backtest(
        TrainSource::Synthetic {
            config: &config.generator,
            global_model: config.global_model,
        },
        &returns,
        &config.backtest,
        seed,
    )?;
    if config.annualize {
        backtest_real.annualize()?;
        backtest_synthetic.annualize()?;
    }

    let utility = UtilitySummary {
        portfolio,
        risk,
        backtest: BacktestUtility {
            real: BacktestAggregates::from_report(&backtest_real),
            synthetic: BacktestAggregates::from_report(&backtest_synthetic),
        },
    };

    let mut reasons = BTreeMap::new();
    let robustness = if config.seeds.len() >= 2 {
        Some(run_robustness(config)?)
    } else {
        reasons.insert(
            "robustness".to_string(),
            "single seed configured; list two or more seeds to measure dispersion".to_string(),
        );
        None
    };

    let summary = Summary {
        fidelity: Some(fidelity.clone()),
        utility: Some(utility.clone()),
        robustness: robustness.as_ref().map(|r| RobustnessSummary {
            seeds: r.seeds.clone(),
            dispersion: r.dispersion.clone(),
        }),
        reasons,
    };

    Ok(PipelineOutput {
        returns,
        model,
        training_log,
        synthetic,
        fidelity,
        utility,
        backtest_real,
        backtest_synthetic,
        robustness,
        summary,
    })
}

/// Re-run fit/sample/evaluate per seed and aggregate dispersion.
pub fn run_robustness(config: &RunConfig) -> Result<RobustnessReport> {
    config.validate()?;
    if config.seeds.len() < 2 {
        return Err(Error::Contract(
            "robustness needs at least 2 seeds".into(),
        ));
    }
    let returns = ingest(&config.input)?;
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let (_, _, _, fidelity, synthetic_series) =
            fit_sample_evaluate(&returns, config, seed)?;
        let weights = solve_stage(&synthetic_series, config.target, config.long_only)?;
        let risk = risk_report(&synthetic_series, config.confidence)?;
        runs.push(SeedEvaluation {
            seed,
            fidelity,
            weights,
            risk,
        });
    }

    let mut metrics: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for run in &runs {
        metrics
            .entry("ks".into())
            .or_default()
            .push(run.fidelity.ks);
        metrics
            .entry("wasserstein1".into())
            .or_default()
            .push(run.fidelity.wasserstein1);
        metrics
            .entry("acf_max_abs_gap".into())
            .or_default()
            .push(run.fidelity.acf_max_abs_gap);
        metrics
            .entry("dtw_mean".into())
            .or_default()
            .push(run.fidelity.dtw_mean);
        for (asset, w) in run.weights.assets.iter().zip(&run.weights.weights) {
            metrics
                .entry(format!("weight:{asset}"))
                .or_default()
                .push(*w);
        }
        for r in &run.risk {
            metrics
                .entry(format!("volatility:{}", r.asset))
                .or_default()
                .push(r.volatility);
            metrics
                .entry(format!("var:{}", r.asset))
                .or_default()
                .push(r.var);
            metrics
                .entry(format!("es:{}", r.asset))
                .or_default()
                .push(r.es);
        }
    }
    let dispersion = metrics
        .into_iter()
        .map(|(k, v)| (k, self::dispersion(&v)))
        .collect();

    Ok(RobustnessReport {
        seeds: config.seeds.clone(),
        runs,
        dispersion,
    })
}

pub(crate) fn write_text(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    write_text(dir, name, &body)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    let body = fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&body)?)
}

/// Full backtest reports as stored in backtest.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestArtifact {
    pub real: BacktestReport,
    pub synthetic: BacktestReport,
}

/// Portfolio + backtest comparison as stored in utility.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityArtifact {
    pub portfolio: PortfolioUtility,
    pub backtest: BacktestUtility,
}

impl PipelineOutput {
    /// Write every artifact under `dir`, creating it if needed.
    /// Returns the paths written.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let mut paths = Vec::new();
        let model_path = dir.join("model.json");
        self.model.save(&model_path)?;
        paths.push(model_path);
        paths.push(write_text(dir, "returns.csv", &self.returns.to_csv())?);
        paths.push(write_text(dir, "synthetic.csv", &self.synthetic.to_csv())?);
        paths.push(write_json(dir, "training_log.json", &self.training_log)?);
        paths.push(write_json(dir, "fidelity.json", &self.fidelity)?);
        paths.push(write_json(
            dir,
            "utility.json",
            &UtilityArtifact {
                portfolio: self.utility.portfolio.clone(),
                backtest: self.utility.backtest.clone(),
            },
        )?);
        paths.push(write_json(dir, "risk.json", &self.utility.risk)?);
        paths.push(write_json(
            dir,
            "backtest.json",
            &BacktestArtifact {
                real: self.backtest_real.clone(),
                synthetic: self.backtest_synthetic.clone(),
            },
        )?);
        paths.push(write_text(
            dir,
            "oos_returns.csv",
            &self.backtest_synthetic.oos_csv(),
        )?);
        if let Some(rob) = &self.robustness {
            paths.push(write_json(dir, "robustness.json", rob)?);
        }
        paths.push(write_json(dir, "summary.json", &self.summary)?);
        Ok(paths)
    }
}

/// `pipeline` command: run and write artifacts; returns written paths.
pub fn cmd_pipeline(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let output = run_pipeline(config)?;
    output.write_artifacts(&config.out_dir)
}

/// `robustness` command: per-seed evaluation and dispersion aggregates.
pub fn cmd_robustness(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let report = run_robustness(config)?;
    fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(config.out_dir.display().to_string(), e))?;
    Ok(vec![write_json(&config.out_dir, "robustness.json", &report)?])
}
