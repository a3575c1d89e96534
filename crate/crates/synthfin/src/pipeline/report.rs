//! Human-readable report rendering from previously written artifacts.
//!
//! `cmd_report` reads the JSON/CSV artifacts of a pipeline run and emits
//! `report.txt` plus plotting-ready CSVs (histogram, autocorrelation,
//! cumulative out-of-sample wealth). Rendering is split into pure
//! string-building functions so tables can be tested against frozen
//! inputs without touching the filesystem.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fidelity::FidelityReport;
use crate::pipeline::{read_json, write_text, BacktestArtifact, BacktestAggregates,
    PortfolioUtility, RiskUtility, UtilityArtifact};

/// Number of equal-width bins in histogram.csv.
const HISTOGRAM_BINS: usize = 40;

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

/// Fidelity metrics, one row per metric.
pub fn render_fidelity_table(f: &FidelityReport) -> String {
    let mut s = String::new();
    s.push_str("Fidelity\n");
    s.push_str("--------\n");
    s.push_str(&format!("{:<24} {:>12}\n", "metric", "value"));
    for (name, value) in [
        ("ks", f.ks),
        ("wasserstein1", f.wasserstein1),
        ("acf_max_abs_gap", f.acf_max_abs_gap),
        ("dtw_mean", f.dtw_mean),
        ("mean_gap", f.moment_gaps.mean_gap),
        ("std_gap", f.moment_gaps.std_gap),
        ("skewness_gap", f.moment_gaps.skewness_gap),
        ("kurtosis_gap", f.moment_gaps.kurtosis_gap),
    ] {
        s.push_str(&format!("{name:<24} {value:>12.4}\n"));
    }
    s
}

/// Optimal weights side by side, one row per asset.
pub fn render_weights_table(p: &PortfolioUtility) -> String {
    let mut s = String::new();
    s.push_str("Portfolio weights\n");
    s.push_str("-----------------\n");
    let _ = writeln!(s, "target: {:?}, long_only: {}", p.target, p.long_only);
    s.push_str(&format!(
        "{:<12} {:>10} {:>10} {:>10}\n",
        "asset", "real", "synthetic", "gap"
    ));
    for (i, asset) in p.real.assets.iter().enumerate() {
        let r = p.real.weights[i];
        let y = p.synthetic.weights[i];
        s.push_str(&format!(
            "{asset:<12} {r:>10.2} {y:>10.2} {:>10.2}\n",
            y - r
        ));
    }
    let _ = writeln!(
        s,
        "max |gap| {:.4}   l1 gap {:.4}",
        p.gap.max_abs_gap, p.gap.l1_gap
    );
    s
}

/// Volatility / VaR / ES as percentages, one row per dataset x asset.
pub fn render_risk_table(r: &RiskUtility) -> String {
    let mut s = String::new();
    s.push_str("Risk\n");
    s.push_str("----\n");
    let _ = writeln!(s, "confidence: {:.2}", r.confidence);
    s.push_str(&format!(
        "{:<12} {:<12} {:>12} {:>10} {:>10}\n",
        "dataset", "asset", "volatility", "var", "es"
    ));
    for (label, metrics) in [("real", &r.real), ("synthetic", &r.synthetic)] {
        for m in metrics.iter() {
            s.push_str(&format!(
                "{label:<12} {:<12} {:>12} {:>10} {:>10}\n",
                m.asset,
                pct(m.volatility),
                pct(m.var),
                pct(m.es)
            ));
        }
    }
    s
}

/// Backtest aggregates, one row per training dataset.
pub fn render_backtest_table(real: &BacktestAggregates, synthetic: &BacktestAggregates) -> String {
    let mut s = String::new();
    s.push_str("Backtest\n");
    s.push_str("--------\n");
    let _ = writeln!(s, "annualized: {}, windows: {}", real.annualized, real.windows);
    s.push_str(&format!(
        "{:<12} {:>8} {:>8} {:>14} {:>16}\n",
        "trained on", "sharpe", "sortino", "max_drawdown", "range_drawdown"
    ));
    for (label, a) in [("real", real), ("synthetic", synthetic)] {
        let sortino = a
            .sortino
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "n/a".to_string());
        s.push_str(&format!(
            "{label:<12} {:>8.2} {sortino:>8} {:>14} {:>16}\n",
            a.sharpe,
            pct(a.max_drawdown),
            pct(a.range_drawdown)
        ));
    }
    s
}

/// Parse one float field of an artifact CSV.
fn parse_field(line_no: usize, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::MalformedInput {
        line: line_no,
        msg: format!("expected a number, got {field:?}"),
    })
}

/// Values of every numeric column after `skip` leading columns.
fn csv_values(body: &str, skip: usize) -> Result<Vec<f64>> {
    let mut values = Vec::new();
    for (i, line) in body.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue; // header
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() <= skip {
            return Err(Error::MalformedInput {
                line: i + 1,
                msg: format!("expected more than {skip} columns"),
            });
        }
        for field in &fields[skip..] {
            values.push(parse_field(i + 1, field)?);
        }
    }
    if values.is_empty() {
        return Err(Error::MalformedInput {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(values)
}

/// Shared-range histogram of both samples: bin_left,bin_right,counts.
pub fn render_histogram_csv(real: &[f64], synthetic: &[f64]) -> Result<String> {
    let lo = real
        .iter()
        .chain(synthetic)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = real
        .iter()
        .chain(synthetic)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain("histogram inputs must be finite".into()));
    }
    // A constant sample still gets one well-defined bin.
    let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
    let mut real_counts = vec![0usize; HISTOGRAM_BINS];
    let mut syn_counts = vec![0usize; HISTOGRAM_BINS];
    for (values, counts) in [(real, &mut real_counts), (synthetic, &mut syn_counts)] {
        for &v in values {
            let bin = (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
    }
    let mut s = String::from("bin_left,bin_right,real_count,synthetic_count\n");
    for b in 0..HISTOGRAM_BINS {
        let left = lo + b as f64 * width;
        let right = lo + (b + 1) as f64 * width;
        let _ = writeln!(
            s,
            "{left:.16e},{right:.16e},{},{}",
            real_counts[b], syn_counts[b]
        );
    }
    Ok(s)
}

/// Mean autocorrelation by lag for both datasets: lag,real,synthetic.
pub fn render_acf_csv(f: &FidelityReport) -> String {
    let mut s = String::from("lag,real,synthetic\n");
    for (lag, (r, y)) in f.acf_real.iter().zip(&f.acf_syn).enumerate() {
        let _ = writeln!(s, "{lag},{r:.16e},{y:.16e}");
    }
    s
}

/// Cumulative out-of-sample wealth of both backtests, sharing one date
/// axis: date,real_cumulative,synthetic_cumulative.
pub fn render_cumulative_csv(b: &BacktestArtifact) -> Result<String> {
    if b.real.oos_dates != b.synthetic.oos_dates {
        return Err(Error::Contract(
            "real and synthetic backtests cover different out-of-sample dates".into(),
        ));
    }
    let real_path = b.real.oos_path();
    let syn_path = b.synthetic.oos_path();
    let mut s = String::from("date,real_cumulative,synthetic_cumulative\n");
    let mut wr = 1.0f64;
    let mut ws = 1.0f64;
    for (i, date) in b.real.oos_dates.iter().enumerate() {
        wr *= 1.0 + real_path[i];
        ws *= 1.0 + syn_path[i];
        let _ = writeln!(s, "{date},{wr:.16e},{ws:.16e}");
    }
    Ok(s)
}

/// `report` command: read artifacts in `dir`, write report.txt plus
/// histogram.csv, acf.csv, and cumulative.csv next to them.
pub fn cmd_report(dir: &Path) -> Result<Vec<PathBuf>> {
    let fidelity: FidelityReport = read_json(dir, "fidelity.json")?;
    let risk: RiskUtility = read_json(dir, "risk.json")?;
    let utility: UtilityArtifact = read_json(dir, "utility.json")?;
    let backtest: BacktestArtifact = read_json(dir, "backtest.json")?;
    let returns_path = dir.join("returns.csv");
    let returns_body = fs::read_to_string(&returns_path)
        .map_err(|e| Error::io(returns_path.display().to_string(), e))?;
    let synthetic_path = dir.join("synthetic.csv");
    let synthetic_body = fs::read_to_string(&synthetic_path)
        .map_err(|e| Error::io(synthetic_path.display().to_string(), e))?;

    // returns.csv: date,<asset>...; synthetic.csv: seq_id,t,<asset>...
    let real_values = csv_values(&returns_body, 1)?;
    let synthetic_values = csv_values(&synthetic_body, 2)?;

    let mut report = String::new();
    report.push_str("Synthetic market data evaluation\n");
    report.push_str("================================\n\n");
    report.push_str(&render_fidelity_table(&fidelity));
    report.push('\n');
    report.push_str(&render_weights_table(&utility.portfolio));
    report.push('\n');
    report.push_str(&render_risk_table(&risk));
    report.push('\n');
    report.push_str(&render_backtest_table(
        &utility.backtest.real,
        &utility.backtest.synthetic,
    ));

    let mut paths = Vec::new();
    paths.push(write_text(dir, "report.txt", &report)?);
    paths.push(write_text(
        dir,
        "histogram.csv",
        &render_histogram_csv(&real_values, &synthetic_values)?,
    )?);
    paths.push(write_text(dir, "acf.csv", &render_acf_csv(&fidelity))?);
    paths.push(write_text(
        dir,
        "cumulative.csv",
        &render_cumulative_csv(&backtest)?,
    )?);
    Ok(paths)
}
