//! Volatility filtering and tail-risk measures.
//!
//! GARCH(1,1) conditional variance filtering, Gaussian quasi-maximum-
//! likelihood fitting (through an unconstrained reparameterization and the
//! simplex minimizer), and parametric value-at-risk / expected-shortfall
//! under normality. Risk numbers from real and synthetic series can be
//! compared per asset.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;
use crate::optimize::{nelder_mead, NelderMeadOptions};

/// GARCH(1,1) parameters: `sigma2[t] = omega + alpha*eps[t-1]^2 +
/// beta*sigma2[t-1]` with `eps[t] = r[t] - mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub mu: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GarchParams {
    pub fn new(mu: f64, omega: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(mu.is_finite() && omega.is_finite() && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain("non-finite GARCH parameter".into()));
        }
        if omega <= 0.0 {
            return Err(Error::Domain(format!("omega must be positive, got {omega}")));
        }
        if alpha < 0.0 || beta < 0.0 {
            return Err(Error::Domain(format!(
                "alpha/beta must be non-negative, got {alpha}/{beta}"
            )));
        }
        if alpha + beta >= 1.0 {
            return Err(Error::Domain(format!(
                "alpha + beta = {} must be < 1 for stationarity",
                alpha + beta
            )));
        }
        Ok(Self {
            mu,
            omega,
            alpha,
            beta,
        })
    }

    /// Long-run variance `omega / (1 - alpha - beta)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

/// Outcome of a GARCH(1,1) quasi-maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// Per-asset risk measures at a given confidence level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMetrics {
    pub asset: String,
    /// Mean conditional volatility (mean of sigma_t from the filter).
    pub volatility: f64,
    pub var: f64,
    pub es: f64,
    pub confidence: f64,
    pub garch: GarchParams,
}

/// Conditional variances sigma2[0..n] under fixed parameters.
///
/// The recursion is seeded with the sample variance of the demeaned
/// returns, so the filter is deterministic in (data, params).
pub fn garch_filter(values: &[f64], params: &GarchParams) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let eps: Vec<f64> = values.iter().map(|r| r - params.mu).collect();
    let seed = eps.iter().map(|e| e * e).sum::<f64>() / (n - 1) as f64;
    if seed <= 0.0 {
        return Err(Error::DegenerateSeries(
            "zero variance, cannot filter".into(),
        ));
    }
    let mut sigma2 = Vec::with_capacity(n);
    sigma2.push(seed);
    for t in 1..n {
        let prev = sigma2[t - 1];
        sigma2.push(params.omega + params.alpha * eps[t - 1] * eps[t - 1] + params.beta * prev);
    }
    Ok(sigma2)
}

/// Gaussian log-likelihood of the data under fixed GARCH parameters.
pub fn garch_log_likelihood(values: &[f64], params: &GarchParams) -> Result<f64> {
    let sigma2 = garch_filter(values, params)?;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let mut ll = 0.0;
    for (r, s2) in values.iter().zip(&sigma2) {
        let e = r - params.mu;
        ll -= 0.5 * (ln2pi + s2.ln() + e * e / s2);
    }
    Ok(ll)
}

/// Map the unconstrained optimizer vector to valid GARCH parameters.
///
/// `x = [mu, ln omega, logit p, logit u]` with persistence `p = alpha +
/// beta` and split `u = alpha / p`, guaranteeing positivity and `alpha +
/// beta < 1` for every x.
fn decode(x: &[f64]) -> GarchParams {
    let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
    let p = sigmoid(x[2]);
    let u = sigmoid(x[3]);
    GarchParams {
        mu: x[0],
        omega: x[1].exp(),
        alpha: p * u,
        beta: p * (1.0 - u),
    }
}

/// Fit GARCH(1,1) by quasi-maximum likelihood.
///
/// Starts from variance targeting (persistence 0.95 with alpha 0.05) and
/// minimizes the negative log-likelihood with Nelder-Mead over the
/// unconstrained reparameterization.
pub fn fit_garch(values: &[f64]) -> Result<GarchFit> {
    let n = values.len();
    if n < 50 {
        return Err(Error::InsufficientData { needed: 50, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::DegenerateSeries("zero variance, cannot fit".into()));
    }
    let logit = |v: f64| (v / (1.0 - v)).ln();
    let x0 = [
        mean,
        (var * (1.0 - 0.95)).ln(),
        logit(0.95),
        logit(0.05 / 0.95),
    ];
    let nll = |x: &[f64]| -> f64 {
        let p = decode(x);
        match garch_log_likelihood(values, &p) {
            Ok(ll) => -ll,
            Err(_) => f64::INFINITY,
        }
    };
    let opts = NelderMeadOptions {
        max_iter: 4000,
        tol: 1e-9,
        initial_step: 0.25,
    };
    let min = nelder_mead(nll, &x0, &opts)?;
    let params = decode(&min.x);
    // The decode map guarantees the constraints; re-validate to be safe.
    let params = GarchParams::new(params.mu, params.omega, params.alpha, params.beta)?;
    Ok(GarchFit {
        params,
        log_likelihood: -min.value,
        iterations: min.iterations,
    })
}

/// Parametric (Gaussian) VaR and ES at the given confidence level.
///
/// With tail probability `a = 1 - confidence` and `z` the a-quantile of the
/// standard normal: `VaR = mu + z*sigma`, `ES = mu - sigma*phi(z)/a`. Both
/// are return-space quantities (losses are negative); ES < VaR always.
pub fn var_es(mu: f64, sigma: f64, confidence: f64) -> Result<(f64, f64)> {
    if !(mu.is_finite() && sigma.is_finite()) {
        return Err(Error::Domain("non-finite VaR inputs".into()));
    }
    if sigma <= 0.0 {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!(
            "confidence must be in (0,1), got {confidence}"
        )));
    }
    let a = 1.0 - confidence;
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = std_normal.inverse_cdf(a);
    let var = mu + z * sigma;
    let es = mu - sigma * std_normal.pdf(z) / a;
    Ok((var, es))
}

/// Fit a GARCH model per asset and report volatility, VaR, and ES.
///
/// Volatility is the mean conditional sigma_t over the sample; VaR/ES use
/// the fitted mean and that volatility.
pub fn risk_report(returns: &ReturnSeries, confidence: f64) -> Result<Vec<RiskMetrics>> {
    let mut out = Vec::with_capacity(returns.n_assets());
    for (asset, col) in returns.assets.iter().zip(&returns.values) {
        let fit = fit_garch(col)?;
        let sigma2 = garch_filter(col, &fit.params)?;
        let volatility = sigma2.iter().map(|s| s.sqrt()).sum::<f64>() / sigma2.len() as f64;
        let (var, es) = var_es(fit.params.mu, volatility, confidence)?;
        out.push(RiskMetrics {
            asset: asset.clone(),
            volatility,
            var,
            es,
            confidence,
            garch: fit.params,
        });
    }
    Ok(out)
}
