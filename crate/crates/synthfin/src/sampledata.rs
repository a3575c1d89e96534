//! Bundled demo price history.
//!
//! Three fictional tickers with volatility-clustered daily returns and a
//! shared market factor, regenerated deterministically so the committed
//! CSV at `data/sample_prices.csv` can be byte-verified by a test. The
//! file exists so the CLI and the end-to-end tests have a realistic
//! input without shipping real market data.

use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Days of price history (one more than the return count).
pub const SAMPLE_DAYS: usize = 2101;

struct AssetSpec {
    name: &'static str,
    start_price: f64,
    mu: f64,
    /// Unconditional daily volatility the variance recursion reverts to.
    uncond_vol: f64,
    alpha: f64,
    beta: f64,
    /// Loading on the shared market shock.
    rho: f64,
}

const SPECS: [AssetSpec; 3] = [
    AssetSpec {
        name: "ACME",
        start_price: 100.0,
        mu: 0.00035,
        uncond_vol: 0.012,
        alpha: 0.06,
        beta: 0.90,
        rho: 0.65,
    },
    AssetSpec {
        name: "GLOBEX",
        start_price: 85.0,
        mu: 0.00025,
        uncond_vol: 0.015,
        alpha: 0.08,
        beta: 0.88,
        rho: 0.55,
    },
    AssetSpec {
        name: "INITECH",
        start_price: 60.0,
        mu: 0.00015,
        uncond_vol: 0.018,
        alpha: 0.10,
        beta: 0.85,
        rho: 0.45,
    },
];

/// The full sample CSV, identical on every call.
pub fn sample_prices_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(20160104);
    let normal = Normal::new(0.0f64, 1.0).unwrap();
    let start = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();

    let mut prices: Vec<f64> = SPECS.iter().map(|s| s.start_price).collect();
    let mut sigma2: Vec<f64> = SPECS
        .iter()
        .map(|s| s.uncond_vol * s.uncond_vol)
        .collect();
    let mut last_shock = vec![0.0f64; SPECS.len()];

    let mut csv = String::from("date");
    for spec in &SPECS {
        let _ = write!(csv, ",{}", spec.name);
    }
    csv.push('\n');
    for t in 0..SAMPLE_DAYS {
        let date = start + Days::new(t as u64);
        let _ = write!(csv, "{date}");
        for p in &prices {
            let _ = write!(csv, ",{p:.6}");
        }
        csv.push('\n');
        if t + 1 == SAMPLE_DAYS {
            break;
        }
        let market: f64 = normal.sample(&mut rng);
        for (a, spec) in SPECS.iter().enumerate() {
            // GARCH(1,1) recursion with omega chosen so the variance
            // mean-reverts to uncond_vol^2.
            let omega = spec.uncond_vol * spec.uncond_vol * (1.0 - spec.alpha - spec.beta);
            sigma2[a] = omega + spec.alpha * last_shock[a] * last_shock[a] + spec.beta * sigma2[a];
            let idio: f64 = normal.sample(&mut rng);
            let z = spec.rho * market + (1.0 - spec.rho * spec.rho).sqrt() * idio;
            let shock = sigma2[a].sqrt() * z;
            last_shock[a] = shock;
            prices[a] *= (spec.mu + shock).exp();
        }
    }
    csv
}
