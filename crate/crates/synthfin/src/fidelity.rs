//! Distributional and temporal fidelity metrics.
//!
//! Compares a synthetic window set against the real windows it was trained
//! on: Kolmogorov-Smirnov and Wasserstein-1 distances on the pooled return
//! distribution, autocorrelation profiles averaged across windows, and
//! dynamic time warping distances over sampled window pairs.

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{summary_stats, WindowSet};

/// Absolute gaps between the first four sample moments of two samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentGaps {
    pub mean_gap: f64,
    pub std_gap: f64,
    pub skewness_gap: f64,
    pub kurtosis_gap: f64,
}

/// Fidelity metrics of a synthetic sample against real data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Two-sample KS statistic on pooled values.
    pub ks: f64,
    /// Wasserstein-1 distance on pooled values.
    pub wasserstein1: f64,
    /// Mean autocorrelation per lag (0..=max_lag) across real windows.
    pub acf_real: Vec<f64>,
    /// Mean autocorrelation per lag across synthetic windows.
    pub acf_syn: Vec<f64>,
    /// Largest |acf_real - acf_syn| over lags >= 1.
    pub acf_max_abs_gap: f64,
    /// Mean DTW distance over sampled (real, synthetic) window pairs.
    pub dtw_mean: f64,
    pub moment_gaps: MomentGaps,
}

/// Two-sample Kolmogorov-Smirnov statistic.
///
/// The supremum of |F_a - F_b| over the pooled sample points, where F is
/// the right-continuous empirical CDF. Always in [0, 1].
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            got: a.len().min(b.len()),
        });
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let na = sa.len();
    let nb = sb.len();
    let (mut i, mut j) = (0usize, 0usize);
    // Sweep the merged order; after consuming all points <= x the ECDFs at
    // x are i/na and j/nb. Track the gap as the integer numerator of
    // |i/na - j/nb| over the common denominator na*nb so ratios of small
    // integers come out exact.
    let mut sup_num: i128 = 0;
    while i < na || j < nb {
        let x = match (sa.get(i), sb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < na && sa[i] <= x {
            i += 1;
        }
        while j < nb && sb[j] <= x {
            j += 1;
        }
        let num = (i as i128 * nb as i128 - j as i128 * na as i128).abs();
        sup_num = sup_num.max(num);
    }
    Ok(sup_num as f64 / (na as f64 * nb as f64))
}

/// Wasserstein-1 (earth mover's) distance between two samples.
///
/// Computed as the integral of |F_a - F_b| over the pooled support. For
/// equal sample sizes this equals the mean absolute difference of the
/// sorted samples.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            got: a.len().min(b.len()),
        });
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let na = sa.len() as f64;
    let nb = sb.len() as f64;
    let mut pooled: Vec<f64> = sa.iter().chain(sb.iter()).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    for w in pooled.windows(2) {
        while i < sa.len() && sa[i] <= w[0] {
            i += 1;
        }
        while j < sb.len() && sb[j] <= w[0] {
            j += 1;
        }
        total += (i as f64 / na - j as f64 / nb).abs() * (w[1] - w[0]);
    }
    Ok(total)
}

/// Autocorrelation for lags `0..=max_lag` with the biased estimator
/// (denominator n); lag 0 is exactly 1.
pub fn acf(values: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 || max_lag >= n {
        return Err(Error::InsufficientData {
            needed: max_lag + 1,
            got: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    if denom <= 0.0 {
        return Err(Error::DegenerateSeries("zero variance in ACF".into()));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    out.push(1.0);
    for k in 1..=max_lag {
        let num: f64 = (0..n - k)
            .map(|t| (values[t] - mean) * (values[t + k] - mean))
            .sum();
        out.push(num / denom);
    }
    Ok(out)
}

/// Dynamic time warping distance with |a_i - b_j| step cost and moves
/// right/down/diagonal, anchored at both ends.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            got: a.len().min(b.len()),
        });
    }
    let m = b.len();
    // Rolling single-row DP over the (a.len() x b.len()) grid.
    let mut prev = vec![0.0f64; m];
    prev[0] = (a[0] - b[0]).abs();
    for j in 1..m {
        prev[j] = prev[j - 1] + (a[0] - b[j]).abs();
    }
    let mut curr = vec![0.0f64; m];
    for i in 1..a.len() {
        curr[0] = prev[0] + (a[i] - b[0]).abs();
        for j in 1..m {
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = best + (a[i] - b[j]).abs();
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m - 1])
}

fn mean_acf_over_windows(ws: &WindowSet, max_lag: usize) -> Result<Vec<f64>> {
    if ws.n_windows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut acc = vec![0.0; max_lag + 1];
    let mut count = 0usize;
    for w in 0..ws.n_windows() {
        for a in 0..ws.n_assets() {
            let track = ws.asset_track(w, a);
            match acf(&track, max_lag) {
                Ok(vals) => {
                    for (s, v) in acc.iter_mut().zip(&vals) {
                        *s += v;
                    }
                    count += 1;
                }
                // A window can be flat by chance; skip it rather than fail
                // the whole report.
                Err(Error::DegenerateSeries(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    if count == 0 {
        return Err(Error::DegenerateSeries(
            "all windows have zero variance".into(),
        ));
    }
    for s in &mut acc {
        *s /= count as f64;
    }
    Ok(acc)
}

/// Full fidelity comparison of synthetic windows against real windows.
///
/// KS/W1/moment gaps are computed on the flattened pooled values; ACF per
/// asset track averaged across windows; DTW over `dtw_pairs` window pairs
/// drawn without replacement per side using the given seed (averaged over
/// asset tracks within each pair).
pub fn fidelity_report(
    real: &WindowSet,
    synthetic: &WindowSet,
    max_lag: usize,
    dtw_pairs: usize,
    seed: u64,
) -> Result<FidelityReport> {
    if real.n_assets() != synthetic.n_assets() {
        return Err(Error::Contract(format!(
            "asset count mismatch: real {} vs synthetic {}",
            real.n_assets(),
            synthetic.n_assets()
        )));
    }
    if real.n_windows() == 0 || synthetic.n_windows() == 0 {
        return Err(Error::InsufficientData {
            needed: 1,
            got: real.n_windows().min(synthetic.n_windows()),
        });
    }
    if max_lag + 1 >= real.window_length || max_lag + 1 >= synthetic.window_length {
        return Err(Error::Contract(format!(
            "max_lag {} too large for window lengths {} / {}",
            max_lag, real.window_length, synthetic.window_length
        )));
    }
    if dtw_pairs == 0 {
        return Err(Error::Contract("dtw_pairs must be >= 1".into()));
    }

    let flat_real = real.flatten();
    let flat_syn = synthetic.flatten();
    let ks = ks_statistic(&flat_real, &flat_syn)?;
    let w1 = wasserstein1(&flat_real, &flat_syn)?;

    let sr = summary_stats(&flat_real)?;
    let ss = summary_stats(&flat_syn)?;
    let moment_gaps = MomentGaps {
        mean_gap: (sr.mean - ss.mean).abs(),
        std_gap: (sr.std - ss.std).abs(),
        skewness_gap: (sr.skewness - ss.skewness).abs(),
        kurtosis_gap: (sr.kurtosis - ss.kurtosis).abs(),
    };

    let acf_real = mean_acf_over_windows(real, max_lag)?;
    let acf_syn = mean_acf_over_windows(synthetic, max_lag)?;
    let acf_max_abs_gap = acf_real
        .iter()
        .zip(&acf_syn)
        .skip(1)
        .map(|(r, s)| (r - s).abs())
        .fold(0.0, f64::max);

    // Sample pairs with a fixed-seed generator so reports are reproducible.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = dtw_pairs
        .min(real.n_windows())
        .min(synthetic.n_windows());
    let real_idx = index_sample(&mut rng, real.n_windows(), k);
    let syn_idx = index_sample(&mut rng, synthetic.n_windows(), k);
    let mut dtw_sum = 0.0;
    let mut dtw_n = 0usize;
    for (ri, si) in real_idx.iter().zip(syn_idx.iter()) {
        for a in 0..real.n_assets() {
            let ra = real.asset_track(ri, a);
            let sa = synthetic.asset_track(si, a);
            dtw_sum += dtw_distance(&ra, &sa)?;
            dtw_n += 1;
        }
    }

    Ok(FidelityReport {
        ks,
        wasserstein1: w1,
        acf_real,
        acf_syn,
        acf_max_abs_gap,
        dtw_mean: dtw_sum / dtw_n as f64,
        moment_gaps,
    })
}
