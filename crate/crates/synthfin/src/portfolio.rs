//! Mean-variance portfolio construction.
//!
//! Estimates return moments, solves the classic minimum-variance problem
//! under a budget constraint and an optional target-return constraint
//! (closed form via the Lagrangian linear system), and supports a long-only
//! variant through an active-set loop. Allocations from real and synthetic
//! data can be compared weight-by-weight.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::ReturnSeries;

/// Condition-number ceiling beyond which a covariance matrix is treated as
/// numerically singular.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

/// Relative collinearity tolerance: below this, the expected-return vector
/// is treated as a multiple of the ones vector.
const COLLINEAR_TOL: f64 = 1e-12;

/// KKT multiplier slack allowed before a clamped asset is released.
const KKT_TOL: f64 = 1e-8;

/// Sample mean vector and covariance matrix of a return series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedMoments {
    pub assets: Vec<String>,
    pub mean: Vec<f64>,
    /// Row-major covariance, sample (n-1) normalization; always symmetric.
    pub cov: Vec<Vec<f64>>,
}

/// Target for the return constraint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnTarget {
    /// Drop the return constraint; minimize variance under the budget only.
    #[default]
    MinVariance,
    /// Require the portfolio expected return to equal this value.
    Fixed(f64),
}

/// An optimized allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub assets: Vec<String>,
    pub weights: Vec<f64>,
    pub expected_return: f64,
    pub variance: f64,
}

/// Element-wise gap between two allocations over the same asset universe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationGap {
    pub max_abs_gap: f64,
    pub l1_gap: f64,
}

impl EstimatedMoments {
    pub fn new(assets: Vec<String>, mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let n = assets.len();
        if n == 0 || mean.len() != n || cov.len() != n {
            return Err(Error::Contract(
                "moment dimensions must match the asset count".into(),
            ));
        }
        for row in &cov {
            if row.len() != n {
                return Err(Error::Contract("covariance matrix must be square".into()));
            }
        }
        if mean.iter().any(|v| !v.is_finite())
            || cov.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::Domain("non-finite moment estimate".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if (cov[i][j] - cov[j][i]).abs() > 1e-9 * (1.0 + cov[i][j].abs()) {
                    return Err(Error::Contract(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { assets, mean, cov })
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        let n = self.n_assets();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                // Enforce exact symmetry for the numeric path.
                m[(i, j)] = 0.5 * (self.cov[i][j] + self.cov[j][i]);
            }
        }
        m
    }
}

/// Sample moments from a return series (means and n-1 covariance).
pub fn estimate_moments(returns: &ReturnSeries) -> Result<EstimatedMoments> {
    let n = returns.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let a = returns.n_assets();
    let means: Vec<f64> = returns
        .values
        .iter()
        .map(|col| col.iter().sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; a]; a];
    for i in 0..a {
        for j in 0..=i {
            let mut s = 0.0;
            for t in 0..n {
                s += (returns.values[i][t] - means[i]) * (returns.values[j][t] - means[j]);
            }
            let c = s / (n - 1) as f64;
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    EstimatedMoments::new(returns.assets.clone(), means, cov)
}

/// Reject indefinite or numerically singular covariance matrices.
fn check_conditioning(sigma: &DMatrix<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(sigma.clone());
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo <= 0.0 {
        return Err(Error::Singular(format!(
            "covariance not positive definite (min eigenvalue {lo:.3e})"
        )));
    }
    if hi / lo > MAX_CONDITION_NUMBER {
        return Err(Error::Singular(format!(
            "covariance condition number {:.3e} exceeds {MAX_CONDITION_NUMBER:.0e}",
            hi / lo
        )));
    }
    Ok(())
}

/// Closed-form solution on a sub-universe of free assets.
///
/// Returns the full-length weight vector (zeros on clamped assets) plus the
/// Lagrange multipliers (lambda, gamma) of the return and budget
/// constraints; lambda is 0 for the pure minimum-variance problem.
fn solve_equality(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    free: &[usize],
    target: ReturnTarget,
) -> Result<(DVector<f64>, f64, f64)> {
    let k = free.len();
    let mu_f = DVector::from_iterator(k, free.iter().map(|&i| mu[i]));
    let sigma_f = DMatrix::from_fn(k, k, |r, c| sigma[(free[r], free[c])]);
    let chol = Cholesky::new(sigma_f).ok_or_else(|| {
        Error::Singular("covariance sub-matrix not positive definite".into())
    })?;
    let ones = DVector::from_element(k, 1.0);
    let s_inv_one = chol.solve(&ones);
    let c = ones.dot(&s_inv_one);
    if c <= 0.0 {
        return Err(Error::Singular("degenerate budget normal equation".into()));
    }

    let (w_f, lambda, gamma) = match target {
        ReturnTarget::MinVariance => {
            let w = &s_inv_one / c;
            (w, 0.0, 2.0 / c)
        }
        ReturnTarget::Fixed(m) => {
            let s_inv_mu = chol.solve(&mu_f);
            let a = mu_f.dot(&s_inv_mu);
            let b = mu_f.dot(&s_inv_one);
            // Cauchy-Schwarz: a*c >= b^2, equality iff mu is constant in the
            // Sigma^-1 inner product. Near equality the 2x2 system is
            // singular and only the implied constant return is reachable.
            let collin = if a * c > 0.0 {
                1.0 - (b * b) / (a * c)
            } else {
                0.0
            };
            if collin.abs() < COLLINEAR_TOL {
                let implied = b / c;
                if (m - implied).abs() <= 1e-9 * implied.abs().max(1.0) {
                    let w = &s_inv_one / c;
                    (w, 0.0, 2.0 / c)
                } else {
                    return Err(Error::Infeasible(format!(
                        "expected returns are identical across free assets; \
                         only target {implied:.6} is reachable, not {m:.6}"
                    )));
                }
            } else {
                let det = a * c - b * b;
                let alpha = (c * m - b) / det;
                let beta = (a - b * m) / det;
                let w = &s_inv_mu * alpha + &s_inv_one * beta;
                (w, 2.0 * alpha, 2.0 * beta)
            }
        }
    };

    let n = mu.len();
    let mut w = DVector::zeros(n);
    for (slot, &i) in free.iter().enumerate() {
        w[i] = w_f[slot];
    }
    Ok((w, lambda, gamma))
}

fn finish_weights(
    moments: &EstimatedMoments,
    sigma: &DMatrix<f64>,
    w: DVector<f64>,
) -> Weights {
    let mu = DVector::from_column_slice(&moments.mean);
    let expected_return = mu.dot(&w);
    let variance = (sigma * &w).dot(&w);
    Weights {
        assets: moments.assets.clone(),
        weights: w.iter().copied().collect(),
        expected_return,
        variance,
    }
}

/// Minimum-variance weights under `1'w = 1` and, for a fixed target,
/// `mu'w = target`. Weights may be negative (short positions).
pub fn solve_mean_variance(moments: &EstimatedMoments, target: ReturnTarget) -> Result<Weights> {
    let sigma = moments.cov_matrix();
    check_conditioning(&sigma)?;
    let mu = DVector::from_column_slice(&moments.mean);
    let free: Vec<usize> = (0..moments.n_assets()).collect();
    let (w, _, _) = solve_equality(&mu, &sigma, &free, target)?;
    Ok(finish_weights(moments, &sigma, w))
}

/// Long-only variant: additionally requires `w >= 0`.
///
/// Active-set method: repeatedly solve the equality-constrained problem on
/// the free assets, clamp the most negative weight to zero, and release
/// clamped assets whose KKT multiplier `2(Sigma w)_i - lambda mu_i - gamma`
/// goes negative.
pub fn solve_long_only(moments: &EstimatedMoments, target: ReturnTarget) -> Result<Weights> {
    let n = moments.n_assets();
    let sigma = moments.cov_matrix();
    check_conditioning(&sigma)?;
    let mu = DVector::from_column_slice(&moments.mean);

    if let ReturnTarget::Fixed(m) = target {
        let lo = moments.mean.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = moments.mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * hi.abs().max(lo.abs()).max(1.0);
        if m < lo - tol || m > hi + tol {
            return Err(Error::Infeasible(format!(
                "target {m:.6} outside the long-only reachable range [{lo:.6}, {hi:.6}]"
            )));
        }
    }

    let mut free: Vec<usize> = (0..n).collect();
    let max_iters = 50 + 10 * n;
    for _ in 0..max_iters {
        let (w, lambda, gamma) = solve_equality(&mu, &sigma, &free, target)?;

        // Clamp the most negative free weight, if any.
        let mut worst: Option<(usize, f64)> = None;
        for &i in &free {
            if w[i] < -1e-12 && worst.map_or(true, |(_, v)| w[i] < v) {
                worst = Some((i, w[i]));
            }
        }
        if let Some((i, _)) = worst {
            if free.len() == 1 {
                return Err(Error::Infeasible(
                    "no long-only allocation satisfies the constraints".into(),
                ));
            }
            free.retain(|&j| j != i);
            continue;
        }

        // Feasible point: verify KKT multipliers of clamped assets.
        let grad = &sigma * &w * 2.0;
        let mut release: Option<(usize, f64)> = None;
        for i in 0..n {
            if free.contains(&i) {
                continue;
            }
            let eta = grad[i] - lambda * mu[i] - gamma;
            if eta < -KKT_TOL && release.map_or(true, |(_, v)| eta < v) {
                release = Some((i, eta));
            }
        }
        match release {
            Some((i, _)) => {
                free.push(i);
                free.sort_unstable();
            }
            None => {
                let mut w = w;
                // Snap boundary round-off to exact zeros.
                for v in w.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                return Ok(finish_weights(moments, &sigma, w));
            }
        }
    }
    Err(Error::FitFailure {
        msg: "active-set iteration cap reached".into(),
        last: vec![],
        trace: vec![],
    })
}

/// Element-wise gap between two allocations on the same universe.
pub fn compare_allocations(a: &Weights, b: &Weights) -> Result<AllocationGap> {
    if a.assets != b.assets {
        return Err(Error::Contract(
            "allocations cover different asset universes".into(),
        ));
    }
    let mut max_abs: f64 = 0.0;
    let mut l1 = 0.0;
    for (x, y) in a.weights.iter().zip(&b.weights) {
        let d = (x - y).abs();
        max_abs = max_abs.max(d);
        l1 += d;
    }
    Ok(AllocationGap {
        max_abs_gap: max_abs,
        l1_gap: l1,
    })
}
