//! Derivative-free minimization.
//!
//! A standard Nelder-Mead simplex search used by the maximum-likelihood
//! and least-squares fits. Objectives are minimized over unconstrained
//! parameter vectors; callers embed constraints through reparameterization.

use crate::error::{Error, Result};

/// Nelder-Mead settings. Defaults suit smooth low-dimensional likelihoods.
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Converged when both the simplex f-spread and x-spread fall below this.
    pub tol: f64,
    /// Initial simplex displacement per coordinate.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-10,
            initial_step: 0.1,
        }
    }
}

/// Minimization outcome: best point, its objective value, and the objective
/// trace (best-so-far value per iteration) kept for fit diagnostics.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Minimize `f` from `x0` with Nelder-Mead.
///
/// Non-finite objective values are treated as +inf (the simplex retreats
/// from them). Fails with `FitFailure` if the simplex never contracts
/// below tolerance within `max_iter` iterations or collapses around a
/// non-finite value.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 {
        return Err(Error::Contract("cannot minimize over zero parameters".into()));
    }
    let mut eval = |x: &[f64]| -> f64 {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // Standard coefficients: reflect 1, expand 2, contract 1/2, shrink 1/2.
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        let step = if p[i].abs() > 1.0 {
            opts.initial_step * p[i].abs()
        } else {
            opts.initial_step
        };
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p)).collect();
    let mut trace = Vec::new();

    for iter in 0..opts.max_iter {
        // Order ascending by objective value.
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let reorder_s: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let reorder_v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        simplex = reorder_s;
        values = reorder_v;
        trace.push(values[0]);

        let f_spread = values[n] - values[0];
        let x_spread = simplex[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if f_spread.abs() < opts.tol && x_spread < opts.tol {
            if !values[0].is_finite() {
                return Err(Error::FitFailure {
                    msg: "simplex collapsed on non-finite objective".into(),
                    last: simplex[0].clone(),
                    trace,
                });
            }
            return Ok(Minimum {
                x: simplex[0].clone(),
                value: values[0],
                iterations: iter,
                trace,
            });
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[n])
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        let f_reflect = eval(&reflect);

        if f_reflect < values[0] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            let f_expand = eval(&expand);
            if f_expand < f_reflect {
                simplex[n] = expand;
                values[n] = f_expand;
            } else {
                simplex[n] = reflect;
                values[n] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[n - 1] {
            simplex[n] = reflect;
            values[n] = f_reflect;
            continue;
        }

        // Contract toward the better of worst/reflected.
        let (base, f_base) = if f_reflect < values[n] {
            (&reflect, f_reflect)
        } else {
            (&simplex[n], values[n])
        };
        let contract: Vec<f64> = centroid
            .iter()
            .zip(base)
            .map(|(c, b)| c + rho * (b - c))
            .collect();
        let f_contract = eval(&contract);
        if f_contract < f_base {
            simplex[n] = contract;
            values[n] = f_contract;
            continue;
        }

        // Shrink everything toward the best vertex.
        for i in 1..=n {
            let best = simplex[0].clone();
            for (p, b) in simplex[i].iter_mut().zip(&best) {
                *p = b + sigma * (*p - b);
            }
            values[i] = eval(&simplex[i]);
        }
    }

    Err(Error::FitFailure {
        msg: format!("no convergence in {} iterations", opts.max_iter),
        last: simplex[0].clone(),
        trace,
    })
}
