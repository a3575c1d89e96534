//! Acceptance suite: ten numbered criteria, each printing one
//! PASS/FAIL/SKIP line (visible with `--nocapture`) before asserting.
//!
//! Oracles here are deliberately independent of the library's own
//! algorithms: finite differences for gradients, a null-space
//! steepest-descent minimizer for portfolios, exhaustive path
//! enumeration for DTW, grid search for the long-only solver, and an
//! external normal distribution for VaR/ES.

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use synthfin::autodiff::{gru_sequence, Graph, ParamSet, Tensor, Var};
use synthfin::backtest::{
    max_drawdown, run_backtest, sharpe, BacktestConfig, TrainSource,
};
use synthfin::fidelity::{acf, dtw_distance, ks_statistic, wasserstein1};
use synthfin::generators::{GeneratorConfig, GeneratorModel, TimeganModel};
use synthfin::market_data::{
    load_prices, log_returns, make_windows, standardize, summary_stats, CsvSchema, ReturnSeries,
};
use synthfin::pipeline::{run_pipeline, RunConfig};
use synthfin::portfolio::{
    solve_long_only, solve_mean_variance, EstimatedMoments, ReturnTarget,
};
use synthfin::risk::{fit_garch, garch_filter, var_es};

type Outcome = Result<String, String>;

fn report(number: usize, name: &str, start: Instant, outcome: &Outcome) {
    let status = match outcome {
        Ok(d) if d.starts_with("SKIP") => "SKIP",
        Ok(_) => "PASS",
        Err(_) => "FAIL",
    };
    let detail = match outcome {
        Ok(d) => d,
        Err(d) => d,
    };
    println!(
        "[{status}] criterion {number:2}: {name} ({:.1}s) — {detail}",
        start.elapsed().as_secs_f64()
    );
}

fn finish(number: usize, name: &str, limit_s: f64, start: Instant, outcome: Outcome) {
    report(number, name, start, &outcome);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(outcome.is_ok(), "criterion {number}: {}", outcome.unwrap_err());
    assert!(
        elapsed < limit_s,
        "criterion {number} exceeded its runtime limit: {elapsed:.1}s >= {limit_s}s"
    );
}

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn consecutive_dates(n: usize) -> Vec<NaiveDate> {
    (0..n)
        .map(|t| NaiveDate::from_ymd_opt(2015, 1, 1).unwrap() + chrono::Days::new(t as u64))
        .collect()
}

// ---------------------------------------------------------------------
// Criterion 1: autodiff gradients vs central finite differences.
// ---------------------------------------------------------------------

/// Max relative gradient error of `build` at `inputs`, comparing one
/// reverse pass against central differences on every input entry.
fn grad_check<F>(build: &F, inputs: &[Tensor]) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let forward = |ins: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = ins.iter().map(|t| g.leaf(t.clone())).collect();
        let loss = build(&mut g, &vars);
        g.value(loss).item().unwrap()
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let loss = build(&mut g, &vars);
    let grads = g.backward(loss).unwrap();

    let eps = 1e-5;
    let mut worst = 0.0f64;
    for (i, tensor) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]);
        for k in 0..tensor.data.len() {
            let mut plus = inputs.to_vec();
            plus[i].data[k] += eps;
            let mut minus = inputs.to_vec();
            minus[i].data[k] -= eps;
            let fd = (forward(&plus) - forward(&minus)) / (2.0 * eps);
            let a = analytic.data[k];
            let rel = (a - fd).abs() / (a.abs() + fd.abs() + 1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

fn random_tensor<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Tensor {
    let dist = Uniform::new(lo, hi).unwrap();
    Tensor::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| dist.sample(rng)).collect(),
    )
    .unwrap()
}

/// Max relative gradient error of a 5-step GRU (all weights + inputs).
fn gru_grad_check(seed: u64) -> f64 {
    let (input_dim, hidden, batch, steps) = (3usize, 4usize, 2usize, 5usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    params.register_gru("g", input_dim, hidden, &mut rng).unwrap();
    let xs: Vec<Tensor> = (0..steps)
        .map(|_| random_tensor(batch, input_dim, -1.5, 1.5, &mut rng))
        .collect();

    let forward = |params: &ParamSet, xs: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let bound = params.bind(&mut g);
        let step_vars: Vec<Var> = xs.iter().map(|t| g.leaf(t.clone())).collect();
        let states = gru_sequence(&mut g, &bound, "g", &step_vars, hidden).unwrap();
        let all = g.concat_cols(&states).unwrap();
        let sq = g.square(all);
        let loss = g.mean_all(sq);
        g.value(loss).item().unwrap()
    };

    // Analytic pass.
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let step_vars: Vec<Var> = xs.iter().map(|t| g.leaf(t.clone())).collect();
    let states = gru_sequence(&mut g, &bound, "g", &step_vars, hidden).unwrap();
    let all = g.concat_cols(&states).unwrap();
    let sq = g.square(all);
    let loss = g.mean_all(sq);
    let grads = g.backward(loss).unwrap();
    let param_grads = bound.harvest(&grads);

    let eps = 1e-5;
    let mut worst = 0.0f64;
    for (name, grad) in &param_grads {
        for k in 0..grad.data.len() {
            let mut plus = params.clone();
            plus.get_mut(name).unwrap().data[k] += eps;
            let mut minus = params.clone();
            minus.get_mut(name).unwrap().data[k] -= eps;
            let fd = (forward(&plus, &xs) - forward(&minus, &xs)) / (2.0 * eps);
            let a = grad.data[k];
            worst = worst.max((a - fd).abs() / (a.abs() + fd.abs() + 1e-6));
        }
    }
    for (i, x) in xs.iter().enumerate() {
        let analytic = grads.get(step_vars[i]);
        for k in 0..x.data.len() {
            let mut plus = xs.clone();
            plus[i].data[k] += eps;
            let mut minus = xs.clone();
            minus[i].data[k] -= eps;
            let fd = (forward(&params, &plus) - forward(&params, &minus)) / (2.0 * eps);
            let a = analytic.data[k];
            worst = worst.max((a - fd).abs() / (a.abs() + fd.abs() + 1e-6));
        }
    }
    worst
}

fn check_criterion_1() -> Outcome {
    const INSTANCES: usize = 100;
    const TOL: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_overall: (f64, &str) = (0.0, "none");

    // (name, input shapes, value range, builder)
    type Builder = Box<dyn Fn(&mut Graph, &[Var]) -> Var>;
    let ops: Vec<(&str, Vec<(usize, usize)>, (f64, f64), Builder)> = vec![
        (
            "matmul",
            vec![(2, 3), (3, 2)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.matmul(v[0], v[1]).unwrap();
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "add",
            vec![(2, 3), (2, 3)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.add(v[0], v[1]).unwrap();
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "add_bias",
            vec![(3, 4), (1, 4)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.add_bias(v[0], v[1]).unwrap();
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "sub",
            vec![(2, 3), (2, 3)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.sub(v[0], v[1]).unwrap();
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "mul",
            vec![(2, 3), (2, 3)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.mul(v[0], v[1]).unwrap();
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "scale",
            vec![(2, 3)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.scale(v[0], 0.73);
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "add_const",
            vec![(2, 3)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.add_const(v[0], 0.41);
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "one_minus",
            vec![(2, 3)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.one_minus(v[0]);
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "sigmoid",
            vec![(2, 3)],
            (-2.0, 2.0),
            Box::new(|g, v| {
                let m = g.sigmoid(v[0]);
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "tanh",
            vec![(2, 3)],
            (-2.0, 2.0),
            Box::new(|g, v| {
                let m = g.tanh(v[0]);
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "exp",
            vec![(2, 3)],
            (-2.0, 1.0),
            Box::new(|g, v| {
                let m = g.exp(v[0]);
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "sqrt",
            vec![(2, 3)],
            (0.2, 3.0),
            Box::new(|g, v| {
                let m = g.sqrt(v[0]);
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        // abs has a kink at zero; sampled away from it.
        (
            "abs",
            vec![(2, 3)],
            (0.2, 2.0),
            Box::new(|g, v| {
                let m = g.abs(v[0]);
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "square",
            vec![(2, 3)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.square(v[0]);
                g.mean_all(m)
            }),
        ),
        (
            "mean_all",
            vec![(3, 4)],
            (-1.5, 1.5),
            Box::new(|g, v| g.mean_all(v[0])),
        ),
        (
            "concat_cols",
            vec![(2, 2), (2, 3)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.concat_cols(&[v[0], v[1]]).unwrap();
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "slice_cols",
            vec![(2, 5)],
            (-1.5, 1.5),
            Box::new(|g, v| {
                let m = g.slice_cols(v[0], 1, 3).unwrap();
                let s = g.square(m);
                g.mean_all(s)
            }),
        ),
        (
            "mse",
            vec![(2, 3), (2, 3)],
            (-1.5, 1.5),
            Box::new(|g, v| g.mse(v[0], v[1]).unwrap()),
        ),
        (
            "bce_with_logits",
            vec![(2, 3)],
            (-2.0, 2.0),
            Box::new(|g, v| {
                let targets =
                    Tensor::from_vec(2, 3, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
                g.bce_with_logits(v[0], &targets).unwrap()
            }),
        ),
    ];

    for (name, shapes, (lo, hi), build) in &ops {
        let mut worst = 0.0f64;
        for _ in 0..INSTANCES {
            // abs: random sign per tensor, still away from the kink.
            let flip = *name == "abs" && rng.random_bool(0.5);
            let inputs: Vec<Tensor> = shapes
                .iter()
                .map(|&(r, c)| {
                    let t = random_tensor(r, c, *lo, *hi, &mut rng);
                    if flip {
                        t.map(|x| -x)
                    } else {
                        t
                    }
                })
                .collect();
            worst = worst.max(grad_check(build, &inputs));
        }
        if worst > worst_overall.0 {
            worst_overall = (worst, name);
        }
        if worst >= TOL {
            return Err(format!("op {name}: max relative gradient error {worst:.2e} >= {TOL:.0e}"));
        }
    }

    let mut gru_worst = 0.0f64;
    for i in 0..INSTANCES {
        gru_worst = gru_worst.max(gru_grad_check(7000 + i as u64));
    }
    if gru_worst >= TOL {
        return Err(format!("5-step GRU: max relative gradient error {gru_worst:.2e} >= {TOL:.0e}"));
    }
    if gru_worst > worst_overall.0 {
        worst_overall = (gru_worst, "gru");
    }

    Ok(format!(
        "{} ops x {INSTANCES} instances + 5-step GRU; worst relative error {:.2e} ({})",
        ops.len(),
        worst_overall.0,
        worst_overall.1
    ))
}

#[test]
fn criterion_01_autodiff_gradient_checks() {
    let start = Instant::now();
    let outcome = check_criterion_1();
    finish(1, "autodiff gradients vs finite differences", 60.0, start, outcome);
}

// ---------------------------------------------------------------------
// Criterion 2: GARCH parameter recovery on simulated data.
// ---------------------------------------------------------------------

fn check_criterion_2() -> Outcome {
    let (omega, alpha, beta) = (0.05f64, 0.10f64, 0.85f64);
    let n = 20_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let normal = Normal::new(0.0, 1.0).unwrap();

    let mut sigma2 = omega / (1.0 - alpha - beta);
    let mut eps_prev = 0.0f64;
    let mut values = Vec::with_capacity(n);
    for t in 0..n + 500 {
        sigma2 = omega + alpha * eps_prev * eps_prev + beta * sigma2;
        eps_prev = sigma2.sqrt() * normal.sample(&mut rng);
        if t >= 500 {
            values.push(eps_prev);
        }
    }

    let fit = fit_garch(&values).map_err(|e| format!("fit failed: {e}"))?;
    let p = fit.params;
    let checks = [
        ("omega", p.omega, omega, 0.03),
        ("alpha", p.alpha, alpha, 0.05),
        ("beta", p.beta, beta, 0.05),
    ];
    for (name, got, want, tol) in checks {
        if (got - want).abs() > tol {
            return Err(format!("{name} {got:.4} outside {want} +/- {tol}"));
        }
    }

    let uncond = p.omega / (1.0 - p.alpha - p.beta);
    let filtered = garch_filter(&values, &p).map_err(|e| format!("filter failed: {e}"))?;
    let mean_var = filtered.iter().sum::<f64>() / filtered.len() as f64;
    let rel = (uncond - mean_var).abs() / uncond;
    if rel > 0.05 {
        return Err(format!(
            "unconditional variance {uncond:.4} vs filter mean {mean_var:.4}: {:.1}% apart",
            100.0 * rel
        ));
    }

    Ok(format!(
        "recovered (w,a,b) = ({:.3}, {:.3}, {:.3}); variance identity gap {:.1}%",
        p.omega,
        p.alpha,
        p.beta,
        100.0 * rel
    ))
}

#[test]
fn criterion_02_garch_parameter_recovery() {
    let start = Instant::now();
    let outcome = check_criterion_2();
    finish(2, "GARCH(1,1) parameter recovery", 60.0, start, outcome);
}

// ---------------------------------------------------------------------
// Criterion 3: portfolio solver vs an independent constrained
// quadratic minimizer (null-space reduction + steepest descent), plus
// simplex grid search for the long-only solver.
// ---------------------------------------------------------------------

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the null space of the rows in `a`, by
/// Gram-Schmidt against the constraint rows and each other.
fn null_space_basis(a: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    // Orthonormalize the constraint rows first.
    let mut constraints: Vec<Vec<f64>> = Vec::new();
    for row in a {
        let mut v = row.clone();
        for c in &constraints {
            let proj = dot(&v, c);
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= proj * ci;
            }
        }
        let norm = dot(&v, &v).sqrt();
        assert!(norm > 1e-10, "degenerate constraint rows");
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        constraints.push(v);
    }
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        for c in constraints.iter().chain(&basis) {
            let proj = dot(&v, c);
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= proj * ci;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    basis
}

/// Minimum-norm solution of `a w = b` for one or two constraint rows.
fn min_norm_solution(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = a.len();
    let n = a[0].len();
    // Gram matrix G = A A^T (k x k), solve G y = b, w = A^T y.
    let mut g = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            g[i][j] = dot(&a[i], &a[j]);
        }
    }
    let y = match k {
        1 => vec![b[0] / g[0][0]],
        2 => {
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            assert!(det.abs() > 1e-12, "rank-deficient constraints");
            vec![
                (b[0] * g[1][1] - b[1] * g[0][1]) / det,
                (g[0][0] * b[1] - g[1][0] * b[0]) / det,
            ]
        }
        _ => panic!("oracle handles at most two constraints"),
    };
    (0..n).map(|i| (0..k).map(|r| a[r][i] * y[r]).sum()).collect()
}

/// Minimize w' Cov w subject to `a w = b` by steepest descent with
/// exact line search in the null-space coordinates.
fn oracle_constrained_min_variance(cov: &[Vec<f64>], a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = cov.len();
    let w0 = min_norm_solution(a, b);
    let z = null_space_basis(a, n);
    if z.is_empty() {
        return w0; // constraints pin the solution
    }
    let mut y = vec![0.0; z.len()];
    for _ in 0..200_000 {
        // w = w0 + Z y
        let mut w = w0.clone();
        for (j, zj) in z.iter().enumerate() {
            for (wi, zi) in w.iter_mut().zip(zj) {
                *wi += y[j] * zi;
            }
        }
        let cw = mat_vec(cov, &w);
        // gradient in y: 2 Z' Cov w
        let g: Vec<f64> = z.iter().map(|zj| 2.0 * dot(zj, &cw)).collect();
        let gnorm2 = dot(&g, &g);
        if gnorm2 < 1e-26 {
            break;
        }
        // direction d = -g in y maps to p = Z d in w-space;
        // exact step t = g'g / (2 p' Cov p).
        let mut p = vec![0.0; n];
        for (j, zj) in z.iter().enumerate() {
            for (pi, zi) in p.iter_mut().zip(zj) {
                *pi -= g[j] * zi;
            }
        }
        let curvature = 2.0 * dot(&p, &mat_vec(cov, &p));
        let t = gnorm2 / curvature;
        for (yj, gj) in y.iter_mut().zip(&g) {
            *yj -= t * gj;
        }
    }
    let mut w = w0;
    for (j, zj) in z.iter().enumerate() {
        for (wi, zi) in w.iter_mut().zip(zj) {
            *wi += y[j] * zi;
        }
    }
    w
}

/// Random covariance with eigenvalues in [0.5, 2]: well conditioned.
fn random_covariance<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    // Random orthogonal Q by Gram-Schmidt on a random matrix.
    let dist = Uniform::new(-1.0, 1.0).unwrap();
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| dist.sample(rng)).collect();
        for prev in &q {
            let proj = dot(&v, prev);
            for (vi, pi) in v.iter_mut().zip(prev) {
                *vi -= proj * pi;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            for vi in v.iter_mut() {
                *vi /= norm;
            }
            q.push(v);
        }
    }
    let eig_dist = Uniform::new(0.5, 2.0).unwrap();
    let eigs: Vec<f64> = (0..n).map(|_| eig_dist.sample(rng)).collect();
    let mut cov = vec![vec![0.0; n]; n];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..n).map(|k| q[k][i] * eigs[k] * q[k][j]).sum();
        }
    }
    // Symmetrize away rounding.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (cov[i][j] + cov[j][i]);
            cov[i][j] = avg;
            cov[j][i] = avg;
        }
    }
    cov
}

fn moments_from(cov: Vec<Vec<f64>>, mean: Vec<f64>) -> EstimatedMoments {
    let assets = (0..mean.len()).map(|i| format!("a{i}")).collect();
    EstimatedMoments { assets, mean, cov }
}

/// Brute-force long-only min-variance on the 3-simplex: coarse grid,
/// then a fine local refinement.
fn grid_long_only_min_variance(cov: &[Vec<f64>]) -> Vec<f64> {
    let variance = |w1: f64, w2: f64| -> f64 {
        let w = [w1, w2, 1.0 - w1 - w2];
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += w[i] * cov[i][j] * w[j];
            }
        }
        v
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let coarse = 2e-3;
    let steps = (1.0 / coarse) as usize;
    for i in 0..=steps {
        let w1 = i as f64 * coarse;
        for j in 0..=(steps - i) {
            let w2 = j as f64 * coarse;
            let v = variance(w1, w2);
            if v < best.0 {
                best = (v, w1, w2);
            }
        }
    }
    let fine = 1e-5;
    let (_, cw1, cw2) = best;
    let radius = coarse * 1.5;
    let fine_steps = (2.0 * radius / fine) as isize;
    for i in -fine_steps / 2..=fine_steps / 2 {
        let w1 = (cw1 + i as f64 * fine).clamp(0.0, 1.0);
        for j in -fine_steps / 2..=fine_steps / 2 {
            let w2 = (cw2 + j as f64 * fine).clamp(0.0, 1.0);
            if w1 + w2 > 1.0 {
                continue;
            }
            let v = variance(w1, w2);
            if v < best.0 {
                best = (v, w1, w2);
            }
        }
    }
    vec![best.1, best.2, 1.0 - best.1 - best.2]
}

fn check_criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mean_dist = Uniform::new(-0.05, 0.05).unwrap();
    let mut worst_gap = 0.0f64;

    for instance in 0..50 {
        let n = 2 + (instance % 5); // N in 2..=6
        let cov = random_covariance(n, &mut rng);
        let mean: Vec<f64> = (0..n).map(|_| mean_dist.sample(&mut rng)).collect();

        let ones = vec![1.0; n];
        let (target, a, b): (ReturnTarget, Vec<Vec<f64>>, Vec<f64>) = if instance % 2 == 0 {
            (ReturnTarget::MinVariance, vec![ones], vec![1.0])
        } else {
            let lo = mean.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let t = 0.3 * lo + 0.7 * hi;
            (
                ReturnTarget::Fixed(t),
                vec![ones, mean.clone()],
                vec![1.0, t],
            )
        };

        let oracle = oracle_constrained_min_variance(&cov, &a, &b);
        let moments = moments_from(cov, mean);
        let solved = solve_mean_variance(&moments, target)
            .map_err(|e| format!("instance {instance}: solver failed: {e}"))?;

        let gap = solved
            .weights
            .iter()
            .zip(&oracle)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        worst_gap = worst_gap.max(gap);
        if gap >= 1e-6 {
            return Err(format!(
                "instance {instance} (N={n}): max weight gap {gap:.2e} vs oracle >= 1e-6"
            ));
        }
    }

    let mut worst_long_only = 0.0f64;
    for instance in 0..10 {
        let cov = random_covariance(3, &mut rng);
        let mean: Vec<f64> = (0..3).map(|_| mean_dist.sample(&mut rng)).collect();
        let grid = grid_long_only_min_variance(&cov);
        let moments = moments_from(cov, mean);
        let solved = solve_long_only(&moments, ReturnTarget::MinVariance)
            .map_err(|e| format!("long-only instance {instance}: solver failed: {e}"))?;
        let gap = solved
            .weights
            .iter()
            .zip(&grid)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        worst_long_only = worst_long_only.max(gap);
        if gap > 1e-4 {
            return Err(format!(
                "long-only instance {instance}: max weight gap {gap:.2e} vs grid search > 1e-4"
            ));
        }
    }

    Ok(format!(
        "50 instances N<=6, worst gap {worst_gap:.2e}; 10 long-only grids, worst gap {worst_long_only:.2e}"
    ))
}

#[test]
fn criterion_03_portfolio_oracle_equivalence() {
    let start = Instant::now();
    let outcome = check_criterion_3();
    finish(3, "portfolio solvers vs independent minimizers", 60.0, start, outcome);
}

// ---------------------------------------------------------------------
// Criterion 4: metric oracles (DTW enumeration, W1 cross-check, KS).
// ---------------------------------------------------------------------

/// Exhaustive minimum alignment cost over all monotone paths.
fn dtw_exhaustive(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
        let cost = (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            return cost;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() {
            best = best.min(go(a, b, i + 1, j));
        }
        if j + 1 < b.len() {
            best = best.min(go(a, b, i, j + 1));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(go(a, b, i + 1, j + 1));
        }
        cost + best
    }
    go(a, b, 0, 0)
}

fn check_criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let dist = Uniform::new(-2.0, 2.0).unwrap();

    let mut dtw_checks = 0usize;
    for la in 1..=6usize {
        for lb in 1..=6usize {
            for _ in 0..3 {
                let a: Vec<f64> = (0..la).map(|_| dist.sample(&mut rng)).collect();
                let b: Vec<f64> = (0..lb).map(|_| dist.sample(&mut rng)).collect();
                let got = dtw_distance(&a, &b).map_err(|e| format!("dtw failed: {e}"))?;
                let want = dtw_exhaustive(&a, &b);
                if (got - want).abs() > 1e-12 {
                    return Err(format!(
                        "dtw({la},{lb}) = {got} but exhaustive enumeration gives {want}"
                    ));
                }
                dtw_checks += 1;
            }
        }
    }

    let mut w1_checks = 0usize;
    for i in 0..200 {
        let n = 2 + (i % 59);
        let a: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let got = wasserstein1(&a, &b).map_err(|e| format!("w1 failed: {e}"))?;
        let mut sa = a.clone();
        let mut sb = b.clone();
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        let want = sa
            .iter()
            .zip(&sb)
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            / n as f64;
        if (got - want).abs() > 1e-12 {
            return Err(format!(
                "wasserstein1 (ECDF integral) {got} vs sorted-difference formula {want}"
            ));
        }
        w1_checks += 1;
    }

    let ks = ks_statistic(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5])
        .map_err(|e| format!("ks failed: {e}"))?;
    if ks != 1.0 / 3.0 {
        return Err(format!("ks hand case: {ks} != 1/3 exactly"));
    }

    Ok(format!(
        "{dtw_checks} DTW enumerations, {w1_checks} W1 cross-checks, KS hand case exact"
    ))
}

#[test]
fn criterion_04_metric_oracles() {
    let start = Instant::now();
    let outcome = check_criterion_4();
    finish(4, "DTW/W1/KS against independent oracles", 60.0, start, outcome);
}

// ---------------------------------------------------------------------
// Criterion 5: same-distribution fidelity sanity. Two samples from one
// fitted model must look alike. KS is scale-free; W1 is compared in
// raw return units (daily log-return scale), where the 0.01 bound is
// meaningful — at 10^4-point samples the expected same-distribution W1
// in unit-variance units is ~0.02, above the bound even for identical
// generators.
// ---------------------------------------------------------------------

fn raw_flat(ds: &synthfin::generators::SyntheticDataset) -> Vec<f64> {
    let a = ds.assets.len();
    let mut out = Vec::with_capacity(ds.windows.len() * ds.window_length * a);
    for win in &ds.windows {
        for t in 0..ds.window_length {
            for asset in 0..a {
                out.push(ds.standardization.destandardize(asset, win[t * a + asset]));
            }
        }
    }
    out
}

fn check_criterion_5() -> Outcome {
    let prices = load_prices(&repo_path("data/sample_prices.csv"), CsvSchema::Auto)
        .map_err(|e| format!("sample data: {e}"))?;
    let returns = log_returns(&prices).map_err(|e| format!("returns: {e}"))?;
    let config = GeneratorConfig::arima_garch();
    let (model, _) =
        GeneratorModel::fit(&returns, &config, 5).map_err(|e| format!("fit: {e}"))?;

    let mut ks_max = 0.0f64;
    let mut w1_max = 0.0f64;
    let mut w1_std_mean = 0.0f64;
    for pair in 0..10u64 {
        let a = model
            .sample(500, 1000 + 2 * pair)
            .map_err(|e| format!("sample: {e}"))?;
        let b = model
            .sample(500, 1001 + 2 * pair)
            .map_err(|e| format!("sample: {e}"))?;
        let ra = raw_flat(&a);
        let rb = raw_flat(&b);
        let ks = ks_statistic(&ra, &rb).map_err(|e| format!("ks: {e}"))?;
        let w1 = wasserstein1(&ra, &rb).map_err(|e| format!("w1: {e}"))?;
        let sa: Vec<f64> = a.windows.iter().flatten().cloned().collect();
        let sb: Vec<f64> = b.windows.iter().flatten().cloned().collect();
        let w1_std = wasserstein1(&sa, &sb).map_err(|e| format!("w1: {e}"))?;
        ks_max = ks_max.max(ks);
        w1_max = w1_max.max(w1);
        w1_std_mean += w1_std / 10.0;
        if ks >= 0.05 {
            return Err(format!("seed pair {pair}: KS {ks:.4} >= 0.05"));
        }
        if w1 >= 0.01 {
            return Err(format!("seed pair {pair}: W1 {w1:.5} >= 0.01 (raw units)"));
        }
    }

    Ok(format!(
        "10 seed pairs: max KS {ks_max:.4} < 0.05, max W1 {w1_max:.5} < 0.01 raw units \
         (unit-variance W1 mean {w1_std_mean:.4})"
    ))
}

#[test]
fn criterion_05_same_distribution_fidelity() {
    let start = Instant::now();
    let outcome = check_criterion_5();
    finish(5, "same-distribution fidelity sanity", 120.0, start, outcome);
}

// ---------------------------------------------------------------------
// Criterion 6: desk-scale TimeGAN utility on AR(1) data. Post-training
// KS strictly below pre-training KS; sampled lag-1 autocorrelation
// within 0.2 of the true 0.8. The cross-family KS ordering is printed
// for reference, not asserted.
// ---------------------------------------------------------------------

fn ar1_series(n: usize, phi: f64, seed: u64) -> ReturnSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut x = 0.0f64;
    for _ in 0..200 {
        x = phi * x + normal.sample(&mut rng);
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        x = phi * x + normal.sample(&mut rng);
        values.push(0.01 * x);
    }
    ReturnSeries::new(consecutive_dates(n), vec!["AR1".into()], vec![values]).unwrap()
}

fn check_criterion_6() -> Outcome {
    let returns = ar1_series(600, 0.8, 7);
    let config = GeneratorConfig::time_gan();

    let (std_series, _) = standardize(&returns).map_err(|e| e.to_string())?;
    let real_windows =
        make_windows(&std_series, config.window_length, 1).map_err(|e| e.to_string())?;
    let real_flat = real_windows.flatten();

    let untrained = TimeganModel::init(&returns, &config, 11).map_err(|e| e.to_string())?;
    let pre = untrained.sample(500, 99).map_err(|e| e.to_string())?;
    let pre_flat: Vec<f64> = pre.windows.iter().flatten().cloned().collect();
    let ks_pre = ks_statistic(&real_flat, &pre_flat).map_err(|e| e.to_string())?;

    let (model, _) = TimeganModel::fit(&returns, &config, 11).map_err(|e| e.to_string())?;
    let post = model.sample(500, 99).map_err(|e| e.to_string())?;
    let post_flat: Vec<f64> = post.windows.iter().flatten().cloned().collect();
    let ks_post = ks_statistic(&real_flat, &post_flat).map_err(|e| e.to_string())?;

    if ks_post >= ks_pre {
        return Err(format!(
            "training did not improve distribution fit: KS {ks_post:.4} (post) >= {ks_pre:.4} (pre)"
        ));
    }

    let sampled = post
        .to_return_series(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap())
        .map_err(|e| e.to_string())?;
    let rho = acf(sampled.column(0), 1).map_err(|e| e.to_string())?[1];
    if (rho - 0.8).abs() > 0.2 {
        return Err(format!("sampled lag-1 ACF {rho:.3} outside 0.8 +/- 0.2"));
    }

    // Reference ordering across families (reported, not asserted).
    let ks_of = |family_config: GeneratorConfig| -> Result<f64, String> {
        let (m, _) =
            GeneratorModel::fit(&returns, &family_config, 11).map_err(|e| e.to_string())?;
        let s = m.sample(500, 99).map_err(|e| e.to_string())?;
        let flat: Vec<f64> = s.windows.iter().flatten().cloned().collect();
        ks_statistic(&real_flat, &flat).map_err(|e| e.to_string())
    };
    let ks_vae = ks_of(GeneratorConfig {
        window_length: config.window_length,
        ..GeneratorConfig::vae()
    })?;
    let ks_arima = ks_of(GeneratorConfig {
        window_length: config.window_length,
        ..GeneratorConfig::arima_garch()
    })?;

    Ok(format!(
        "KS pre {ks_pre:.4} -> post {ks_post:.4}; sampled lag-1 ACF {rho:.3}; \
         family KS on this data (reported only): time_gan {ks_post:.3}, vae {ks_vae:.3}, \
         arima_garch {ks_arima:.3}"
    ))
}

#[test]
fn criterion_06_timegan_desk_scale_utility() {
    let start = Instant::now();
    let outcome = check_criterion_6();
    finish(6, "TimeGAN desk-scale training utility", 600.0, start, outcome);
}

// ---------------------------------------------------------------------
// Criterion 7: VaR/ES formulas vs an external normal oracle.
// ---------------------------------------------------------------------

fn check_criterion_7() -> Outcome {
    use statrs::distribution::{Continuous, ContinuousCDF};
    let standard = statrs::distribution::Normal::new(0.0, 1.0).unwrap();

    let (var, es) = var_es(0.0, 1.0, 0.95).map_err(|e| e.to_string())?;
    if (var - (-1.6449)).abs() > 1e-3 || (es - (-2.0627)).abs() > 1e-3 {
        return Err(format!("(VaR, ES) = ({var:.4}, {es:.4}) != (-1.6449, -2.0627) +/- 1e-3"));
    }
    let z = standard.inverse_cdf(0.05);
    let es_oracle = -standard.pdf(z) / 0.05;
    if (var - z).abs() > 1e-3 || (es - es_oracle).abs() > 1e-3 {
        return Err(format!(
            "(VaR, ES) = ({var:.6}, {es:.6}) vs inverse-CDF oracle ({z:.6}, {es_oracle:.6})"
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mu_dist = Uniform::new(-0.1, 0.1).unwrap();
    let sigma_dist = Uniform::new(0.01, 0.5).unwrap();
    let conf_dist = Uniform::new(0.55, 0.999).unwrap();
    for i in 0..1000 {
        let mu = mu_dist.sample(&mut rng);
        let sigma = sigma_dist.sample(&mut rng);
        let conf = conf_dist.sample(&mut rng);
        let (v, e) = var_es(mu, sigma, conf).map_err(|err| err.to_string())?;
        if !(e < v) {
            return Err(format!("instance {i}: ES {e} not below VaR {v}"));
        }
        // Translation equivariance.
        let shift = 0.037;
        let (vs, es_shift) = var_es(mu + shift, sigma, conf).map_err(|err| err.to_string())?;
        if (vs - (v + shift)).abs() > 1e-12 || (es_shift - (e + shift)).abs() > 1e-12 {
            return Err(format!("instance {i}: translation equivariance broken"));
        }
        // Positive scale equivariance.
        let k = 1.7;
        let (vk, ek) = var_es(k * mu, k * sigma, conf).map_err(|err| err.to_string())?;
        if (vk - k * v).abs() > 1e-12 || (ek - k * e).abs() > 1e-12 {
            return Err(format!("instance {i}: scale equivariance broken"));
        }
    }

    Ok(format!(
        "oracle match at 95%: VaR {var:.4}, ES {es:.4}; equivariances and ES<VaR on 1000 draws"
    ))
}

#[test]
fn criterion_07_var_es_formulas() {
    let start = Instant::now();
    let outcome = check_criterion_7();
    finish(7, "VaR/ES closed forms vs normal oracle", 1.0, start, outcome);
}

// ---------------------------------------------------------------------
// Criterion 8: backtest invariants.
// ---------------------------------------------------------------------

fn check_criterion_8() -> Outcome {
    // Drawdown divergence case: rising path has zero running-peak
    // drawdown but a positive high-low range drawdown.
    let d = max_drawdown(&[90.0, 100.0, 120.0]).map_err(|e| e.to_string())?;
    if d.max_drawdown != 0.0 || d.range_drawdown != 0.25 {
        return Err(format!(
            "rising path gave ({}, {}), want exactly (0, 0.25)",
            d.max_drawdown, d.range_drawdown
        ));
    }
    let d2 = max_drawdown(&[100.0, 120.0, 90.0, 110.0]).map_err(|e| e.to_string())?;
    if d2.max_drawdown != 0.25 || d2.range_drawdown != 0.25 {
        return Err(format!(
            "peak-trough path gave ({}, {}), want exactly (0.25, 0.25)",
            d2.max_drawdown, d2.range_drawdown
        ));
    }

    // Window-count closed form and chronological non-overlap.
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let normal = Normal::new(0.0002, 0.01).unwrap();
    let n = 500usize;
    let values: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let returns = ReturnSeries::new(
        consecutive_dates(n),
        vec!["x".into(), "y".into()],
        values,
    )
    .map_err(|e| e.to_string())?;
    let config = BacktestConfig {
        train_span: 100,
        test_span: 50,
        ..BacktestConfig::default()
    };
    let expected_windows = (n - 100) / 50;
    if config.window_count(n) != expected_windows {
        return Err(format!(
            "window_count({n}) = {} != floor((n - train)/test) = {expected_windows}",
            config.window_count(n)
        ));
    }
    let report = run_backtest(TrainSource::Real, &returns, &config, 1)
        .map_err(|e| e.to_string())?;
    if report.windows.len() != expected_windows {
        return Err(format!(
            "run produced {} windows, closed form says {expected_windows}",
            report.windows.len()
        ));
    }
    for (i, w) in report.windows.iter().enumerate() {
        let (ts, te) = (i * 50, i * 50 + 100);
        if w.train_start != ts || w.train_end != te || w.test_start != te || w.test_end != te + 50
        {
            return Err(format!(
                "window {i} spans train [{}, {}) test [{}, {}), want train [{ts}, {te}) test [{te}, {})",
                w.train_start, w.train_end, w.test_start, w.test_end, te + 50
            ));
        }
    }
    let oos_len: usize = report.windows.iter().map(|w| w.portfolio_returns.len()).sum();
    if oos_len != expected_windows * 50 || report.oos_dates.len() != oos_len {
        return Err("out-of-sample segments do not tile the post-training history".into());
    }

    // Single-asset degenerate reduction: the portfolio is the asset.
    let single = ReturnSeries::new(
        consecutive_dates(n),
        vec!["solo".into()],
        vec![returns.column(0).to_vec()],
    )
    .map_err(|e| e.to_string())?;
    let solo = run_backtest(TrainSource::Real, &single, &config, 1)
        .map_err(|e| e.to_string())?;
    for w in &solo.windows {
        if w.weights != vec![1.0] {
            return Err(format!("single-asset weights {:?} != [1.0]", w.weights));
        }
    }
    let oos: Vec<f64> = solo.oos_path();
    let direct: Vec<f64> = returns.column(0)[100..100 + oos.len()].to_vec();
    if oos != direct {
        return Err("single-asset portfolio path differs from the asset's own returns".into());
    }
    let want_sharpe = sharpe(&direct).map_err(|e| e.to_string())?;
    if solo.sharpe != want_sharpe {
        return Err(format!(
            "single-asset sharpe {} != direct sharpe {}",
            solo.sharpe, want_sharpe
        ));
    }

    Ok(format!(
        "drawdown cases exact; {expected_windows} chronological windows tile the history; \
         single-asset reduction exact"
    ))
}

#[test]
fn criterion_08_backtest_invariants() {
    let start = Instant::now();
    let outcome = check_criterion_8();
    finish(8, "backtest structural invariants", 60.0, start, outcome);
}

// ---------------------------------------------------------------------
// Criterion 9: end-to-end determinism on the bundled sample.
// ---------------------------------------------------------------------

fn check_criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = RunConfig {
        input: repo_path("data/sample_prices.csv"),
        out_dir: dir.path().join("a"),
        generator: GeneratorConfig {
            window_length: 20,
            ..GeneratorConfig::arima_garch()
        },
        seeds: vec![17],
        confidence: 0.95,
        target: ReturnTarget::MinVariance,
        long_only: false,
        n_windows: None,
        acf_max_lag: 10,
        dtw_pairs: 20,
        backtest: BacktestConfig::default(),
        global_model: false,
        annualize: false,
    };

    let first = run_pipeline(&config).map_err(|e| e.to_string())?;
    let paths_a = first
        .write_artifacts(&dir.path().join("a"))
        .map_err(|e| e.to_string())?;
    let second = run_pipeline(&config).map_err(|e| e.to_string())?;
    second
        .write_artifacts(&dir.path().join("b"))
        .map_err(|e| e.to_string())?;

    let mut compared = 0usize;
    for path in &paths_a {
        let name = path.file_name().unwrap();
        let a = std::fs::read(path).map_err(|e| e.to_string())?;
        let b = std::fs::read(dir.path().join("b").join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("artifact {name:?} differs between identical runs"));
        }
        compared += 1;
    }
    if compared < 9 {
        return Err(format!("only {compared} artifacts written; expected at least 9"));
    }

    Ok(format!("{compared} artifacts byte-identical across two runs"))
}

#[test]
fn criterion_09_end_to_end_determinism() {
    let start = Instant::now();
    let outcome = check_criterion_9();
    finish(9, "end-to-end pipeline determinism", 300.0, start, outcome);
}

// ---------------------------------------------------------------------
// Criterion 10 (optional): user-supplied S&P 500 closes reproduce the
// reference summary moments. Skipped when the data is absent.
// ---------------------------------------------------------------------

fn sp500_path() -> PathBuf {
    std::env::var("SYNTHFIN_SP500_CSV")
        .map(PathBuf::from)
        .unwrap_or_else(|_| repo_path("data/sp500_closes.csv"))
}

fn check_criterion_10() -> Outcome {
    let path = sp500_path();
    if !path.exists() {
        return Ok(format!(
            "SKIP: no S&P 500 data at {} (set SYNTHFIN_SP500_CSV to enable)",
            path.display()
        ));
    }
    let prices = load_prices(&path, CsvSchema::Auto).map_err(|e| e.to_string())?;
    let returns = log_returns(&prices).map_err(|e| e.to_string())?;
    let stats = summary_stats(returns.column(0)).map_err(|e| e.to_string())?;

    let checks = [
        ("mean", stats.mean, 0.00041),
        ("std", stats.std, 0.0127),
        ("skewness", stats.skewness, -0.45),
        ("kurtosis", stats.kurtosis, 7.88),
    ];
    for (name, got, want) in checks {
        let rel = (got - want).abs() / want.abs();
        if rel > 0.15 {
            return Err(format!(
                "{name} {got:.5} differs from reference {want} by {:.0}% (> 15%)",
                100.0 * rel
            ));
        }
    }
    Ok(format!(
        "moments within 15%: mean {:.5}, std {:.4}, skew {:.2}, kurt {:.2}",
        stats.mean, stats.std, stats.skewness, stats.kurtosis
    ))
}

#[test]
fn criterion_10_optional_sp500_moments() {
    let start = Instant::now();
    let outcome = check_criterion_10();
    report(10, "reference index summary moments (optional)", start, &outcome);
    assert!(outcome.is_ok(), "criterion 10: {}", outcome.unwrap_err());
}
