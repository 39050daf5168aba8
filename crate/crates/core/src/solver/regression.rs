//! Non-negative linear regression baseline and the random-guess baseline.
//!
//! The regression replaces the exponential link with a linear score over
//! `(p^1..p^M, C^a, apps_per_user(u), 1)`, all coefficients `>= 0`, fitted by
//! least squares on the 0/1 adoption targets. Predictions are clipped to `[0, 1]`.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::regularized_solve;
use super::{FitConfig, SolverError};
use crate::model::{potential_table, TrainingView};
use crate::netdata::{AdoptionMatrix, NetworkStack};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionParams {
    pub alpha: Vec<f64>,
    pub alpha_pop: f64,
    /// Coefficient on the user's install count over training apps.
    pub activity_weight: f64,
    pub intercept: f64,
    /// Per-user activity feature used at fit time.
    pub activity: Vec<f64>,
    /// Sum of squared residuals at the solution.
    pub objective: f64,
}

impl RegressionParams {
    /// Linear score clipped to `[0, 1]`.
    pub fn score(&self, potentials: &[f64], popularity: f64, activity: f64) -> f64 {
        let linear: f64 = self.alpha.iter().zip(potentials).map(|(a, p)| a * p).sum::<f64>()
            + self.alpha_pop * popularity
            + self.activity_weight * activity
            + self.intercept;
        linear.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub coefficients: Vec<f64>,
    /// `||F beta - y||^2`.
    pub objective: f64,
    pub iterations: usize,
}

/// Minimizes `||F beta - y||^2` over `beta >= 0` for dense row-major `features`
/// with `targets.len()` rows.
pub fn nnls(features: &[f64], targets: &[f64], dim: usize) -> NnlsSolution {
    assert_eq!(features.len(), targets.len() * dim, "feature matrix shape");
    let mut gram = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    for (row, &y) in features.chunks_exact(dim).zip(targets) {
        accumulate(&mut gram, &mut rhs, row, y);
    }
    let yy: f64 = targets.iter().map(|y| y * y).sum();
    nnls_gram(&gram, &rhs, yy, 200_000)
}

fn accumulate(gram: &mut [f64], rhs: &mut [f64], row: &[f64], y: f64) {
    let dim = row.len();
    for i in 0..dim {
        rhs[i] += row[i] * y;
        for j in 0..dim {
            gram[i * dim + j] += row[i] * row[j];
        }
    }
}

/// NNLS on the normal equations: minimizes `b' G b - 2 r' b + yy` over `b >= 0`.
///
/// Projected gradient on the Jacobi-scaled quadratic; every few iterations the
/// current support is solved exactly and accepted once it satisfies the KKT
/// conditions.
pub fn nnls_gram(gram: &[f64], rhs: &[f64], yy: f64, max_iters: usize) -> NnlsSolution {
    let dim = rhs.len();
    let scale: Vec<f64> = (0..dim)
        .map(|i| {
            let d = gram[i * dim + i];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    // scaled problem: minimize 0.5 y'Qy - c'y, Q = SGS, c = S r
    let q: Vec<f64> = (0..dim * dim).map(|k| gram[k] * scale[k / dim] * scale[k % dim]).collect();
    let c: Vec<f64> = (0..dim).map(|i| rhs[i] * scale[i]).collect();
    let active_dim = scale.iter().filter(|&&s| s > 0.0).count().max(1);
    let step = 1.0 / active_dim as f64;

    let grad = |y: &[f64]| -> Vec<f64> {
        (0..dim).map(|i| (0..dim).map(|j| q[i * dim + j] * y[j]).sum::<f64>() - c[i]).collect()
    };
    let kkt_ok = |y: &[f64], g: &[f64]| {
        let tol = 1e-12 * (1.0 + c.iter().map(|v| v.abs()).fold(0.0, f64::max));
        (0..dim).all(|i| scale[i] == 0.0 || if y[i] > 0.0 { g[i].abs() <= tol } else { g[i] >= -tol })
    };

    let mut y = vec![0.0; dim];
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let g = grad(&y);
        for i in 0..dim {
            y[i] = if scale[i] > 0.0 { (y[i] - step * g[i]).max(0.0) } else { 0.0 };
        }
        if iterations % 10 == 0 || iterations == 1 {
            if let Some(exact) = solve_support(&q, &c, &y, &scale) {
                if kkt_ok(&exact, &grad(&exact)) {
                    y = exact;
                    break;
                }
            }
        }
    }
    let coefficients: Vec<f64> = y.iter().zip(&scale).map(|(v, s)| v * s).collect();
    let quad: f64 = (0..dim)
        .map(|i| coefficients[i] * ((0..dim).map(|j| gram[i * dim + j] * coefficients[j]).sum::<f64>() - 2.0 * rhs[i]))
        .sum();
    NnlsSolution { coefficients, objective: (quad + yy).max(0.0), iterations }
}

/// Unconstrained minimizer over the support of `y`, if it stays non-negative.
fn solve_support(q: &[f64], c: &[f64], y: &[f64], scale: &[f64]) -> Option<Vec<f64>> {
    let dim = c.len();
    let support: Vec<usize> = (0..dim).filter(|&i| y[i] > 0.0 && scale[i] > 0.0).collect();
    let mut out = vec![0.0; dim];
    if support.is_empty() {
        return Some(out);
    }
    let n = support.len();
    let sub: Vec<f64> = (0..n * n).map(|k| q[support[k / n] * dim + support[k % n]]).collect();
    let rhs: Vec<f64> = support.iter().map(|&i| c[i]).collect();
    let sol = regularized_solve(&sub, &rhs)?;
    if sol.iter().any(|&v| v < 0.0) {
        return None;
    }
    for (k, &i) in support.iter().enumerate() {
        out[i] = sol[k];
    }
    Some(out)
}

/// Fits the regression over every user and every adopter as evidence.
pub fn fit_regression(
    stack: &NetworkStack,
    adoptions: &AdoptionMatrix,
    train_apps: &[usize],
    cfg: &FitConfig,
) -> Result<RegressionParams, SolverError> {
    fit_regression_view(stack, adoptions, train_apps, &TrainingView::all(adoptions.num_users()), cfg)
}

pub fn fit_regression_view(
    stack: &NetworkStack,
    adoptions: &AdoptionMatrix,
    train_apps: &[usize],
    view: &TrainingView,
    cfg: &FitConfig,
) -> Result<RegressionParams, SolverError> {
    cfg.validate()?;
    if train_apps.is_empty() {
        return Err(SolverError::EmptyTrainingSet);
    }
    let m = stack.num_networks();
    let dim = m + 3;
    let activity: Vec<f64> = adoptions.apps_per_user_in(train_apps).into_iter().map(|c| c as f64).collect();
    let mut gram = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    let mut yy = 0.0;
    let mut row = vec![0.0; dim];
    for &a in train_apps {
        let x = adoptions.adopter_vector(a);
        let evidence: Vec<bool> = x.iter().zip(&view.evidence).map(|(&xi, &e)| xi && e).collect();
        let table = potential_table(stack, &evidence, stack.popularity_of(a))?;
        for u in (0..adoptions.num_users()).filter(|&u| view.rows[u]) {
            for (k, p) in table.per_network.iter().enumerate() {
                row[k] = p[u];
            }
            row[m] = table.popularity;
            row[m + 1] = activity[u];
            row[m + 2] = 1.0;
            let y = if x[u] { 1.0 } else { 0.0 };
            accumulate(&mut gram, &mut rhs, &row, y);
            yy += y;
        }
    }
    let sol = nnls_gram(&gram, &rhs, yy, cfg.max_iters.max(1000) * 20);
    Ok(RegressionParams {
        alpha: sol.coefficients[..m].to_vec(),
        alpha_pop: sol.coefficients[m],
        activity_weight: sol.coefficients[m + 1],
        intercept: sol.coefficients[m + 2],
        activity,
        objective: sol.objective,
    })
}

/// I.i.d. uniform scores in the open interval `(0, 1)`.
pub fn random_baseline(num_users: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_users).map(|_| rng.sample(Open01)).collect()
}
