//! Projected ascent for the concave training objective.
//!
//! Each iteration picks an ascent direction, projects `x + t d` onto the
//! feasible box and backtracks on `t` (start 1.0, shrink 0.5) until the Armijo
//! sufficient-increase test holds along the projection arc.
//!
//! With [`StepRule::Newton`] (default) the direction is the gradient scaled by
//! the inverse negated Hessian restricted to the free coordinates; coordinates
//! sitting on a bound with the gradient pushing outward take a plain gradient
//! step instead (two-metric projection). The Hessian has arrow structure
//! (diagonal over `s`, dense over the `M + 1` weights), so the scaled direction
//! costs one `(M+1) x (M+1)` solve. [`StepRule::Gradient`] is plain projected
//! gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::regularized_solve;
use super::SolverError;
use crate::model::{Curvature, LikelihoodDesign, ModelParams, TrainingView};
use crate::netdata::{AdoptionMatrix, NetworkStack};

const ARMIJO_SIGMA: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;
const ACTIVE_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    Newton,
    Gradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub max_iters: usize,
    /// Tolerance on the infinity norm of the projected gradient.
    pub grad_tol: f64,
    /// Tolerance on the relative objective change between iterates.
    pub obj_tol: f64,
    /// Starting composite weight; `None` means `1 / M`.
    pub init_alpha: Option<f64>,
    pub init_s: f64,
    /// Multiplicative jitter on the start, drawn uniformly from `[1 - j, 1 + j]`.
    pub init_jitter: f64,
    pub allow_negative_alpha: bool,
    pub fix_s_to_zero: bool,
    pub fix_alpha_to_zero: bool,
    pub step: StepRule,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            grad_tol: 1e-6,
            obj_tol: 1e-9,
            init_alpha: None,
            init_s: 0.1,
            init_jitter: 0.0,
            allow_negative_alpha: false,
            fix_s_to_zero: false,
            fix_alpha_to_zero: false,
            step: StepRule::Newton,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::InvalidConfig(msg.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.grad_tol > 0.0) || !(self.obj_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.init_s >= 0.0) || !self.init_s.is_finite() {
            return bad("init_s must be finite and non-negative");
        }
        if let Some(a) = self.init_alpha {
            if !a.is_finite() || (a < 0.0 && !self.allow_negative_alpha) {
                return bad("init_alpha must be finite and non-negative");
            }
        }
        if !(0.0..1.0).contains(&self.init_jitter) {
            return bad("init_jitter must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Feasible region of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Fixed,
    NonNegative,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// Infinity norm of the projected gradient at the returned point.
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    pub record: ConvergenceRecord,
    pub initial_objective: f64,
    /// Objective after each iteration, starting with the initial point.
    pub trace: Vec<f64>,
    /// Smallest value any sign-constrained coordinate took over all iterates,
    /// `+inf` when none is constrained.
    pub min_constrained: f64,
}

/// Fits on every user's terms with every adopter as evidence.
pub fn fit_mle(
    stack: &NetworkStack,
    adoptions: &AdoptionMatrix,
    train_apps: &[usize],
    cfg: &FitConfig,
) -> Result<FitResult, SolverError> {
    fit_mle_view(stack, adoptions, train_apps, &TrainingView::all(adoptions.num_users()), cfg, None)
}

/// General form: likelihood rows and potential evidence restricted by `view`,
/// optional explicit starting point (projected onto the feasible set).
pub fn fit_mle_view(
    stack: &NetworkStack,
    adoptions: &AdoptionMatrix,
    train_apps: &[usize],
    view: &TrainingView,
    cfg: &FitConfig,
    start: Option<&ModelParams>,
) -> Result<FitResult, SolverError> {
    cfg.validate()?;
    if train_apps.is_empty() {
        return Err(SolverError::EmptyTrainingSet);
    }
    let design = LikelihoodDesign::build(stack, adoptions, train_apps, view)?;
    let num_users = design.num_users();
    let m = design.num_networks();

    let mut bounds = coordinate_bounds(num_users, m, view, cfg, stack.popularity().is_some());
    // unidentified weights are reported as zero
    for (b, silent) in bounds[num_users..].iter_mut().zip(design.silent_weights()) {
        if silent {
            *b = Bound::Fixed;
        }
    }
    let mut theta = match start {
        Some(p) => {
            if p.num_users() != num_users || p.num_networks() != m {
                return Err(SolverError::InvalidConfig("starting point has the wrong shape".into()));
            }
            p.to_vector()
        }
        None => default_start(num_users, m, cfg, stack, train_apps),
    };
    project(&mut theta, &bounds);
    if let Some(bad) = theta.iter().find(|v| !v.is_finite()) {
        return Err(SolverError::InvalidConfig(format!("non-finite starting value {bad}")));
    }

    let constrained = !cfg.allow_negative_alpha;
    let to_params = |theta: &[f64]| ModelParams::from_vector(theta, num_users, m, constrained);

    let mut eval = design.evaluate(&theta, cfg.step == StepRule::Newton);
    if eval.value.is_nan() {
        return Err(SolverError::NonFinite { iteration: 0, params: Box::new(to_params(&theta)) });
    }
    let initial_objective = eval.value;
    let mut trace = vec![eval.value];
    let mut min_constrained = min_nonnegative(&theta, &bounds);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let pg = projected_gradient_norm(&theta, &eval.gradient, &bounds);
        if pg < cfg.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut step = match (cfg.step, eval.curvature.as_ref()) {
            (StepRule::Newton, Some(curv)) => newton_direction(&theta, &eval.gradient, curv, &bounds, num_users, m, pg),
            _ => gradient_direction(&eval.gradient, &bounds),
        };
        let mut accepted = line_search(&design, &theta, eval.value, &eval.gradient, &step, &bounds);
        if accepted.is_none() && step.scaled {
            step = gradient_direction(&eval.gradient, &bounds);
            accepted = line_search(&design, &theta, eval.value, &eval.gradient, &step, &bounds);
        }
        let Some((next, value)) = accepted else {
            // no representable increase along either direction
            converged = pg < cfg.grad_tol;
            break;
        };
        if value.is_nan() {
            return Err(SolverError::NonFinite { iteration: iterations, params: Box::new(to_params(&next)) });
        }
        let change = (value - eval.value).abs();
        theta = next;
        min_constrained = min_constrained.min(min_nonnegative(&theta, &bounds));
        eval = design.evaluate(&theta, cfg.step == StepRule::Newton);
        trace.push(eval.value);
        if change <= cfg.obj_tol * eval.value.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    let grad_norm = projected_gradient_norm(&theta, &eval.gradient, &bounds);
    Ok(FitResult {
        params: to_params(&theta),
        record: ConvergenceRecord { iterations, final_objective: eval.value, converged, grad_norm },
        initial_objective,
        trace,
        min_constrained,
    })
}

fn min_nonnegative(theta: &[f64], bounds: &[Bound]) -> f64 {
    theta.iter().zip(bounds).filter(|(_, b)| **b == Bound::NonNegative).map(|(&t, _)| t).fold(f64::INFINITY, f64::min)
}

fn coordinate_bounds(
    num_users: usize,
    m: usize,
    view: &TrainingView,
    cfg: &FitConfig,
    has_popularity: bool,
) -> Vec<Bound> {
    let mut bounds = Vec::with_capacity(num_users + m + 1);
    bounds
        .extend(view.rows.iter().map(|&row| if cfg.fix_s_to_zero || !row { Bound::Fixed } else { Bound::NonNegative }));
    let alpha_bound = if cfg.fix_alpha_to_zero {
        Bound::Fixed
    } else if cfg.allow_negative_alpha {
        Bound::Free
    } else {
        Bound::NonNegative
    };
    bounds.extend(std::iter::repeat_n(alpha_bound, m));
    bounds.push(if has_popularity { Bound::NonNegative } else { Bound::Fixed });
    bounds
}

fn default_start(num_users: usize, m: usize, cfg: &FitConfig, stack: &NetworkStack, train_apps: &[usize]) -> Vec<f64> {
    let init_alpha = cfg.init_alpha.unwrap_or(if m == 0 { 0.0 } else { 1.0 / m as f64 });
    // popularity is an install count; start its weight at the same scale as one
    // network's contribution per unit of mean popularity
    let mean_pop = train_apps.iter().map(|&a| stack.popularity_of(a)).sum::<f64>() / train_apps.len() as f64;
    let init_pop = if m == 0 { 0.1 } else { init_alpha } / mean_pop.max(1.0);
    let mut theta = vec![cfg.init_s; num_users];
    theta.extend(std::iter::repeat_n(init_alpha, m));
    theta.push(init_pop);
    if cfg.init_jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for t in theta.iter_mut() {
            *t *= 1.0 + rng.random_range(-cfg.init_jitter..=cfg.init_jitter);
        }
    }
    theta
}

fn project(theta: &mut [f64], bounds: &[Bound]) {
    for (t, b) in theta.iter_mut().zip(bounds) {
        match b {
            Bound::Fixed => *t = 0.0,
            Bound::NonNegative => *t = t.max(0.0),
            Bound::Free => {}
        }
    }
}

fn projected_gradient_norm(theta: &[f64], grad: &[f64], bounds: &[Bound]) -> f64 {
    theta
        .iter()
        .zip(grad)
        .zip(bounds)
        .map(|((&t, &g), b)| match b {
            Bound::Fixed => 0.0,
            Bound::NonNegative => ((t + g).max(0.0) - t).abs(),
            Bound::Free => g.abs(),
        })
        .fold(0.0, f64::max)
}

struct Direction {
    d: Vec<f64>,
    /// Coordinates moved by the scaled step (predicted gain `t g_i d_i`);
    /// the rest use the projected-arc gain `g_i (x_i(t) - x_i)`.
    scaled_mask: Vec<bool>,
    scaled: bool,
}

fn gradient_direction(grad: &[f64], bounds: &[Bound]) -> Direction {
    let d = grad.iter().zip(bounds).map(|(&g, b)| if *b == Bound::Fixed { 0.0 } else { g }).collect();
    Direction { d, scaled_mask: vec![false; grad.len()], scaled: false }
}

fn newton_direction(
    theta: &[f64],
    grad: &[f64],
    curv: &Curvature,
    bounds: &[Bound],
    num_users: usize,
    m: usize,
    pg_norm: f64,
) -> Direction {
    let width = m + 1;
    let n = theta.len();
    let margin = ACTIVE_MARGIN.min(pg_norm);
    let diag = |i: usize| if i < num_users { curv.ss[i] } else { curv.ww[(i - num_users) * width + (i - num_users)] };

    // free set: not fixed, has curvature, and not pinned at the bound
    let mut free = vec![false; n];
    for i in 0..n {
        free[i] = match bounds[i] {
            Bound::Fixed => false,
            _ if !(diag(i) > 0.0) => false,
            Bound::NonNegative => !(theta[i] <= margin && grad[i] < 0.0),
            Bound::Free => true,
        };
    }

    let free_w: Vec<usize> = (0..width).filter(|&k| free[num_users + k]).collect();
    let nw = free_w.len();
    let mut schur = vec![0.0; nw * nw];
    let mut rhs = vec![0.0; nw];
    for (a, &ka) in free_w.iter().enumerate() {
        rhs[a] = grad[num_users + ka];
        for (b, &kb) in free_w.iter().enumerate() {
            schur[a * nw + b] = curv.ww[ka * width + kb];
        }
    }
    for u in (0..num_users).filter(|&u| free[u]) {
        let row = &curv.sw[u * width..(u + 1) * width];
        let inv = 1.0 / curv.ss[u];
        for (a, &ka) in free_w.iter().enumerate() {
            rhs[a] -= row[ka] * grad[u] * inv;
            for (b, &kb) in free_w.iter().enumerate() {
                schur[a * nw + b] -= row[ka] * row[kb] * inv;
            }
        }
    }
    let Some(dw) = regularized_solve(&schur, &rhs) else {
        return gradient_direction(grad, bounds);
    };

    let mut d = vec![0.0; n];
    for (a, &ka) in free_w.iter().enumerate() {
        d[num_users + ka] = dw[a];
    }
    for u in (0..num_users).filter(|&u| free[u]) {
        let row = &curv.sw[u * width..(u + 1) * width];
        let coupled: f64 = free_w.iter().enumerate().map(|(a, &ka)| row[ka] * dw[a]).sum();
        d[u] = (grad[u] - coupled) / curv.ss[u];
    }
    for i in 0..n {
        if !free[i] && bounds[i] != Bound::Fixed {
            d[i] = grad[i];
        }
    }
    if d.iter().any(|v| !v.is_finite()) {
        return gradient_direction(grad, bounds);
    }
    Direction { d, scaled_mask: free, scaled: true }
}

fn line_search(
    design: &LikelihoodDesign,
    theta: &[f64],
    value: f64,
    grad: &[f64],
    dir: &Direction,
    bounds: &[Bound],
) -> Option<(Vec<f64>, f64)> {
    let mut t = 1.0;
    let mut trial = vec![0.0; theta.len()];
    for _ in 0..MAX_BACKTRACKS {
        for i in 0..theta.len() {
            trial[i] = theta[i] + t * dir.d[i];
        }
        project(&mut trial, bounds);
        let predicted: f64 = (0..theta.len())
            .map(|i| if dir.scaled_mask[i] { t * grad[i] * dir.d[i] } else { grad[i] * (trial[i] - theta[i]) })
            .sum();
        if !(predicted > 0.0) {
            return None;
        }
        let candidate = design.value(&trial);
        if candidate.is_nan() {
            return Some((trial, candidate));
        }
        if candidate >= value + ARMIJO_SIGMA * predicted {
            return Some((trial, candidate));
        }
        t *= ARMIJO_SHRINK;
    }
    None
}
