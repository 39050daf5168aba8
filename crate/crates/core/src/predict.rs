//! Per-user adoption scores for one app under the three observation regimes:
//! standard (all other users' adoptions known), future (only early adopters
//! known) and transfer (users never seen in training).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{adoption_probability, composite_potential, potential_table, ModelError, ModelParams};
use crate::netdata::NetworkStack;
use crate::solver::RegressionParams;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSheet {
    pub app_id: usize,
    /// One score per user, in `[0, 1]`.
    pub scores: Vec<f64>,
    /// Users that are ranked, ascending.
    pub evaluated_users: Vec<usize>,
    /// Users whose adoption bits conditioned the scores, ascending.
    pub evidence_users: Vec<usize>,
}

impl PredictionSheet {
    pub fn num_users(&self) -> usize {
        self.scores.len()
    }

    /// `app_id,user_id,score,evaluated` rows (no header).
    pub fn write_csv(&self, out: &mut String) {
        let mut evaluated = vec![false; self.scores.len()];
        for &u in &self.evaluated_users {
            evaluated[u] = true;
        }
        for (u, s) in self.scores.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", self.app_id, u, s, u8::from(evaluated[u]));
        }
    }
}

/// CSV header matching [`PredictionSheet::write_csv`].
pub const SHEET_CSV_HEADER: &str = "app_id,user_id,score,evaluated";

/// How susceptibility is filled in for users absent from training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SImpute {
    Zero,
    Mean,
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(u, &b)| b.then_some(u)).collect()
}

fn check_dims(params: &ModelParams, stack: &NetworkStack, x: &[bool]) -> Result<(), ModelError> {
    if params.num_networks() != stack.num_networks() {
        return Err(ModelError::DimensionMismatch {
            what: "network count",
            expected: stack.num_networks(),
            found: params.num_networks(),
        });
    }
    if params.num_users() != x.len() {
        return Err(ModelError::DimensionMismatch {
            what: "adoption vector",
            expected: params.num_users(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Scores every user with the given susceptibilities, conditioning on `evidence`.
fn score_with(
    params: &ModelParams,
    stack: &NetworkStack,
    evidence: &[bool],
    popularity: f64,
    s: &[f64],
) -> Result<Vec<f64>, ModelError> {
    let table = potential_table(stack, evidence, popularity)?;
    let p = composite_potential(params, &table)?;
    Ok(p.iter().zip(s).map(|(&pu, &su)| adoption_probability(su, pu)).collect())
}

/// Standard regime: every user is scored from the true adoption bits of the
/// others (a user's own bit never enters its potential).
pub fn score_app(
    params: &ModelParams,
    stack: &NetworkStack,
    app_id: usize,
    x_a: &[bool],
    popularity: f64,
) -> Result<PredictionSheet, ModelError> {
    check_dims(params, stack, x_a)?;
    let scores = score_with(params, stack, x_a, popularity, &params.s)?;
    Ok(PredictionSheet { app_id, scores, evaluated_users: (0..x_a.len()).collect(), evidence_users: indices(x_a) })
}

/// Future regime: only the early adopters `x_g1` are visible. They are
/// excluded from the ranked set.
pub fn score_future(
    params: &ModelParams,
    stack: &NetworkStack,
    app_id: usize,
    x_g1: &[bool],
    popularity_visible: f64,
) -> Result<PredictionSheet, ModelError> {
    check_dims(params, stack, x_g1)?;
    let scores = score_with(params, stack, x_g1, popularity_visible, &params.s)?;
    Ok(PredictionSheet {
        app_id,
        scores,
        evaluated_users: (0..x_g1.len()).filter(|&u| !x_g1[u]).collect(),
        evidence_users: indices(x_g1),
    })
}

/// Mean of the fitted susceptibilities over `observable` users.
pub fn imputed_susceptibility(params: &ModelParams, observable: &[bool], mode: SImpute) -> f64 {
    match mode {
        SImpute::Zero => 0.0,
        SImpute::Mean => {
            let (sum, n) = params
                .s
                .iter()
                .zip(observable)
                .filter(|(_, &o)| o)
                .fold((0.0, 0usize), |(sum, n), (&s, _)| (sum + s, n + 1));
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        }
    }
}

/// Transfer regime: parameters fitted on `observable` users only; the
/// unobservable users are ranked, with the imputed susceptibility and only
/// observable adopters (`x_observable`) as evidence.
pub fn score_transfer(
    params: &ModelParams,
    stack: &NetworkStack,
    app_id: usize,
    x_observable: &[bool],
    observable: &[bool],
    popularity_visible: f64,
    mode: SImpute,
) -> Result<PredictionSheet, ModelError> {
    check_dims(params, stack, x_observable)?;
    if observable.len() != x_observable.len() {
        return Err(ModelError::DimensionMismatch {
            what: "observable mask",
            expected: x_observable.len(),
            found: observable.len(),
        });
    }
    let evidence: Vec<bool> = x_observable.iter().zip(observable).map(|(&x, &o)| x && o).collect();
    let fill = imputed_susceptibility(params, observable, mode);
    let s: Vec<f64> = params.s.iter().zip(observable).map(|(&s, &o)| if o { s } else { fill }).collect();
    let scores = score_with(params, stack, &evidence, popularity_visible, &s)?;
    Ok(PredictionSheet {
        app_id,
        scores,
        evaluated_users: (0..observable.len()).filter(|&u| !observable[u]).collect(),
        evidence_users: indices(&evidence),
    })
}

/// Regression-baseline scores with the same evidence semantics; `activity`
/// supplies each user's activity feature.
pub fn score_regression(
    reg: &RegressionParams,
    stack: &NetworkStack,
    app_id: usize,
    evidence: &[bool],
    popularity: f64,
    activity: &[f64],
    evaluated_users: Vec<usize>,
) -> Result<PredictionSheet, ModelError> {
    let table = potential_table(stack, evidence, popularity)?;
    let n = evidence.len();
    let mut potentials = vec![0.0; stack.num_networks()];
    let scores = (0..n)
        .map(|u| {
            for (slot, p) in potentials.iter_mut().zip(&table.per_network) {
                *slot = p[u];
            }
            reg.score(&potentials, popularity, activity[u])
        })
        .collect();
    Ok(PredictionSheet { app_id, scores, evaluated_users, evidence_users: indices(evidence) })
}

/// Random-guess sheet over `num_users` users.
pub fn score_random(app_id: usize, num_users: usize, evaluated_users: Vec<usize>, seed: u64) -> PredictionSheet {
    PredictionSheet {
        app_id,
        scores: crate::solver::random_baseline(num_users, seed),
        evaluated_users,
        evidence_users: Vec::new(),
    }
}
