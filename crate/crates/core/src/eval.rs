//! Prediction metrics: RMSE, precision at k, mean precision at k (MP-k) and
//! the optimal F1 over a pooled precision-recall sweep.
//!
//! Rankings break score ties by ascending user id, so every metric is a
//! deterministic function of its inputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netdata::AdoptionMatrix;
use crate::predict::PredictionSheet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("k = {k} out of range for {n} scored users")]
    KOutOfRange { k: usize, n: usize },
    #[error("no positive examples")]
    NoPositives,
}

pub fn rmse(pred: &[f64], truth: &[bool]) -> Result<f64, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let sse: f64 = pred.iter().zip(truth).map(|(&p, &x)| (p - f64::from(u8::from(x))).powi(2)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Indices of the `k` best scores, highest first, ties by lower index.
fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Fraction of adopters among the `k` top-scored positions. Position order is
/// the tie-break order.
pub fn precision_at_k(scores: &[f64], adopters: &[bool], k: usize) -> Result<f64, EvalError> {
    if scores.len() != adopters.len() {
        return Err(EvalError::LengthMismatch(scores.len(), adopters.len()));
    }
    if k == 0 || k > scores.len() {
        return Err(EvalError::KOutOfRange { k, n: scores.len() });
    }
    let hits = top_k(scores, k).into_iter().filter(|&i| adopters[i]).count();
    Ok(hits as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPrecision {
    pub value: f64,
    pub apps: usize,
    /// Apps with fewer evaluated users than `k`, scored with `k` clipped.
    pub clipped_apps: usize,
    /// Apps with no evaluated users.
    pub skipped_apps: usize,
}

/// Scores and labels of a sheet restricted to its evaluated users.
fn evaluated_view(sheet: &PredictionSheet, truth: &AdoptionMatrix) -> (Vec<f64>, Vec<bool>) {
    let scores = sheet.evaluated_users.iter().map(|&u| sheet.scores[u]).collect();
    let labels = sheet.evaluated_users.iter().map(|&u| truth.is_adopted(u, sheet.app_id)).collect();
    (scores, labels)
}

/// Unweighted mean over sheets of precision at `k` on each sheet's evaluated users.
pub fn mean_precision_at_k(
    sheets: &[PredictionSheet],
    truth: &AdoptionMatrix,
    k: usize,
) -> Result<MeanPrecision, EvalError> {
    if sheets.is_empty() {
        return Err(EvalError::Empty);
    }
    if k == 0 {
        return Err(EvalError::KOutOfRange { k, n: 0 });
    }
    let mut sum = 0.0;
    let mut apps = 0;
    let mut clipped_apps = 0;
    let mut skipped_apps = 0;
    for sheet in sheets {
        let (scores, labels) = evaluated_view(sheet, truth);
        if scores.is_empty() {
            skipped_apps += 1;
            continue;
        }
        let kk = if k > scores.len() {
            clipped_apps += 1;
            scores.len()
        } else {
            k
        };
        sum += precision_at_k(&scores, &labels, kk)?;
        apps += 1;
    }
    if apps == 0 {
        return Err(EvalError::Empty);
    }
    Ok(MeanPrecision { value: sum / apps as f64, apps, clipped_apps, skipped_apps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
}

/// Precision and recall at every distinct score, swept from high to low
/// (`score >= threshold` predicts adoption).
pub fn pr_curve(pairs: &[(f64, bool)]) -> Result<Vec<PrPoint>, EvalError> {
    let positives = pairs.iter().filter(|p| p.1).count();
    if positives == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs[b].0.total_cmp(&pairs[a].0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = pairs[order[i]].0;
        while i < order.len() && pairs[order[i]].0.total_cmp(&threshold).is_eq() {
            if pairs[order[i]].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
            threshold,
        });
    }
    Ok(points)
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Largest F1 over the curve; zero for an empty curve.
pub fn optimal_f1(points: &[PrPoint]) -> f64 {
    points.iter().map(|p| f1(p.precision, p.recall)).fold(0.0, f64::max)
}

/// `threshold,precision,recall` with a header row.
pub fn pr_points_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    /// MP-k for each requested `k`.
    pub mp_at_k: BTreeMap<usize, f64>,
    /// Optimal F1 over the curve pooled across all evaluated (app, user) pairs.
    pub optimal_f1: f64,
    /// Optimal F1 computed per app, then averaged (apps without positives skipped).
    pub optimal_f1_per_app: f64,
    pub apps: usize,
    pub clipped_apps: usize,
    /// Apps dropped before scoring (no evaluated positives).
    pub skipped_apps: usize,
    #[serde(skip)]
    pub pr_points: Vec<PrPoint>,
}

/// Evaluates sheets against `truth`. Sheets whose evaluated users contain no
/// adopter are skipped and counted.
pub fn evaluate_sheets(
    sheets: &[PredictionSheet],
    truth: &AdoptionMatrix,
    ks: &[usize],
) -> Result<MetricReport, EvalError> {
    let mut kept = Vec::with_capacity(sheets.len());
    let mut skipped = 0;
    for sheet in sheets {
        let has_positive = sheet.evaluated_users.iter().any(|&u| truth.is_adopted(u, sheet.app_id));
        if has_positive {
            kept.push(sheet.clone());
        } else {
            skipped += 1;
        }
    }
    if kept.is_empty() {
        return Err(EvalError::NoPositives);
    }
    let mut pooled = Vec::new();
    let mut per_app_f1 = 0.0;
    for sheet in &kept {
        let (scores, labels) = evaluated_view(sheet, truth);
        let pairs: Vec<(f64, bool)> = scores.into_iter().zip(labels).collect();
        per_app_f1 += optimal_f1(&pr_curve(&pairs)?);
        pooled.extend(pairs);
    }
    let preds: Vec<f64> = pooled.iter().map(|p| p.0).collect();
    let labels: Vec<bool> = pooled.iter().map(|p| p.1).collect();
    let pr_points = pr_curve(&pooled)?;
    let mut mp_at_k = BTreeMap::new();
    let mut clipped = 0;
    for &k in ks {
        let mp = mean_precision_at_k(&kept, truth, k)?;
        clipped = clipped.max(mp.clipped_apps);
        mp_at_k.insert(k, mp.value);
    }
    Ok(MetricReport {
        rmse: rmse(&preds, &labels)?,
        mp_at_k,
        optimal_f1: optimal_f1(&pr_points),
        optimal_f1_per_app: per_app_f1 / kept.len() as f64,
        apps: kept.len(),
        clipped_apps: clipped,
        skipped_apps: skipped,
        pr_points,
    })
}
