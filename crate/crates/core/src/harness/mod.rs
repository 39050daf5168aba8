//! Experimental protocols: app splits, ablations, baseline comparisons,
//! future-adopter prediction and transfer to unseen users.
//!
//! Every random choice is derived by name from `ExperimentSpec::seed`, and
//! repeats are reduced in index order, so reports are reproducible bit for bit
//! regardless of thread count.

mod protocol;
mod report;
mod split;

pub use protocol::{
    run_ablation, run_comparison, run_experiment, run_experiment_probed, run_future, run_transfer, Probe, ProbeContext,
};
pub use report::{ConfigReport, ExperimentReport, Provenance, RepeatRecord};
pub use split::{fraction_split, future_split, kfold_apps, low_activity_subset, observable_user_split, FutureSplit};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::EvalError;
use crate::model::ModelError;
use crate::netdata::{AdoptionMatrix, DataError, NetworkStack};
use crate::solver::{FitConfig, SolverError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("degenerate split: {0}")]
    Degenerate(String),
    #[error("the future protocol requires adoption timestamps; app {app} user {user} has none")]
    MissingTimestamps { app: usize, user: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Ablation,
    Comparison,
    Future,
    Transfer,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Ablation => "ablation",
            Protocol::Comparison => "comparison",
            Protocol::Future => "future",
            Protocol::Transfer => "transfer",
        }
    }

    fn default_ks(self) -> Vec<usize> {
        match self {
            Protocol::Future => vec![3, 4, 5],
            _ => vec![5],
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ablation" => Ok(Protocol::Ablation),
            "comparison" => Ok(Protocol::Comparison),
            "future" => Ok(Protocol::Future),
            "transfer" => Ok(Protocol::Transfer),
            _ => Err(format!("unknown protocol {s:?} (expected ablation, comparison, future or transfer)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserSubset {
    All,
    LowActivity,
}

impl UserSubset {
    pub fn name(self) -> &'static str {
        match self {
            UserSubset::All => "all",
            UserSubset::LowActivity => "low_activity",
        }
    }
}

impl FromStr for UserSubset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(UserSubset::All),
            "low_activity" => Ok(UserSubset::LowActivity),
            _ => Err(format!("unknown user subset {s:?} (expected all or low_activity)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub protocol: Protocol,
    /// App-level training fraction; exclusive with `folds`.
    pub train_fraction: Option<f64>,
    /// k for k-fold cross-validation over apps; exclusive with `train_fraction`.
    pub folds: Option<usize>,
    /// Apps with fewer adopters are dropped before any split.
    pub min_users: usize,
    pub repeats: usize,
    pub seed: u64,
    pub fit: FitConfig,
    pub user_subset: UserSubset,
    /// Cutoffs for MP-k; `None` uses the protocol default.
    pub ks: Option<Vec<usize>>,
    /// Training fractions swept by the comparison protocol.
    pub comparison_fractions: Vec<f64>,
    /// Share of users visible during training in the transfer protocol.
    pub observable_fraction: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            protocol: Protocol::Ablation,
            train_fraction: None,
            folds: Some(5),
            min_users: 2,
            repeats: 5,
            seed: 0,
            fit: FitConfig::default(),
            user_subset: UserSubset::All,
            ks: None,
            comparison_fractions: vec![0.2, 0.5],
            observable_fraction: 0.5,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidSpec(m));
        match (self.train_fraction, self.folds) {
            (Some(_), Some(_)) | (None, None) => return bad("set exactly one of train_fraction and folds".into()),
            (Some(f), None) if !(f > 0.0 && f < 1.0) => return bad(format!("train_fraction {f} outside (0, 1)")),
            (None, Some(k)) if k < 2 => return bad(format!("folds = {k}; need at least 2")),
            _ => {}
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.ks.as_ref().is_some_and(|ks| ks.is_empty() || ks.contains(&0)) {
            return bad("ks must be non-empty positive integers".into());
        }
        if let Some(f) = self.comparison_fractions.iter().find(|&&f| !(f > 0.0 && f < 1.0)) {
            return bad(format!("comparison fraction {f} outside (0, 1)"));
        }
        if self.protocol == Protocol::Comparison && self.comparison_fractions.is_empty() {
            return bad("comparison_fractions is empty".into());
        }
        if !(self.observable_fraction > 0.0 && self.observable_fraction < 1.0) {
            return bad(format!("observable_fraction {} outside (0, 1)", self.observable_fraction));
        }
        self.fit.validate()?;
        Ok(())
    }

    pub fn ks(&self) -> Vec<usize> {
        self.ks.clone().unwrap_or_else(|| self.protocol.default_ks())
    }
}

/// Networks plus the adoption log an experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub stack: NetworkStack,
    pub adoptions: AdoptionMatrix,
}

impl ExperimentData {
    pub fn new(stack: NetworkStack, adoptions: AdoptionMatrix) -> Result<Self, HarnessError> {
        if let Some(u) = stack.num_users() {
            if u != adoptions.num_users() {
                return Err(DataError::DimensionMismatch {
                    what: "network users",
                    expected: adoptions.num_users(),
                    found: u,
                }
                .into());
            }
        }
        if stack.num_networks() == 0 {
            return Err(HarnessError::InvalidSpec("at least one candidate network is required".into()));
        }
        Ok(Self { stack, adoptions })
    }

    /// SHA-256 over the canonical text of every network and the adoption log.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for g in self.stack.networks() {
            hasher.update(format!("network {} {:?} {}\n", g.name(), g.kind(), g.num_users()).as_bytes());
            hasher.update(g.to_edge_list().as_bytes());
        }
        hasher.update(format!("adoptions {} {}\n", self.adoptions.num_users(), self.adoptions.num_apps()).as_bytes());
        hasher.update(self.adoptions.to_csv().as_bytes());
        hex::encode(hasher.finalize())
    }
}
