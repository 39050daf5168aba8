//! Maximum-likelihood fitting under non-negativity, plus the two comparison
//! baselines (non-negative linear regression and random scores).

mod linalg;
mod mle;
mod regression;

pub use mle::{fit_mle, fit_mle_view, Bound, ConvergenceRecord, FitConfig, FitResult, StepRule};
pub use regression::{
    fit_regression, fit_regression_view, nnls, nnls_gram, random_baseline, NnlsSolution, RegressionParams,
};

use thiserror::Error;

use crate::model::{ModelError, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("objective became NaN at iteration {iteration}")]
    NonFinite { iteration: usize, params: Box<ModelParams> },
}
