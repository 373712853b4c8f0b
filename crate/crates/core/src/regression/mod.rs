//! Least squares from pooled statistics, the functional mechanism, dose
//! models and clinical metrics.

mod dp;
mod metrics;
mod model;
mod ols;

use thiserror::Error;

use crate::data::DataError;

pub use dp::{
    functional_mechanism, laplace, project_pd, sensitivity, sensitivity_oracle, PrivacyBudget,
    PD_FLOOR,
};
pub use metrics::{clinical_metrics, ClinicalReport, WINDOW};
pub use model::{DoseModel, PrivacyLabel};
pub use ols::{solve_ols, solve_ols_with, solve_ridge, MAX_CONDITION};

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularMatrix { condition: f64 },
    #[error("privacy budget must be positive, got {0}")]
    Budget(f64),
    #[error("inputs are not normalized to [-1, 1]: {0}")]
    Normalization(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("true dose {0} at row {1} is not positive")]
    NonPositiveDose(f64, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error(transparent)]
    Data(#[from] DataError),
}
