//! Data-dependent conditionals: statistics over two members' columns and the
//! message flows used to evaluate them.

pub mod blinded;
pub mod stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpl::Algorithm;
use crate::crypto::CryptoError;
use crate::data::{ColumnData, Dataset};

pub use blinded::{evaluate_dd, scan_for_raw_values, DdMessage, DdOutcome, DdSettings};
pub use stats::{cosine, intersection_size, jaccard, pearson};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdError {
    #[error("both sets are empty")]
    EmptyUnion,
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("a vector has zero variance")]
    ZeroVariance,
    #[error("a vector has zero norm")]
    ZeroNorm,
    #[error("column `{column}` of {member}: {message}")]
    Column {
        member: String,
        column: String,
        message: String,
    },
    #[error("malformed message: {0}")]
    Protocol(String),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DdMode {
    Plain,
    #[default]
    Blinded,
}

/// How a statistic is turned into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    /// True when the statistic is strictly below the threshold.
    #[default]
    Below,
    /// True when the statistic is strictly above the threshold.
    Above,
}

impl Comparator {
    pub fn decide(self, statistic: f64, threshold: f64) -> bool {
        match self {
            Comparator::Below => statistic < threshold,
            Comparator::Above => statistic > threshold,
        }
    }

    pub fn from_name(s: &str) -> Option<Comparator> {
        match s.trim().to_ascii_lowercase().as_str() {
            "below" | "<" | "lt" => Some(Comparator::Below),
            "above" | ">" | "gt" => Some(Comparator::Above),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefValues {
    /// Canonical strings, for the set statistics.
    Text(Vec<String>),
    Real(Vec<f64>),
}

/// A column extracted from one member's dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRef {
    pub member: String,
    pub column: String,
    pub values: RefValues,
}

impl DataRef {
    /// Extracts `column` in the representation `algorithm` needs. Vector
    /// statistics require numeric or boolean columns.
    pub fn from_dataset(
        ds: &Dataset,
        member: &str,
        column: &str,
        algorithm: Algorithm,
    ) -> Result<Self, DdError> {
        let err = |message: String| DdError::Column {
            member: member.into(),
            column: column.into(),
            message,
        };
        let data = ds.column(column).map_err(|e| err(e.to_string()))?;
        let values = if algorithm.is_set_statistic() {
            RefValues::Text(ds.column_strings(column).map_err(|e| err(e.to_string()))?)
        } else {
            match data {
                ColumnData::Level(_) => {
                    return Err(err(format!(
                        "{} needs a numeric column",
                        algorithm.canonical_name()
                    )))
                }
                _ => RefValues::Real(ds.column_f64(column).map_err(|e| err(e.to_string()))?),
            }
        };
        Ok(DataRef {
            member: member.into(),
            column: column.into(),
            values,
        })
    }

    pub fn text(member: &str, column: &str, values: Vec<String>) -> Self {
        DataRef {
            member: member.into(),
            column: column.into(),
            values: RefValues::Text(values),
        }
    }

    pub fn real(member: &str, column: &str, values: Vec<f64>) -> Self {
        DataRef {
            member: member.into(),
            column: column.into(),
            values: RefValues::Real(values),
        }
    }
}

/// Plaintext statistic of two columns.
pub fn statistic(algorithm: Algorithm, a: &RefValues, b: &RefValues) -> Result<f64, DdError> {
    match (algorithm, a, b) {
        (Algorithm::IntersectionSize, RefValues::Text(x), RefValues::Text(y)) => {
            Ok(intersection_size(x, y) as f64)
        }
        (Algorithm::JaccardIndex, RefValues::Text(x), RefValues::Text(y)) => jaccard(x, y),
        (Algorithm::PearsonCorrelation, RefValues::Real(x), RefValues::Real(y)) => pearson(x, y),
        (Algorithm::CosineSimilarity, RefValues::Real(x), RefValues::Real(y)) => cosine(x, y),
        (alg, _, _) => Err(DdError::Protocol(format!(
            "{} received values of the wrong kind",
            alg.canonical_name()
        ))),
    }
}
