//! Shared schema, typed datasets, selections, normalization and synthetic data.

pub mod dataset;
pub mod design;
pub mod filter;
pub mod normalize;
pub mod schema;
pub mod synth;

use thiserror::Error;

pub use dataset::{load_dataset, write_csv, Cell, ColumnData, Dataset};
pub use design::{to_design_matrix, DesignMatrix, Encoding, Feature, FeatureKind};
pub use filter::{apply_selections, selection_mask};
pub use normalize::{normalize_columns, NormalizationMap};
pub use schema::{check_shared_schema, Column, ColumnType, Schema, SchemaDifference};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("row {row}: missing value in column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("row {row}, column `{column}`: {message}")]
    TypeError {
        row: usize,
        column: String,
        message: String,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("filter on `{column}`: {message}")]
    FilterType { column: String, message: String },
    #[error("column `{0}` has max = min and cannot be normalized")]
    DegenerateColumn(String),
    #[error("column `{0}` has no declared bounds")]
    MissingBounds(String),
    #[error("invalid synthetic profile: {0}")]
    InvalidProfile(String),
    #[error("dataset is empty")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
