//! Dose models over the shared design encoding.
//!
//! Coefficients live in normalized units: inputs and the dose are rescaled
//! to [-1, 1] by the normalization map before fitting, and predictions are
//! mapped back to mg/day.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dp::{functional_mechanism, PrivacyBudget};
use super::ols::{solve_ols, solve_ridge};
use super::RegressionError;
use crate::data::{
    to_design_matrix, Cell, ColumnType, Dataset, Encoding, NormalizationMap, Schema,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PrivacyLabel {
    NonPrivate,
    Dp { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseModel {
    pub schema: Schema,
    pub encoding: Encoding,
    pub normalization: NormalizationMap,
    pub eta: Vec<f64>,
    pub privacy: PrivacyLabel,
}

impl DoseModel {
    pub fn from_coefficients(
        schema: &Schema,
        normalization: &NormalizationMap,
        eta: Vec<f64>,
        privacy: PrivacyLabel,
    ) -> Result<Self, RegressionError> {
        let encoding = Encoding::for_schema(schema);
        if eta.len() != encoding.width() {
            return Err(RegressionError::DimMismatch(encoding.width(), eta.len()));
        }
        if normalization.range(&schema.target).is_none() {
            return Err(RegressionError::Normalization(format!(
                "no range for target `{}`",
                schema.target
            )));
        }
        Ok(DoseModel {
            schema: schema.clone(),
            encoding,
            normalization: normalization.clone(),
            eta,
            privacy,
        })
    }

    /// Ordinary least squares from normalized statistics.
    pub fn fit(
        schema: &Schema,
        normalization: &NormalizationMap,
        o: &DMatrix<f64>,
        v: &DVector<f64>,
    ) -> Result<Self, RegressionError> {
        let eta = solve_ols(o, v)?;
        Self::from_coefficients(
            schema,
            normalization,
            eta.as_slice().to_vec(),
            PrivacyLabel::NonPrivate,
        )
    }

    /// Like [`DoseModel::fit`], falling back to a ridge solve with `lambda`
    /// when O is singular.
    pub fn fit_or_ridge(
        schema: &Schema,
        normalization: &NormalizationMap,
        o: &DMatrix<f64>,
        v: &DVector<f64>,
        lambda: f64,
    ) -> Result<Self, RegressionError> {
        let eta = match solve_ols(o, v) {
            Ok(eta) => eta,
            Err(RegressionError::SingularMatrix { .. }) => solve_ridge(o, v, lambda)?,
            Err(e) => return Err(e),
        };
        Self::from_coefficients(
            schema,
            normalization,
            eta.as_slice().to_vec(),
            PrivacyLabel::NonPrivate,
        )
    }

    pub fn fit_dp<R: Rng + ?Sized>(
        schema: &Schema,
        normalization: &NormalizationMap,
        o: &DMatrix<f64>,
        v: &DVector<f64>,
        n: u64,
        budget: PrivacyBudget,
        rng: &mut R,
    ) -> Result<Self, RegressionError> {
        let eta = functional_mechanism(o, v, n, budget, rng)?;
        Self::from_coefficients(
            schema,
            normalization,
            eta.as_slice().to_vec(),
            PrivacyLabel::Dp {
                epsilon: budget.epsilon(),
            },
        )
    }

    /// Noisy coefficients can send a prediction far outside the dose range,
    /// so private models clip the normalized output to [-1, 1] first.
    fn denormalize_dose(&self, z: f64) -> f64 {
        let z = match self.privacy {
            PrivacyLabel::Dp { .. } => z.clamp(-1.0, 1.0),
            PrivacyLabel::NonPrivate => z,
        };
        self.normalization
            .denormalize(&self.schema.target, z)
            .expect("checked at construction")
    }

    fn check_row(&self, row: &[Cell]) -> Result<(), RegressionError> {
        if row.len() != self.schema.columns.len() {
            return Err(RegressionError::SchemaMismatch(format!(
                "row has {} values, schema has {} columns",
                row.len(),
                self.schema.columns.len()
            )));
        }
        for (cell, col) in row.iter().zip(&self.schema.columns) {
            let ok = match (&col.ty, cell) {
                (ColumnType::Integer | ColumnType::Real, Cell::Num(v)) => v.is_finite(),
                (ColumnType::Categorical(levels), Cell::Level(l)) => (*l as usize) < levels.len(),
                (ColumnType::Boolean, Cell::Bool(_)) => true,
                _ => false,
            };
            if !ok {
                return Err(RegressionError::SchemaMismatch(format!(
                    "{cell:?} does not fit column `{}`",
                    col.name
                )));
            }
        }
        Ok(())
    }

    /// Dose in mg/day for one schema row. The target cell is ignored.
    pub fn predict_row(&self, row: &[Cell]) -> Result<f64, RegressionError> {
        self.check_row(row)?;
        let scaled: Vec<Cell> = row
            .iter()
            .zip(&self.schema.columns)
            .map(
                |(cell, col)| match (cell, self.normalization.range(&col.name)) {
                    (Cell::Num(v), Some(r)) => Cell::Num(r.normalize(*v).clamp(-1.0, 1.0)),
                    (c, _) => *c,
                },
            )
            .collect();
        let x = self.encoding.encode_row(&scaled)?;
        Ok(self.denormalize_dose(x.dot(&DVector::from_column_slice(&self.eta))))
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>, RegressionError> {
        if ds.schema() != &self.schema {
            return Err(RegressionError::SchemaMismatch(
                "dataset schema differs from the model's".into(),
            ));
        }
        let dm = to_design_matrix(&self.normalization.apply(ds)?);
        let z = dm.x * DVector::from_column_slice(&self.eta);
        Ok(z.iter().map(|&z| self.denormalize_dose(z)).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}
