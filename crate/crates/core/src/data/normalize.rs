//! Affine rescaling of numeric columns to [-1, 1].

use serde::{Deserialize, Serialize};

use super::dataset::{ColumnData, Dataset};
use super::schema::Schema;
use super::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub column: String,
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    pub fn normalize(&self, v: f64) -> f64 {
        2.0 * (v - self.min) / (self.max - self.min) - 1.0
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        (z + 1.0) * 0.5 * (self.max - self.min) + self.min
    }
}

/// Per-column ranges for every numeric column, target included.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizationMap {
    pub ranges: Vec<ColumnRange>,
}

impl NormalizationMap {
    /// Uses the bounds declared in the schema. Every numeric column needs them.
    pub fn from_schema(schema: &Schema) -> Result<Self, DataError> {
        let mut ranges = Vec::new();
        for c in schema.columns.iter().filter(|c| c.ty.is_numeric()) {
            match (c.min, c.max) {
                (Some(min), Some(max)) => ranges.push(ColumnRange {
                    column: c.name.clone(),
                    min,
                    max,
                }),
                _ => return Err(DataError::MissingBounds(c.name.clone())),
            }
        }
        Ok(NormalizationMap { ranges })
    }

    pub fn range(&self, column: &str) -> Option<&ColumnRange> {
        self.ranges.iter().find(|r| r.column == column)
    }

    /// Rescales `ds`, clipping values that fall outside the recorded ranges.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset, DataError> {
        let mut out = ds.clone();
        for r in &self.ranges {
            let idx = ds
                .schema()
                .index_of(&r.column)
                .ok_or_else(|| DataError::UnknownColumn(r.column.clone()))?;
            let r = r.clone();
            out.map_numeric(idx, move |v| r.normalize(v).clamp(-1.0, 1.0));
        }
        Ok(out)
    }

    pub fn denormalize(&self, column: &str, z: f64) -> Option<f64> {
        self.range(column).map(|r| r.denormalize(z))
    }
}

/// Rescales each numeric column by its own observed min and max.
pub fn normalize_columns(ds: &Dataset) -> Result<(Dataset, NormalizationMap), DataError> {
    if ds.is_empty() {
        return Err(DataError::Empty);
    }
    let mut ranges = Vec::new();
    for (i, c) in ds.schema().columns.iter().enumerate() {
        if let ColumnData::Num(v) = ds.column_at(i) {
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max <= min {
                return Err(DataError::DegenerateColumn(c.name.clone()));
            }
            ranges.push(ColumnRange {
                column: c.name.clone(),
                min,
                max,
            });
        }
    }
    let map = NormalizationMap { ranges };
    Ok((map.apply(ds)?, map))
}
