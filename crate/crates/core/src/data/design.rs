//! Numeric design matrices with an intercept and dummy-coded categoricals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dataset::{Cell, ColumnData, Dataset};
use super::schema::{ColumnType, Schema};
use super::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Intercept,
    Numeric,
    /// 1 when the categorical column holds this level index.
    Indicator(u16),
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    /// Schema column index; unused for the intercept.
    pub column: usize,
    pub kind: FeatureKind,
}

/// Column layout of the design matrix: intercept, numeric inputs in schema
/// order, then one indicator per non-reference level and one per boolean, in
/// schema order. The first level of each categorical is the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub features: Vec<Feature>,
    pub target: usize,
}

impl Encoding {
    pub fn for_schema(schema: &Schema) -> Self {
        let mut features = vec![Feature {
            name: "intercept".into(),
            column: 0,
            kind: FeatureKind::Intercept,
        }];
        for i in schema.feature_indices() {
            let c = &schema.columns[i];
            if c.ty.is_numeric() {
                features.push(Feature {
                    name: c.name.clone(),
                    column: i,
                    kind: FeatureKind::Numeric,
                });
            }
        }
        for i in schema.feature_indices() {
            let c = &schema.columns[i];
            match &c.ty {
                ColumnType::Categorical(levels) => {
                    for (l, level) in levels.iter().enumerate().skip(1) {
                        features.push(Feature {
                            name: format!("{}={}", c.name, level),
                            column: i,
                            kind: FeatureKind::Indicator(l as u16),
                        });
                    }
                }
                ColumnType::Boolean => features.push(Feature {
                    name: c.name.clone(),
                    column: i,
                    kind: FeatureKind::Boolean,
                }),
                _ => {}
            }
        }
        Encoding {
            features,
            target: schema.target_index(),
        }
    }

    /// Number of design columns.
    pub fn width(&self) -> usize {
        self.features.len()
    }

    pub fn encode_row(&self, row: &[Cell]) -> Result<DVector<f64>, DataError> {
        let mut x = DVector::zeros(self.width());
        for (j, f) in self.features.iter().enumerate() {
            if f.kind == FeatureKind::Intercept {
                x[j] = 1.0;
                continue;
            }
            let cell = row.get(f.column).ok_or_else(|| {
                DataError::SchemaMismatch(format!("row has no value for `{}`", f.name))
            })?;
            x[j] = match (&f.kind, cell) {
                (FeatureKind::Numeric, Cell::Num(v)) => *v,
                (FeatureKind::Indicator(l), Cell::Level(v)) => (*v == *l) as u8 as f64,
                (FeatureKind::Boolean, Cell::Bool(b)) => *b as u8 as f64,
                _ => {
                    return Err(DataError::SchemaMismatch(format!(
                        "cell {cell:?} does not fit feature `{}`",
                        f.name
                    )))
                }
            };
        }
        Ok(x)
    }
}

#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub encoding: Encoding,
}

pub fn to_design_matrix(ds: &Dataset) -> DesignMatrix {
    let encoding = Encoding::for_schema(ds.schema());
    let n = ds.len();
    let mut x = DMatrix::zeros(n, encoding.width());
    for (j, f) in encoding.features.iter().enumerate() {
        match (&f.kind, ds.column_at(f.column)) {
            (FeatureKind::Intercept, _) => x.column_mut(j).fill(1.0),
            (FeatureKind::Numeric, ColumnData::Num(v)) => x.column_mut(j).copy_from_slice(v),
            (FeatureKind::Indicator(l), ColumnData::Level(v)) => {
                for (i, &lv) in v.iter().enumerate() {
                    x[(i, j)] = (lv == *l) as u8 as f64;
                }
            }
            (FeatureKind::Boolean, ColumnData::Bool(v)) => {
                for (i, &b) in v.iter().enumerate() {
                    x[(i, j)] = b as u8 as f64;
                }
            }
            _ => unreachable!("encoding derived from the dataset schema"),
        }
    }
    let y = DVector::from_column_slice(ds.target());
    DesignMatrix { x, y, encoding }
}
