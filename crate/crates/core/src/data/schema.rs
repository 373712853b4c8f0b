use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Integer,
    Real,
    Categorical(Vec<String>),
    Boolean,
}

impl ColumnType {
    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnType::Integer | ColumnType::Real)
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Integer => f.write_str("integer"),
            ColumnType::Real => f.write_str("real"),
            ColumnType::Categorical(levels) => write!(f, "categorical({})", levels.join("|")),
            ColumnType::Boolean => f.write_str("boolean"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
    /// Public lower bound, used for range normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

impl Column {
    pub fn new(name: &str, ty: ColumnType) -> Self {
        Column {
            name: name.to_string(),
            ty,
            min: None,
            max: None,
        }
    }

    pub fn bounded(name: &str, ty: ColumnType, min: f64, max: f64) -> Self {
        Column {
            name: name.to_string(),
            ty,
            min: Some(min),
            max: Some(max),
        }
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        Column::new(
            name,
            ColumnType::Categorical(levels.iter().map(|s| s.to_string()).collect()),
        )
    }

    pub fn levels(&self) -> &[String] {
        match &self.ty {
            ColumnType::Categorical(l) => l,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<Column>,
    pub target: String,
}

pub const RACES: [&str; 3] = ["Asian", "Black", "White"];
pub const VKORC1_LEVELS: [&str; 3] = ["A/A", "A/G", "G/G"];
pub const CYP2C9_LEVELS: [&str; 6] = ["*1/*1", "*1/*2", "*1/*3", "*2/*2", "*2/*3", "*3/*3"];
pub const DOSE_MIN: f64 = 0.5;
pub const DOSE_MAX: f64 = 20.0;

impl Schema {
    pub fn new(columns: Vec<Column>, target: &str) -> Result<Self, DataError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DataError::InvalidSchema(format!(
                    "duplicate column `{}`",
                    c.name
                )));
            }
            if let ColumnType::Categorical(levels) = &c.ty {
                if levels.is_empty() {
                    return Err(DataError::InvalidSchema(format!(
                        "categorical column `{}` has no levels",
                        c.name
                    )));
                }
                if levels.len() > u16::MAX as usize {
                    return Err(DataError::InvalidSchema(format!(
                        "too many levels in `{}`",
                        c.name
                    )));
                }
                let distinct: HashSet<_> = levels.iter().collect();
                if distinct.len() != levels.len() {
                    return Err(DataError::InvalidSchema(format!(
                        "repeated level in `{}`",
                        c.name
                    )));
                }
            }
            if let (Some(lo), Some(hi)) = (c.min, c.max) {
                if !(lo < hi) {
                    return Err(DataError::InvalidSchema(format!(
                        "column `{}` has min >= max",
                        c.name
                    )));
                }
            }
        }
        match columns.iter().find(|c| c.name == target) {
            Some(c) if c.ty == ColumnType::Real => {}
            Some(c) => {
                return Err(DataError::InvalidSchema(format!(
                    "target `{target}` must be real, found {}",
                    c.ty
                )));
            }
            None => {
                return Err(DataError::InvalidSchema(format!(
                    "target column `{target}` is not declared"
                )))
            }
        }
        Ok(Schema {
            columns,
            target: target.to_string(),
        })
    }

    /// Eight patient inputs plus the daily dose in mg.
    pub fn warfarin() -> Self {
        Schema::new(
            vec![
                Column::bounded("age", ColumnType::Integer, 18.0, 90.0),
                Column::bounded("height", ColumnType::Real, 140.0, 200.0),
                Column::bounded("weight", ColumnType::Real, 90.0, 330.0),
                Column::categorical("VKORC1", &VKORC1_LEVELS),
                Column::categorical("CYP2C9", &CYP2C9_LEVELS),
                Column::categorical("race", &RACES),
                Column::new("enzyme_inducer", ColumnType::Boolean),
                Column::new("amiodarone", ColumnType::Boolean),
                Column::bounded("dose", ColumnType::Real, DOSE_MIN, DOSE_MAX),
            ],
            "dose",
        )
        .expect("warfarin schema is valid")
    }

    /// The five-column table used by the three-member walkthrough.
    pub fn walkthrough() -> Self {
        Schema::new(
            vec![
                Column::bounded("age", ColumnType::Integer, 18.0, 90.0),
                Column::categorical("race", &RACES),
                Column::categorical("genotype", &VKORC1_LEVELS),
                Column::bounded("weight", ColumnType::Real, 90.0, 330.0),
                Column::bounded("dose", ColumnType::Real, DOSE_MIN, DOSE_MAX),
            ],
            "dose",
        )
        .expect("walkthrough schema is valid")
    }

    /// `features` real columns `x1..xk` bounded to [-1, 1] plus a dose target.
    pub fn numeric(features: usize) -> Self {
        let mut cols: Vec<Column> = (1..=features)
            .map(|i| Column::bounded(&format!("x{i}"), ColumnType::Real, -1.0, 1.0))
            .collect();
        cols.push(Column::bounded(
            "dose",
            ColumnType::Real,
            DOSE_MIN,
            DOSE_MAX,
        ));
        Schema::new(cols, "dose").expect("numeric schema is valid")
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.index_of(&self.target)
            .expect("target validated at construction")
    }

    /// Indices of the input (non-target) columns.
    pub fn feature_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let t = self.target_index();
        (0..self.columns.len()).filter(move |&i| i != t)
    }
}

/// One difference between two schemas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemaDifference {
    MissingInLeft(String),
    MissingInRight(String),
    TypeDiffers {
        column: String,
        left: String,
        right: String,
    },
    TargetDiffers {
        left: String,
        right: String,
    },
}

impl fmt::Display for SchemaDifference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemaDifference::MissingInLeft(c) => write!(f, "column `{c}` missing on the left"),
            SchemaDifference::MissingInRight(c) => write!(f, "column `{c}` missing on the right"),
            SchemaDifference::TypeDiffers {
                column,
                left,
                right,
            } => {
                write!(f, "column `{column}`: {left} vs {right}")
            }
            SchemaDifference::TargetDiffers { left, right } => {
                write!(f, "target `{left}` vs `{right}`")
            }
        }
    }
}

/// Compares names, types and level lists, ignoring column order.
pub fn check_shared_schema(a: &Schema, b: &Schema) -> Result<(), Vec<SchemaDifference>> {
    let mut diffs = Vec::new();
    if a.target != b.target {
        diffs.push(SchemaDifference::TargetDiffers {
            left: a.target.clone(),
            right: b.target.clone(),
        });
    }
    for ca in &a.columns {
        match b.column(&ca.name) {
            None => diffs.push(SchemaDifference::MissingInRight(ca.name.clone())),
            Some(cb) if cb.ty != ca.ty => diffs.push(SchemaDifference::TypeDiffers {
                column: ca.name.clone(),
                left: ca.ty.to_string(),
                right: cb.ty.to_string(),
            }),
            Some(_) => {}
        }
    }
    for cb in &b.columns {
        if a.column(&cb.name).is_none() {
            diffs.push(SchemaDifference::MissingInLeft(cb.name.clone()));
        }
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(diffs)
    }
}
