//! Row selection by conjunctions of column predicates.

use crate::cpl::{Filter, Operation, Value};

use super::dataset::{ColumnData, Dataset};
use super::schema::{Column, ColumnType};
use super::DataError;

enum Pred {
    Num {
        col: usize,
        op: Operation,
        values: Vec<f64>,
    },
    Level {
        col: usize,
        keep: Vec<bool>,
    },
    Bool {
        col: usize,
        keep: [bool; 2],
    },
}

fn type_err(column: &str, message: impl Into<String>) -> DataError {
    DataError::FilterType {
        column: column.to_string(),
        message: message.into(),
    }
}

fn scalars(f: &Filter) -> Result<Vec<&Value>, DataError> {
    match (&f.value, f.op) {
        (Value::List(items), Operation::In) => Ok(items.iter().collect()),
        (Value::List(_), op) => Err(type_err(
            &f.column,
            format!("a value list needs `in`, not `{op}`"),
        )),
        (v, _) => Ok(vec![v]),
    }
}

fn as_number(column: &str, v: &Value) -> Result<f64, DataError> {
    match v {
        Value::Num(n) => Ok(*n),
        Value::Str(s) | Value::Word(s) => s
            .trim()
            .parse()
            .map_err(|_| type_err(column, format!("{s:?} is not a number"))),
        Value::Var(name) => Err(type_err(
            column,
            format!("variable `${name}` was not substituted"),
        )),
        Value::List(_) => Err(type_err(column, "nested value list")),
    }
}

fn as_text(column: &str, v: &Value) -> Result<String, DataError> {
    match v {
        Value::Num(n) => Ok(format!("{n}")),
        Value::Str(s) | Value::Word(s) => Ok(s.clone()),
        Value::Var(name) => Err(type_err(
            column,
            format!("variable `${name}` was not substituted"),
        )),
        Value::List(_) => Err(type_err(column, "nested value list")),
    }
}

fn compile(col_idx: usize, col: &Column, f: &Filter) -> Result<Pred, DataError> {
    let name = &f.column;
    let vals = scalars(f)?;
    match &col.ty {
        ColumnType::Integer | ColumnType::Real => {
            let values = vals
                .iter()
                .map(|v| as_number(name, v))
                .collect::<Result<_, _>>()?;
            Ok(Pred::Num {
                col: col_idx,
                op: f.op,
                values,
            })
        }
        ColumnType::Categorical(levels) => {
            if matches!(f.op, Operation::Lt | Operation::Gt) {
                return Err(type_err(
                    name,
                    format!("`{}` is not defined for categorical columns", f.op),
                ));
            }
            let mut hit = vec![false; levels.len()];
            for v in vals {
                let t = as_text(name, v)?;
                let i = levels
                    .iter()
                    .position(|l| *l == t)
                    .ok_or_else(|| type_err(name, format!("{t:?} is not a level of `{name}`")))?;
                hit[i] = true;
            }
            let keep = if f.op == Operation::Ne {
                hit.iter().map(|h| !h).collect()
            } else {
                hit
            };
            Ok(Pred::Level { col: col_idx, keep })
        }
        ColumnType::Boolean => {
            if matches!(f.op, Operation::Lt | Operation::Gt) {
                return Err(type_err(
                    name,
                    format!("`{}` is not defined for boolean columns", f.op),
                ));
            }
            let mut hit = [false; 2];
            for v in vals {
                let b = match v {
                    Value::Num(n) if *n == 0.0 => false,
                    Value::Num(n) if *n == 1.0 => true,
                    other => match as_text(name, other)?.to_ascii_lowercase().as_str() {
                        "true" | "yes" | "1" => true,
                        "false" | "no" | "0" => false,
                        t => return Err(type_err(name, format!("{t:?} is not a boolean"))),
                    },
                };
                hit[b as usize] = true;
            }
            let keep = if f.op == Operation::Ne {
                [!hit[0], !hit[1]]
            } else {
                hit
            };
            Ok(Pred::Bool { col: col_idx, keep })
        }
    }
}

impl Pred {
    fn test(&self, ds: &Dataset, row: usize) -> bool {
        match self {
            Pred::Num { col, op, values } => {
                let ColumnData::Num(v) = ds.column_at(*col) else {
                    unreachable!()
                };
                let x = v[row];
                match op {
                    Operation::Eq => x == values[0],
                    Operation::Ne => x != values[0],
                    Operation::Lt => x < values[0],
                    Operation::Gt => x > values[0],
                    Operation::In => values.contains(&x),
                }
            }
            Pred::Level { col, keep } => {
                let ColumnData::Level(v) = ds.column_at(*col) else {
                    unreachable!()
                };
                keep[v[row] as usize]
            }
            Pred::Bool { col, keep } => {
                let ColumnData::Bool(v) = ds.column_at(*col) else {
                    unreachable!()
                };
                keep[v[row] as usize]
            }
        }
    }
}

/// Per-row truth value of the conjunction of `filters`.
pub fn selection_mask(ds: &Dataset, filters: &[Filter]) -> Result<Vec<bool>, DataError> {
    let preds = filters
        .iter()
        .map(|f| {
            let idx = ds
                .schema()
                .index_of(&f.column)
                .ok_or_else(|| DataError::UnknownColumn(f.column.clone()))?;
            compile(idx, &ds.schema().columns[idx], f)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..ds.len())
        .map(|r| preds.iter().all(|p| p.test(ds, r)))
        .collect())
}

/// Rows satisfying every filter. An empty filter list keeps everything.
pub fn apply_selections(ds: &Dataset, filters: &[Filter]) -> Result<Dataset, DataError> {
    if filters.is_empty() {
        return Ok(ds.clone());
    }
    let mask = selection_mask(ds, filters)?;
    let idx: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter(|(_, &k)| k)
        .map(|(i, _)| i)
        .collect();
    Ok(ds.take(&idx))
}
