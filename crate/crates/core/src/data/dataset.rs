use std::io::{Read, Write};
use std::sync::Arc;

use super::schema::{Column, ColumnType, Schema};
use super::DataError;

/// A single typed value. Categorical values hold the index of their level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Level(u16),
    Bool(bool),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Num(Vec<f64>),
    Level(Vec<u16>),
    Bool(Vec<bool>),
}

impl ColumnData {
    fn empty_for(ty: &ColumnType) -> Self {
        match ty {
            ColumnType::Integer | ColumnType::Real => ColumnData::Num(Vec::new()),
            ColumnType::Categorical(_) => ColumnData::Level(Vec::new()),
            ColumnType::Boolean => ColumnData::Bool(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Num(v) => v.len(),
            ColumnData::Level(v) => v.len(),
            ColumnData::Bool(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Cell {
        match self {
            ColumnData::Num(v) => Cell::Num(v[i]),
            ColumnData::Level(v) => Cell::Level(v[i]),
            ColumnData::Bool(v) => Cell::Bool(v[i]),
        }
    }

    fn push(&mut self, c: Cell) -> bool {
        match (self, c) {
            (ColumnData::Num(v), Cell::Num(x)) => v.push(x),
            (ColumnData::Level(v), Cell::Level(x)) => v.push(x),
            (ColumnData::Bool(v), Cell::Bool(x)) => v.push(x),
            _ => return false,
        }
        true
    }

    fn take(&self, idx: &[usize]) -> ColumnData {
        match self {
            ColumnData::Num(v) => ColumnData::Num(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Level(v) => ColumnData::Level(idx.iter().map(|&i| v[i]).collect()),
            ColumnData::Bool(v) => ColumnData::Bool(idx.iter().map(|&i| v[i]).collect()),
        }
    }

    fn extend(&mut self, other: &ColumnData) {
        match (self, other) {
            (ColumnData::Num(a), ColumnData::Num(b)) => a.extend_from_slice(b),
            (ColumnData::Level(a), ColumnData::Level(b)) => a.extend_from_slice(b),
            (ColumnData::Bool(a), ColumnData::Bool(b)) => a.extend_from_slice(b),
            _ => unreachable!("columns of the same schema share a type"),
        }
    }

    pub fn as_num(&self) -> Option<&[f64]> {
        match self {
            ColumnData::Num(v) => Some(v),
            _ => None,
        }
    }
}

/// Typed columnar table conforming to a shared schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    columns: Vec<ColumnData>,
    provenance: String,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, provenance: &str) -> Self {
        let columns = schema
            .columns
            .iter()
            .map(|c| ColumnData::empty_for(&c.ty))
            .collect();
        Dataset {
            schema,
            columns,
            provenance: provenance.to_string(),
        }
    }

    pub fn from_rows(
        schema: Arc<Schema>,
        provenance: &str,
        rows: Vec<Vec<Cell>>,
    ) -> Result<Self, DataError> {
        let mut ds = Dataset::new(schema, provenance);
        for row in rows {
            ds.push_row(&row)?;
        }
        Ok(ds)
    }

    /// Appends a row after checking it against the schema.
    pub fn push_row(&mut self, row: &[Cell]) -> Result<(), DataError> {
        let row_no = self.len() + 1;
        if row.len() != self.schema.columns.len() {
            return Err(DataError::SchemaMismatch(format!(
                "row {row_no} has {} cells, schema has {} columns",
                row.len(),
                self.schema.columns.len()
            )));
        }
        for (col, &cell) in self.schema.columns.iter().zip(row) {
            check_cell(col, cell).map_err(|message| DataError::TypeError {
                row: row_no,
                column: col.name.clone(),
                message,
            })?;
        }
        for (data, &cell) in self.columns.iter_mut().zip(row) {
            data.push(cell);
        }
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, provenance: &str) -> Self {
        self.provenance = provenance.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, ColumnData::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_at(&self, i: usize) -> &ColumnData {
        &self.columns[i]
    }

    pub fn column(&self, name: &str) -> Result<&ColumnData, DataError> {
        let i = self
            .schema
            .index_of(name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))?;
        Ok(&self.columns[i])
    }

    pub fn target(&self) -> &[f64] {
        self.columns[self.schema.target_index()]
            .as_num()
            .expect("target is real")
    }

    pub fn row(&self, i: usize) -> Vec<Cell> {
        self.columns.iter().map(|c| c.get(i)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<Cell>> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    /// Rows at the given indices, in that order.
    pub fn take(&self, idx: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.take(idx)).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Row-wise concatenation. All parts must share this dataset's schema.
    pub fn concat<'a>(
        &self,
        others: impl IntoIterator<Item = &'a Dataset>,
    ) -> Result<Dataset, DataError> {
        let mut out = self.clone();
        for o in others {
            if *o.schema != *self.schema {
                return Err(DataError::SchemaMismatch(format!(
                    "cannot concatenate `{}` onto `{}`",
                    o.provenance, self.provenance
                )));
            }
            for (a, b) in out.columns.iter_mut().zip(&o.columns) {
                a.extend(b);
            }
        }
        Ok(out)
    }

    /// Replaces every value of a numeric column.
    pub(crate) fn map_numeric(&mut self, col: usize, f: impl Fn(f64) -> f64) {
        if let ColumnData::Num(v) = &mut self.columns[col] {
            v.iter_mut().for_each(|x| *x = f(*x));
        }
    }

    /// Canonical text of a cell, shared by CSV output and set statistics.
    pub fn cell_text(&self, col: usize, i: usize) -> String {
        cell_text(&self.schema.columns[col], self.columns[col].get(i))
    }

    /// Column rendered as canonical strings.
    pub fn column_strings(&self, name: &str) -> Result<Vec<String>, DataError> {
        let i = self
            .schema
            .index_of(name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))?;
        Ok((0..self.len()).map(|r| self.cell_text(i, r)).collect())
    }

    /// Column as reals: numbers as-is, level indices, booleans as 0/1.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>, DataError> {
        Ok(match self.column(name)? {
            ColumnData::Num(v) => v.clone(),
            ColumnData::Level(v) => v.iter().map(|&l| l as f64).collect(),
            ColumnData::Bool(v) => v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        })
    }
}

fn check_cell(col: &Column, cell: Cell) -> Result<(), String> {
    match (&col.ty, cell) {
        (ColumnType::Integer | ColumnType::Real, Cell::Num(x)) if x.is_finite() => Ok(()),
        (ColumnType::Integer | ColumnType::Real, Cell::Num(_)) => Err("non-finite number".into()),
        (ColumnType::Categorical(levels), Cell::Level(l)) if (l as usize) < levels.len() => Ok(()),
        (ColumnType::Categorical(_), Cell::Level(l)) => {
            Err(format!("level index {l} out of range"))
        }
        (ColumnType::Boolean, Cell::Bool(_)) => Ok(()),
        (ty, _) => Err(format!("expected {ty}")),
    }
}

pub fn cell_text(col: &Column, cell: Cell) -> String {
    match cell {
        Cell::Num(x) => format!("{x}"),
        Cell::Level(l) => col.levels().get(l as usize).cloned().unwrap_or_default(),
        Cell::Bool(b) => b.to_string(),
    }
}

pub fn parse_cell(col: &Column, text: &str) -> Result<Cell, String> {
    match &col.ty {
        ColumnType::Integer => text
            .parse::<i64>()
            .map(|v| Cell::Num(v as f64))
            .map_err(|_| format!("expected an integer, found {text:?}")),
        ColumnType::Real => match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Cell::Num(v)),
            _ => Err(format!("expected a real number, found {text:?}")),
        },
        ColumnType::Categorical(levels) => levels
            .iter()
            .position(|l| l == text)
            .map(|i| Cell::Level(i as u16))
            .ok_or_else(|| format!("{text:?} is not one of {}", levels.join(", "))),
        ColumnType::Boolean => match text.to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(Cell::Bool(true)),
            "false" | "0" | "no" => Ok(Cell::Bool(false)),
            _ => Err(format!("expected a boolean, found {text:?}")),
        },
    }
}

/// Reads a CSV table with a header row. Header order may differ from the
/// schema, but the set of names must match exactly.
pub fn load_dataset<R: Read>(
    source: R,
    schema: Arc<Schema>,
    provenance: &str,
) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut position = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        let idx = headers
            .iter()
            .position(|h| h == col.name)
            .ok_or_else(|| DataError::SchemaMismatch(format!("missing column `{}`", col.name)))?;
        position.push(idx);
    }
    if let Some(extra) = headers.iter().find(|h| schema.index_of(h).is_none()) {
        return Err(DataError::SchemaMismatch(format!(
            "unexpected column `{extra}`"
        )));
    }
    if headers.len() != schema.columns.len() {
        return Err(DataError::SchemaMismatch(
            "repeated column in header".into(),
        ));
    }

    let target = schema.target_index();
    let mut ds = Dataset::new(schema.clone(), provenance);
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let mut row = Vec::with_capacity(schema.columns.len());
        for (ci, col) in schema.columns.iter().enumerate() {
            let text = record.get(position[ci]).unwrap_or("");
            if text.is_empty() {
                return Err(DataError::MissingValue {
                    row: row_no,
                    column: col.name.clone(),
                });
            }
            let cell = parse_cell(col, text).map_err(|message| DataError::TypeError {
                row: row_no,
                column: col.name.clone(),
                message,
            })?;
            if ci == target && !matches!(cell, Cell::Num(v) if v > 0.0) {
                return Err(DataError::TypeError {
                    row: row_no,
                    column: col.name.clone(),
                    message: "target values must be positive".into(),
                });
            }
            row.push(cell);
        }
        ds.push_row(&row)?;
    }
    Ok(ds)
}

pub fn write_csv<W: Write>(ds: &Dataset, sink: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(ds.schema().columns.iter().map(|c| c.name.as_str()))?;
    for i in 0..ds.len() {
        let rec: Vec<String> = (0..ds.schema().columns.len())
            .map(|c| ds.cell_text(c, i))
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
