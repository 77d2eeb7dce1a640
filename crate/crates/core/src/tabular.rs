//! Immutable tables of canonical cell tokens, plus CSV ingestion.
//!
//! Cells are compared as canonical strings only. No type inference happens
//! anywhere, so `"30"` and `"30.0"` are different values.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single canonicalized cell.
///
/// `Missing` is a groupable category of its own; it is never dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellValue {
    Text(String),
    Missing,
}

impl CellValue {
    pub fn text(s: impl Into<String>) -> Self {
        CellValue::Text(s.into())
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, CellValue::Missing)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            CellValue::Text(s) => Some(s),
            CellValue::Missing => None,
        }
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Text(s) => f.write_str(s),
            CellValue::Missing => f.write_str("<missing>"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    QuasiIdentifier,
    #[default]
    Attribute,
    Identifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnSpec {
    pub name: String,
    pub role: ColumnRole,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, role: ColumnRole) -> Self {
        Self { name: name.into(), role }
    }

    pub fn attribute(name: impl Into<String>) -> Self {
        Self::new(name, ColumnRole::Attribute)
    }
}

/// Rectangular, immutable grid of cells with named columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<CellValue>>,
    source_label: String,
}

impl Table {
    /// Builds a table, checking that column names are non-empty and unique and
    /// that every row has one cell per column.
    pub fn new(
        columns: Vec<ColumnSpec>,
        rows: Vec<Vec<CellValue>>,
        source_label: impl Into<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(columns.len());
        for c in &columns {
            if c.name.is_empty() {
                return Err(Error::InvalidTable("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidTable(format!("duplicate column name `{}`", c.name)));
            }
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(Error::InvalidTable(format!(
                "row {} has {} cells, expected {}",
                i + 1,
                row.len(),
                columns.len()
            )));
        }
        Ok(Self { columns, rows, source_label: source_label.into() })
    }

    /// Convenience constructor from raw strings, canonicalized with default
    /// [`IngestOptions`]. All columns get the `attribute` role.
    pub fn from_text<N: AsRef<str>, V: AsRef<str>>(names: &[N], rows: &[Vec<V>]) -> Result<Self> {
        let opts = IngestOptions::default();
        let columns = names.iter().map(|n| ColumnSpec::attribute(n.as_ref())).collect();
        let rows =
            rows.iter().map(|r| r.iter().map(|c| canonicalize_value(c.as_ref(), &opts)).collect()).collect();
        Self::new(columns, rows, "")
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn rows(&self) -> &[Vec<CellValue>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c.name == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column_indices<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.column_index(n.as_ref())).collect()
    }

    /// Returns a copy with the named columns tagged with `role`.
    pub fn with_role<S: AsRef<str>>(&self, names: &[S], role: ColumnRole) -> Result<Self> {
        let idx = self.column_indices(names)?;
        let mut out = self.clone();
        for i in idx {
            out.columns[i].role = role;
        }
        Ok(out)
    }

    pub fn with_label(&self, label: impl Into<String>) -> Self {
        let mut out = self.clone();
        out.source_label = label.into();
        out
    }

    /// Names of the columns carrying `role`, in column order.
    pub fn columns_with_role(&self, role: ColumnRole) -> Vec<String> {
        self.columns.iter().filter(|c| c.role == role).map(|c| c.name.clone()).collect()
    }

    /// Borrowed projection onto column positions; one tuple per row.
    pub(crate) fn project_indices<'a>(
        &'a self,
        idx: &'a [usize],
    ) -> impl Iterator<Item = Vec<&'a CellValue>> + 'a {
        self.rows.iter().map(move |r| idx.iter().map(|&i| &r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    pub delimiter: char,
    pub has_header: bool,
    pub empty_is_missing: bool,
    pub case_fold: bool,
    pub drop_columns: Vec<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            delimiter: ',',
            has_header: true,
            empty_is_missing: true,
            case_fold: false,
            drop_columns: Vec::new(),
        }
    }
}

impl IngestOptions {
    fn delimiter_byte(&self) -> Result<u8> {
        let d = self.delimiter;
        if matches!(d, '"' | '\n' | '\r') {
            return Err(Error::Argument(format!("delimiter {d:?} is not allowed")));
        }
        if !d.is_ascii() {
            return Err(Error::Argument(format!("delimiter {d:?} must be a single ASCII character")));
        }
        Ok(d as u8)
    }
}

pub fn canonicalize_value(raw: &str, options: &IngestOptions) -> CellValue {
    let trimmed = raw.trim();
    if trimmed.is_empty() && options.empty_is_missing {
        return CellValue::Missing;
    }
    if options.case_fold {
        CellValue::Text(trimmed.to_lowercase())
    } else {
        CellValue::Text(trimmed.to_string())
    }
}

/// Reads RFC-4180 style delimited UTF-8 text into a [`Table`].
pub fn load_table<R: Read>(source: R, options: &IngestOptions) -> Result<Table> {
    load_table_labeled(source, options, "")
}

pub fn load_table_labeled<R: Read>(source: R, options: &IngestOptions, label: &str) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter_byte()?)
        .has_headers(false)
        .flexible(true)
        .from_reader(source);

    let mut records = reader.records();
    let mut names: Option<Vec<String>> = None;
    if options.has_header {
        let header = match records.next() {
            Some(r) => r.map_err(|e| Error::Ingest(format!("header: {e}")))?,
            None => return Err(Error::Ingest("empty input: missing header".into())),
        };
        names = Some(header.iter().map(|h| h.trim().to_string()).collect());
    }

    let mut rows: Vec<Vec<CellValue>> = Vec::new();
    for (i, rec) in records.enumerate() {
        let row_no = i + 1;
        let rec = rec.map_err(|e| Error::IngestRow { row: row_no, message: e.to_string() })?;
        let width = names.get_or_insert_with(|| (1..=rec.len()).map(|c| format!("c{c}")).collect()).len();
        if rec.len() != width {
            return Err(Error::IngestRow {
                row: row_no,
                message: format!("ragged row: {} fields, expected {}", rec.len(), width),
            });
        }
        rows.push(rec.iter().map(|c| canonicalize_value(c, options)).collect());
    }

    let names = names.unwrap_or_default();
    let mut seen = HashSet::new();
    for n in &names {
        if n.is_empty() {
            return Err(Error::Ingest("empty column name in header".into()));
        }
        if !seen.insert(n.as_str()) {
            return Err(Error::Ingest(format!("duplicate column name `{n}`")));
        }
    }

    let mut keep: Vec<bool> = vec![true; names.len()];
    for d in &options.drop_columns {
        let i = names.iter().position(|n| n == d).ok_or_else(|| Error::UnknownColumn(d.clone()))?;
        keep[i] = false;
    }
    let columns =
        names.iter().zip(&keep).filter(|(_, k)| **k).map(|(n, _)| ColumnSpec::attribute(n.clone())).collect();
    let rows = rows
        .into_iter()
        .map(|r| r.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(c, _)| c).collect())
        .collect();
    Table::new(columns, rows, label)
}

/// Writes a table back out as delimited text with a header. `Missing` becomes
/// an empty field.
pub fn write_table<W: Write>(table: &Table, sink: W, delimiter: char) -> Result<()> {
    let opts = IngestOptions { delimiter, ..Default::default() };
    let mut w = csv::WriterBuilder::new().delimiter(opts.delimiter_byte()?).from_writer(sink);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(table.columns.iter().map(|c| c.name.as_str())).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.as_str().unwrap_or(""))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-row tuples of the named columns, preserving row order and multiplicity.
pub fn project<S: AsRef<str>>(table: &Table, attrs: &[S]) -> Result<Vec<Vec<CellValue>>> {
    let idx = table.column_indices(attrs)?;
    Ok(table.project_indices(&idx).map(|t| t.into_iter().cloned().collect()).collect())
}
