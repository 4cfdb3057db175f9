//! CSV ingestion: predictor encoding, response parsing and validation.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::Design;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("[read] cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("[csv] malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("[empty] input has no header or no data rows")]
    Empty,
    #[error("[duplicate-column] column '{0}' appears more than once")]
    DuplicateColumn(String),
    #[error("[unknown-column] column '{0}' is not in the header")]
    UnknownColumn(String),
    #[error("[missing-value] line {line}, column '{column}' is empty")]
    MissingValue { line: u64, column: String },
    #[error("[non-numeric] line {line}, column '{column}': '{value}' is not a number")]
    NonNumeric { line: u64, column: String, value: String },
    #[error("[unknown-level] line {line}, column '{column}': level '{value}' was not seen in training")]
    UnknownLevel { line: u64, column: String, value: String },
    #[error("[invalid-response] {0}")]
    InvalidResponse(String),
}

impl IngestError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::Read { .. } => "read",
            IngestError::Csv { .. } => "csv",
            IngestError::Empty => "empty",
            IngestError::DuplicateColumn(_) => "duplicate-column",
            IngestError::UnknownColumn(_) => "unknown-column",
            IngestError::MissingValue { .. } => "missing-value",
            IngestError::NonNumeric { .. } => "non-numeric",
            IngestError::UnknownLevel { .. } => "unknown-level",
            IngestError::InvalidResponse(_) => "invalid-response",
        }
    }
}

type Result<T> = std::result::Result<T, IngestError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Ordinal,
    Binary,
    Categorical,
}

/// Names the response and the columns needing special treatment; every
/// other column is a numeric predictor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    /// One label or value column, or one count column per class.
    pub response: Vec<String>,
    pub offset: Option<String>,
    pub categorical: Vec<String>,
    pub ordinal: Vec<String>,
    pub exclude: Vec<String>,
}

/// How the response columns are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResponseKind {
    Classes,
    Counts,
    Continuous,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ResponseData {
    /// Per-row class counts with class names in column order.
    Classes { labels: Vec<String>, counts: Vec<Vec<u32>> },
    Counts(Vec<u64>),
    Continuous(Vec<f64>),
}

/// One source column and the design columns it produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceColumn {
    pub name: String,
    pub kind: ColumnKind,
    /// Sorted levels of a categorical column, one indicator each.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
}

/// Recipe turning raw predictor columns into design columns, reused for
/// prediction on new files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Encoding {
    pub sources: Vec<SourceColumn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<String>,
}

impl Encoding {
    /// Names of the design columns in order.
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.sources {
            if s.kind == ColumnKind::Categorical {
                out.extend(s.levels.iter().map(|l| format!("{}={}", s.name, l)));
            } else {
                out.push(s.name.clone());
            }
        }
        out
    }

    fn encode(&self, table: &Table) -> Result<Design> {
        let idx: Vec<usize> = self.sources.iter().map(|s| table.index(&s.name)).collect::<Result<_>>()?;
        let n_cols = self.column_names().len();
        let mut values = Vec::with_capacity(table.rows.len() * n_cols);
        for r in 0..table.rows.len() {
            for (s, &j) in self.sources.iter().zip(&idx) {
                let cell = table.cell(r, j)?;
                if s.kind == ColumnKind::Categorical {
                    let level = s.levels.iter().position(|l| l == cell).ok_or_else(|| IngestError::UnknownLevel {
                        line: table.line(r),
                        column: s.name.clone(),
                        value: cell.to_string(),
                    })?;
                    values.extend((0..s.levels.len()).map(|k| if k == level { 1.0 } else { 0.0 }));
                } else {
                    values.push(table.number(r, j)?);
                }
            }
        }
        Ok(Design::new(table.rows.len(), n_cols, values))
    }

    /// Design matrix and optional offsets for new rows.
    pub fn apply<R: Read>(&self, reader: R) -> Result<(Design, Option<Vec<f64>>)> {
        let table = Table::read(reader)?;
        let design = self.encode(&table)?;
        let offset = match &self.offset {
            Some(name) if table.has(name) => Some(table.positive_column(name)?),
            _ => None,
        };
        Ok((design, offset))
    }

    pub fn apply_path(&self, path: &Path) -> Result<(Design, Option<Vec<f64>>)> {
        self.apply(open(path)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub design: Design,
    pub columns: Vec<ColumnMeta>,
    pub response: ResponseData,
    pub offset: Option<Vec<f64>>,
    pub encoding: Encoding,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.design.n_rows()
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    lines: Vec<u64>,
}

impl Table {
    fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(IngestError::Empty);
        }
        let mut seen = BTreeSet::new();
        for h in &header {
            if !seen.insert(h) {
                return Err(IngestError::DuplicateColumn(h.clone()));
            }
        }
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            lines.push(rec.position().map_or(0, |p| p.line()));
            rows.push(rec.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(IngestError::Empty);
        }
        Ok(Self { header, rows, lines })
    }

    fn has(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| IngestError::UnknownColumn(name.to_string()))
    }

    fn line(&self, r: usize) -> u64 {
        self.lines[r]
    }

    fn cell(&self, r: usize, j: usize) -> Result<&str> {
        let cell = self.rows[r][j].as_str();
        if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
            return Err(IngestError::MissingValue { line: self.line(r), column: self.header[j].clone() });
        }
        Ok(cell)
    }

    fn number(&self, r: usize, j: usize) -> Result<f64> {
        let cell = self.cell(r, j)?;
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(IngestError::NonNumeric { line: self.line(r), column: self.header[j].clone(), value: cell.into() }),
        }
    }

    fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.index(name)?;
        (0..self.rows.len()).map(|r| self.number(r, j)).collect()
    }

    fn positive_column(&self, name: &str) -> Result<Vec<f64>> {
        let values = self.numeric_column(name)?;
        if let Some(bad) = values.iter().find(|&&v| v <= 0.0) {
            return Err(IngestError::InvalidResponse(format!("offset column '{name}' has nonpositive value {bad}")));
        }
        Ok(values)
    }

    fn count(&self, r: usize, j: usize) -> Result<u64> {
        let v = self.number(r, j)?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(IngestError::InvalidResponse(format!(
                "line {}, column '{}': {v} is not a nonnegative integer count",
                self.line(r),
                self.header[j]
            )));
        }
        Ok(v as u64)
    }
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Csv { line, message: e.to_string() }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| IngestError::Read { path: path.display().to_string(), message: e.to_string() })
}

pub fn ingest(path: &Path, schema: &Schema, response: ResponseKind) -> Result<Dataset> {
    ingest_reader(open(path)?, schema, response)
}

/// Read a training table. Source columns keep their file order; categorical
/// columns expand to one indicator per level, levels sorted.
pub fn ingest_reader<R: Read>(reader: R, schema: &Schema, response: ResponseKind) -> Result<Dataset> {
    let table = Table::read(reader)?;
    for name in schema.response.iter().chain(&schema.offset).chain(&schema.categorical).chain(&schema.ordinal).chain(&schema.exclude) {
        table.index(name)?;
    }
    if schema.response.is_empty() {
        return Err(IngestError::InvalidResponse("no response column named".into()));
    }
    let reserved = |h: &String| schema.response.contains(h) || schema.offset.as_ref() == Some(h) || schema.exclude.contains(h);
    let mut sources = Vec::new();
    for (j, name) in table.header.iter().enumerate() {
        if reserved(name) {
            continue;
        }
        let source = if schema.categorical.contains(name) {
            let mut levels = BTreeSet::new();
            for r in 0..table.rows.len() {
                levels.insert(table.cell(r, j)?.to_string());
            }
            SourceColumn { name: name.clone(), kind: ColumnKind::Categorical, levels: levels.into_iter().collect() }
        } else {
            let values = table.numeric_column(name)?;
            let kind = if schema.ordinal.contains(name) {
                ColumnKind::Ordinal
            } else if values.iter().all(|&v| v == 0.0 || v == 1.0) {
                ColumnKind::Binary
            } else {
                ColumnKind::Continuous
            };
            SourceColumn { name: name.clone(), kind, levels: Vec::new() }
        };
        sources.push(source);
    }
    let encoding = Encoding { sources, offset: schema.offset.clone() };
    let design = encoding.encode(&table)?;
    let mut columns = Vec::new();
    for s in &encoding.sources {
        if s.kind == ColumnKind::Categorical {
            for l in &s.levels {
                columns.push(ColumnMeta { name: format!("{}={}", s.name, l), kind: ColumnKind::Binary, source: s.name.clone() });
            }
        } else {
            columns.push(ColumnMeta { name: s.name.clone(), kind: s.kind, source: s.name.clone() });
        }
    }
    for (j, c) in columns.iter().enumerate() {
        let mut col = design.column(j);
        let first = col.next();
        if col.all(|v| Some(v) == first) {
            log::warn!("predictor '{}' is constant; it has no cutpoints and is never split on", c.name);
        }
    }
    let offset = schema.offset.as_deref().map(|name| table.positive_column(name)).transpose()?;
    let response = read_response(&table, &schema.response, response)?;
    Ok(Dataset { design, columns, response, offset, encoding })
}

fn read_response(table: &Table, names: &[String], kind: ResponseKind) -> Result<ResponseData> {
    let idx: Vec<usize> = names.iter().map(|n| table.index(n)).collect::<Result<_>>()?;
    let n = table.rows.len();
    match kind {
        ResponseKind::Classes if idx.len() == 1 => {
            let j = idx[0];
            let cells: Vec<&str> = (0..n).map(|r| table.cell(r, j)).collect::<Result<_>>()?;
            let labels: Vec<String> = cells.iter().map(|c| c.to_string()).collect::<BTreeSet<_>>().into_iter().collect();
            let counts = cells
                .iter()
                .map(|c| {
                    let k = labels.iter().position(|l| l == c).expect("label collected above");
                    (0..labels.len()).map(|i| u32::from(i == k)).collect()
                })
                .collect();
            Ok(ResponseData::Classes { labels, counts })
        }
        ResponseKind::Classes => {
            let mut counts = vec![Vec::with_capacity(idx.len()); n];
            for (r, row) in counts.iter_mut().enumerate() {
                for &j in &idx {
                    row.push(table.count(r, j)? as u32);
                }
            }
            Ok(ResponseData::Classes { labels: names.to_vec(), counts })
        }
        ResponseKind::Counts | ResponseKind::Continuous if idx.len() != 1 => {
            Err(IngestError::InvalidResponse(format!("expected one response column, got {}", idx.len())))
        }
        ResponseKind::Counts => Ok(ResponseData::Counts((0..n).map(|r| table.count(r, idx[0])).collect::<Result<_>>()?)),
        ResponseKind::Continuous => Ok(ResponseData::Continuous(table.numeric_column(&names[0])?)),
    }
}
