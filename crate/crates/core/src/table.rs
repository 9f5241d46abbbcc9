//! Table loading, value-type inference, and name tokenization.
//!
//! Tables are immutable after load. Values are stored as optional strings,
//! with `None` for nulls (empty string, "NULL", "null", "NA" by default).

use std::collections::HashSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inferred value type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Integer,
    Float,
    String,
    Date,
    Boolean,
}

impl ValueType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::Integer | ValueType::Float)
    }
}

/// A single column: name plus raw values (None = null).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<String>>,
    pub value_type: ValueType,
}

/// An in-memory table loaded from a delimited file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub row_count: usize,
    /// True when the row cap cut the load short.
    pub truncated: bool,
}

/// Address of a column inside a table set: (table index, column index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: usize,
    pub column: usize,
}

impl ColumnRef {
    pub fn new(table: usize, column: usize) -> Self {
        ColumnRef { table, column }
    }
}

/// Options for loading a delimited file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Rows beyond this cap are not read.
    pub row_cap: Option<usize>,
    /// Tokens treated as null, besides the empty string.
    pub null_tokens: Vec<String>,
    /// Fraction of ragged rows tolerated before the file is rejected.
    pub ragged_tolerance: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            has_header: true,
            row_cap: Some(100_000),
            null_tokens: vec!["NULL".into(), "null".into(), "NA".into()],
            ragged_tolerance: 0.01,
        }
    }
}

/// Load a delimited table file.
///
/// Duplicate header names are deduplicated by suffixing ("id", "id_2", ...).
/// Ragged rows within tolerance are padded/truncated; beyond it the file is
/// rejected. An empty file (no data rows) is rejected.
pub fn load_table(path: &Path, options: &LoadOptions) -> Result<Table> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Csv { path: path.into(), source: e })?;

    let headers: Vec<String> = if options.has_header {
        let hdr = reader
            .headers()
            .map_err(|e| Error::Csv { path: path.into(), source: e })?;
        dedup_names(hdr.iter().map(|h| h.trim().to_string()).collect())
    } else {
        Vec::new()
    };

    let mut rows: Vec<Vec<Option<String>>> = Vec::new();
    let mut width = headers.len();
    let mut ragged = 0usize;
    let mut total = 0usize;
    let mut truncated = false;

    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv { path: path.into(), source: e })?;
        total += 1;
        if let Some(cap) = options.row_cap {
            if rows.len() >= cap {
                truncated = true;
                break;
            }
        }
        if width == 0 {
            width = record.len();
        }
        if record.len() != width {
            ragged += 1;
        }
        let mut row: Vec<Option<String>> = record
            .iter()
            .take(width)
            .map(|v| normalize_cell(v, &options.null_tokens))
            .collect();
        row.resize(width, None);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::EmptyFile(path.into()));
    }
    let tol = options.ragged_tolerance;
    if ragged as f64 > tol * total as f64 {
        return Err(Error::RaggedRows { path: path.into(), ragged, total, tolerance: tol });
    }

    let headers = if headers.is_empty() {
        (0..width).map(|i| format!("column_{}", i + 1)).collect()
    } else {
        headers
    };

    let row_count = rows.len();
    let columns = headers
        .into_iter()
        .enumerate()
        .map(|(ci, name)| {
            let values: Vec<Option<String>> = rows.iter().map(|r| r[ci].clone()).collect();
            let value_type = infer_value_type_opt(&values);
            Column { name, values, value_type }
        })
        .collect();

    Ok(Table { name, columns, row_count, truncated })
}

fn normalize_cell(raw: &str, null_tokens: &[String]) -> Option<String> {
    let v = raw.trim();
    if v.is_empty() || null_tokens.iter().any(|t| t == v) {
        None
    } else {
        Some(v.to_string())
    }
}

fn dedup_names(names: Vec<String>) -> Vec<String> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let base = if name.is_empty() { "column".to_string() } else { name };
        let mut candidate = base.clone();
        let mut n = 1;
        while !seen.insert(candidate.clone()) {
            n += 1;
            candidate = format!("{}_{}", base, n);
        }
        out.push(candidate);
    }
    out
}

/// Infer a column value type from textual values; empty entries are nulls.
///
/// Order: integer, float, date, boolean, string. All-null columns are string.
pub fn infer_value_type(values: &[&str]) -> ValueType {
    let opts: Vec<Option<String>> = values
        .iter()
        .map(|v| if v.trim().is_empty() { None } else { Some(v.trim().to_string()) })
        .collect();
    infer_value_type_opt(&opts)
}

pub(crate) fn infer_value_type_opt(values: &[Option<String>]) -> ValueType {
    let non_null: Vec<&str> = values.iter().flatten().map(|s| s.as_str()).collect();
    if non_null.is_empty() {
        return ValueType::String;
    }
    if non_null.iter().all(|v| parse_integer(v).is_some()) {
        return ValueType::Integer;
    }
    if non_null.iter().all(|v| v.parse::<f64>().map(|f| f.is_finite()).unwrap_or(false)) {
        return ValueType::Float;
    }
    if non_null.iter().all(|v| parse_date(v).is_some()) {
        return ValueType::Date;
    }
    if non_null.iter().all(|v| is_boolean_token(v)) {
        return ValueType::Boolean;
    }
    ValueType::String
}

pub(crate) fn parse_integer(v: &str) -> Option<i64> {
    v.parse::<i64>().ok()
}

const DATE_FORMATS: &[&str] = &["%Y-%m-%d", "%Y/%m/%d", "%m/%d/%Y"];

pub(crate) fn parse_date(v: &str) -> Option<NaiveDate> {
    DATE_FORMATS.iter().find_map(|f| NaiveDate::parse_from_str(v, f).ok())
}

fn is_boolean_token(v: &str) -> bool {
    matches!(v.to_ascii_lowercase().as_str(), "true" | "false" | "0" | "1")
}

/// Split a raw name into lowercase tokens on delimiters and camel-case
/// boundaries. Empty tokens are dropped.
pub fn tokenize_name(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let chars: Vec<char> = raw.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            continue;
        }
        // camel boundary: lower->Upper, or Upper followed by lower after a run
        // of uppers (e.g. "HTTPServer" -> "http", "server")
        if !current.is_empty() {
            let prev = chars[i - 1];
            let lower_to_upper = prev.is_lowercase() && c.is_uppercase();
            let upper_run_end = prev.is_uppercase()
                && c.is_lowercase()
                && current.chars().count() > 1;
            let digit_boundary = prev.is_ascii_digit() != c.is_ascii_digit();
            if lower_to_upper || digit_boundary {
                tokens.push(std::mem::take(&mut current));
            } else if upper_run_end {
                let keep: char = current.chars().last().unwrap();
                let head: String =
                    current.chars().take(current.chars().count() - 1).collect();
                tokens.push(head);
                current = keep.to_string();
            }
        }
        current.push(c);
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
        .into_iter()
        .map(|t| t.to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

impl Table {
    /// Build a table directly from columns of raw values (used by tests and
    /// the synthetic generator).
    pub fn from_columns(name: &str, cols: Vec<(String, Vec<Option<String>>)>) -> Table {
        let row_count = cols.first().map(|(_, v)| v.len()).unwrap_or(0);
        let names = dedup_names(cols.iter().map(|(n, _)| n.clone()).collect());
        let columns = names
            .into_iter()
            .zip(cols)
            .map(|(name, (_, values))| {
                assert_eq!(values.len(), row_count, "all columns must have equal length");
                let value_type = infer_value_type_opt(&values);
                Column { name, values, value_type }
            })
            .collect();
        Table { name: name.to_string(), columns, row_count, truncated: false }
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }
}
