//! Per-column statistics consumed by candidate generation and featurization.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::table::{parse_date, parse_integer, tokenize_name, Table, ValueType};

/// Default number of distinct values kept in the deterministic sample.
pub const SAMPLE_SIZE: usize = 20;

/// Distinct-ratio threshold above which a column counts as near-unique.
pub const DEFAULT_UNIQ_THRESHOLD: f64 = 0.95;

/// Statistics of a single column.
///
/// `distinct_values` is an exact set of canonicalized non-null values (exact
/// containment checks; no probabilistic sketch).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnProfile {
    pub name: String,
    pub value_type: ValueType,
    pub row_count: usize,
    pub distinct_count: usize,
    pub distinct_ratio: f64,
    pub null_count: usize,
    /// Present iff value_type is numeric or date (dates as days since epoch).
    pub min_max: Option<(f64, f64)>,
    pub avg_value_length: f64,
    pub name_tokens: Vec<String>,
    pub position: usize,
    /// Rank among near-unique columns of the table, None when not near-unique.
    pub unique_position: Option<usize>,
    pub value_sample: Vec<String>,
    pub distinct_values: BTreeSet<String>,
    /// True when the source table hit the row cap during load.
    pub capped: bool,
}

/// Canonicalize a raw value for distinctness and containment checks.
///
/// Numeric values are normalized through f64 so that "1" and "1.0" compare
/// equal across integer/float columns; dates are normalized to ISO.
pub fn canonical_value(raw: &str, value_type: ValueType) -> String {
    match value_type {
        ValueType::Integer | ValueType::Float => match raw.parse::<f64>() {
            Ok(f) if f.is_finite() => {
                if f.fract() == 0.0 && f.abs() < 1e15 {
                    format!("{}", f as i64)
                } else {
                    format!("{}", f)
                }
            }
            _ => raw.to_string(),
        },
        ValueType::Date => parse_date(raw)
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_else(|| raw.to_string()),
        ValueType::Boolean => match raw.to_ascii_lowercase().as_str() {
            "true" | "1" => "true".to_string(),
            "false" | "0" => "false".to_string(),
            _ => raw.to_string(),
        },
        ValueType::String => raw.to_string(),
    }
}

fn numeric_of(raw: &str, value_type: ValueType) -> Option<f64> {
    match value_type {
        ValueType::Integer => parse_integer(raw)
            .map(|i| i as f64)
            .or_else(|| raw.parse::<f64>().ok()),
        ValueType::Float => raw.parse::<f64>().ok(),
        ValueType::Date => parse_date(raw)
            .map(|d| d.signed_duration_since(chrono::NaiveDate::from_ymd_opt(1970, 1, 1).unwrap()).num_days() as f64),
        _ => None,
    }
}

/// Profile a single column. Deterministic given the seed.
pub fn profile_column(table: &Table, index: usize, seed: u64) -> ColumnProfile {
    let uniq_ranks = unique_positions(table, DEFAULT_UNIQ_THRESHOLD);
    profile_column_inner(table, index, seed, uniq_ranks[index])
}

/// Profile every column of a table in one pass.
pub fn profile_table(table: &Table, seed: u64) -> Vec<ColumnProfile> {
    let uniq_ranks = unique_positions(table, DEFAULT_UNIQ_THRESHOLD);
    (0..table.columns.len())
        .map(|i| profile_column_inner(table, i, seed, uniq_ranks[i]))
        .collect()
}

fn profile_column_inner(
    table: &Table,
    index: usize,
    seed: u64,
    unique_position: Option<usize>,
) -> ColumnProfile {
    let col = &table.columns[index];
    let vt = col.value_type;

    let mut distinct = BTreeSet::new();
    let mut null_count = 0usize;
    let mut total_len = 0usize;
    let mut non_null = 0usize;
    let mut min: Option<f64> = None;
    let mut max: Option<f64> = None;

    for v in &col.values {
        match v {
            None => null_count += 1,
            Some(raw) => {
                non_null += 1;
                total_len += raw.chars().count();
                distinct.insert(canonical_value(raw, vt));
                if let Some(n) = numeric_of(raw, vt) {
                    min = Some(min.map_or(n, |m| m.min(n)));
                    max = Some(max.map_or(n, |m| m.max(n)));
                }
            }
        }
    }

    let row_count = col.values.len();
    let distinct_count = distinct.len();
    let distinct_ratio = distinct_count as f64 / (row_count.saturating_sub(null_count)).max(1) as f64;
    let avg_value_length = if non_null > 0 { total_len as f64 / non_null as f64 } else { 0.0 };
    let min_max = match (vt.is_numeric() || vt == ValueType::Date, min, max) {
        (true, Some(lo), Some(hi)) => Some((lo, hi)),
        _ => None,
    };

    // Deterministic sample: seeded shuffle over the sorted distinct set.
    let mut pool: Vec<String> = distinct.iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9e3779b97f4a7c15));
    pool.shuffle(&mut rng);
    pool.truncate(SAMPLE_SIZE);

    ColumnProfile {
        name: col.name.clone(),
        value_type: vt,
        row_count,
        distinct_count,
        distinct_ratio,
        null_count,
        min_max,
        avg_value_length,
        name_tokens: tokenize_name(&col.name),
        position: index,
        unique_position,
        value_sample: pool,
        distinct_values: distinct,
        capped: table.truncated,
    }
}

/// Rank of each near-unique column among the table's near-unique columns.
fn unique_positions(table: &Table, threshold: f64) -> Vec<Option<usize>> {
    let mut ranks = vec![None; table.columns.len()];
    let mut next = 0usize;
    for (i, col) in table.columns.iter().enumerate() {
        let mut distinct = BTreeSet::new();
        let mut nulls = 0usize;
        for v in &col.values {
            match v {
                None => nulls += 1,
                Some(raw) => {
                    distinct.insert(canonical_value(raw, col.value_type));
                }
            }
        }
        let denom = (col.values.len().saturating_sub(nulls)).max(1);
        let ratio = distinct.len() as f64 / denom as f64;
        if ratio >= threshold && col.values.len() >= 1 {
            ranks[i] = Some(next);
            next += 1;
        }
    }
    ranks
}
