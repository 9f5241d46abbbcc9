//! Candidate join enumeration: near-unique columns (UCC step) plus
//! approximate inclusion dependencies (IND step), classified N:1 or 1:1.

use serde::{Deserialize, Serialize};

use crate::profile::ColumnProfile;
use crate::table::{ColumnRef, Table, ValueType};

pub const DEFAULT_CONTAINMENT_THRESHOLD: f64 = 0.9;

/// Join cardinality class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cardinality {
    #[serde(rename = "n:1")]
    N1,
    #[serde(rename = "1:1")]
    OneOne,
}

/// A directed candidate join: source is the N/FK side, target the 1/PK side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JoinCandidate {
    pub source: ColumnRef,
    pub target: ColumnRef,
    pub cardinality: Cardinality,
    /// |distinct(source) ∩ distinct(target)| / |distinct(source)|
    pub left_containment: f64,
    pub right_containment: f64,
    /// Raw classifier score; populated by scoring.
    pub raw_score: f64,
    /// Calibrated probability; populated by scoring.
    pub probability: f64,
}

/// Columns of a table with distinct_ratio at or above the threshold.
pub fn find_unique_columns(profiles: &[ColumnProfile], uniq_threshold: f64) -> Vec<usize> {
    profiles
        .iter()
        .enumerate()
        .filter(|(_, p)| p.distinct_ratio >= uniq_threshold && p.row_count >= 1 && p.distinct_count >= 1)
        .map(|(i, _)| i)
        .collect()
}

/// Cardinality of a (source, target) profile pair; None means no candidate.
pub fn classify_cardinality(
    source: &ColumnProfile,
    target: &ColumnProfile,
    uniq_threshold: f64,
) -> Option<Cardinality> {
    let s = source.distinct_ratio >= uniq_threshold && source.distinct_count >= 1;
    let t = target.distinct_ratio >= uniq_threshold && target.distinct_count >= 1;
    match (s, t) {
        (true, true) => Some(Cardinality::OneOne),
        (_, true) => Some(Cardinality::N1),
        _ => None,
    }
}

fn types_compatible(a: &ColumnProfile, b: &ColumnProfile) -> bool {
    use ValueType::*;
    match (a.value_type, b.value_type) {
        (Integer, Integer) | (Float, Float) | (Integer, Float) | (Float, Integer) => true,
        (String, String) | (Date, Date) | (Boolean, Boolean) => true,
        // cross string/numeric only for short values, after casting to text
        (String, Integer) | (String, Float) | (Integer, String) | (Float, String) => {
            a.avg_value_length <= 20.0 && b.avg_value_length <= 20.0
        }
        _ => false,
    }
}

fn containment(source: &ColumnProfile, target: &ColumnProfile) -> f64 {
    if source.distinct_count == 0 {
        return 0.0;
    }
    let inter = source
        .distinct_values
        .iter()
        .filter(|v| target.distinct_values.contains(*v))
        .count();
    inter as f64 / source.distinct_count as f64
}

/// Enumerate candidate joins over all ordered cross-table column pairs.
///
/// Output order is deterministic: source table, source column, target table,
/// target column. 1:1 candidates are materialized in both directions.
pub fn enumerate_candidates(
    tables: &[Table],
    profiles: &[Vec<ColumnProfile>],
    containment_threshold: f64,
    uniq_threshold: f64,
) -> Vec<JoinCandidate> {
    let mut out = Vec::new();
    for (ti, _) in tables.iter().enumerate() {
        for (ci, sp) in profiles[ti].iter().enumerate() {
            if sp.distinct_count == 0 {
                continue;
            }
            for (tj, _) in tables.iter().enumerate() {
                if ti == tj {
                    continue;
                }
                for (cj, tp) in profiles[tj].iter().enumerate() {
                    if tp.distinct_count == 0 || !types_compatible(sp, tp) {
                        continue;
                    }
                    let Some(card) = classify_cardinality(sp, tp, uniq_threshold) else {
                        continue;
                    };
                    let left = containment(sp, tp);
                    match card {
                        Cardinality::OneOne => {
                            let right = containment(tp, sp);
                            if left.min(right) >= containment_threshold {
                                out.push(JoinCandidate {
                                    source: ColumnRef::new(ti, ci),
                                    target: ColumnRef::new(tj, cj),
                                    cardinality: Cardinality::OneOne,
                                    left_containment: left,
                                    right_containment: right,
                                    raw_score: 0.0,
                                    probability: 0.0,
                                });
                            }
                        }
                        Cardinality::N1 => {
                            if left >= containment_threshold {
                                let right = containment(tp, sp);
                                out.push(JoinCandidate {
                                    source: ColumnRef::new(ti, ci),
                                    target: ColumnRef::new(tj, cj),
                                    cardinality: Cardinality::N1,
                                    left_containment: left,
                                    right_containment: right,
                                    raw_score: 0.0,
                                    probability: 0.0,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
