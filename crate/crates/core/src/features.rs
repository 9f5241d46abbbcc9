//! Featurization of candidate pairs: one fixed schema per cardinality class.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::candidates::{Cardinality, JoinCandidate};
use crate::profile::ColumnProfile;
use crate::table::{tokenize_name, Table, ValueType};
use crate::text;

/// Version of the feature schema; serialized with trained models.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

const SHARED_FEATURES: &[&str] = &[
    "jaccard_similarity",
    "jaccard_containment",
    "edit_distance",
    "jaro_winkler",
    "embedding_similarity",
    "token_count_i",
    "token_count_j",
    "char_count_i",
    "char_count_j",
    "col_frequency_i",
    "col_frequency_j",
    "col_position_i",
    "col_position_j",
    "col_relative_position_i",
    "col_relative_position_j",
    "unique_col_position_i",
    "unique_col_position_j",
    "left_containment",
    "right_containment",
    "value_distinct_ratio_i",
    "value_distinct_ratio_j",
    "range_overlap",
    "range_numeric",
    "emd_score",
    "value_length_i",
    "value_length_j",
    "value_type_integer_i",
    "value_type_float_i",
    "value_type_string_i",
    "value_type_date_i",
    "value_type_boolean_i",
    "value_type_integer_j",
    "value_type_float_j",
    "value_type_string_j",
    "value_type_date_j",
    "value_type_boolean_j",
    "row_cnt_i",
    "row_cnt_j",
];

const N1_EXTRA: &[&str] = &["max_containment", "row_ratio", "col_ratio", "cell_ratio"];
const ONEONE_EXTRA: &[&str] = &["min_containment", "table_embedding", "header_jaccard"];

/// Features zeroed in schema-only mode (metadata-only prediction).
const DATA_FEATURES: &[&str] = &[
    "unique_col_position_i",
    "unique_col_position_j",
    "left_containment",
    "right_containment",
    "max_containment",
    "min_containment",
    "value_distinct_ratio_i",
    "value_distinct_ratio_j",
    "range_overlap",
    "range_numeric",
    "emd_score",
    "value_length_i",
    "value_length_j",
    "row_cnt_i",
    "row_cnt_j",
    "row_ratio",
    "col_ratio",
    "cell_ratio",
];

pub fn feature_names(cardinality: Cardinality) -> Vec<&'static str> {
    let extra = match cardinality {
        Cardinality::N1 => N1_EXTRA,
        Cardinality::OneOne => ONEONE_EXTRA,
    };
    SHARED_FEATURES.iter().chain(extra.iter()).copied().collect()
}

/// Indices of data-value features within a schema (for schema-only masking).
pub fn data_feature_indices(cardinality: Cardinality) -> Vec<usize> {
    feature_names(cardinality)
        .iter()
        .enumerate()
        .filter(|(_, n)| DATA_FEATURES.contains(n))
        .map(|(i, _)| i)
        .collect()
}

/// Column-name frequency table built over the training corpus (IDF-style).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CorpusStats {
    pub name_counts: BTreeMap<String, u64>,
}

impl CorpusStats {
    pub fn record(&mut self, name: &str) {
        let key = tokenize_name(name).join(" ");
        *self.name_counts.entry(key).or_insert(0) += 1;
    }

    /// Frequency of a column name; unseen names get 1.
    pub fn frequency(&self, name: &str) -> u64 {
        let key = tokenize_name(name).join(" ");
        self.name_counts.get(&key).copied().unwrap_or(1).max(1)
    }
}

/// Four name similarities in [0,1]: token-Jaccard, token-containment,
/// normalized edit, Jaro-Winkler. Each is the max over (name_a, name_b) and
/// (table_a + " " + name_a, name_b), with name_a on the PK/1 side.
pub fn name_similarities(name_a: &str, table_a: &str, name_b: &str) -> [f64; 4] {
    let ta = tokenize_name(name_a);
    let tb = tokenize_name(name_b);
    let prefixed = format!("{} {}", table_a, name_a);
    let tp = tokenize_name(&prefixed);

    let joined_a = ta.join(" ");
    let joined_b = tb.join(" ");
    let joined_p = tp.join(" ");

    [
        text::token_jaccard(&ta, &tb).max(text::token_jaccard(&tp, &tb)),
        text::token_containment(&ta, &tb).max(text::token_containment(&tp, &tb)),
        text::normalized_edit_similarity(&joined_a, &joined_b)
            .max(text::normalized_edit_similarity(&joined_p, &joined_b)),
        text::jaro_winkler(&joined_a, &joined_b).max(text::jaro_winkler(&joined_p, &joined_b)),
    ]
}

/// Trigram-cosine name similarity, with the same table-prefix max scheme.
pub fn embedding_similarity(name_a: &str, table_a: &str, name_b: &str) -> f64 {
    let direct = text::trigram_cosine(name_a, name_b);
    let prefixed = format!("{} {}", table_a, name_a);
    direct.max(text::trigram_cosine(&prefixed, name_b))
}

/// Interval-Jaccard overlap of two [min,max] ranges.
pub fn range_overlap(a: Option<(f64, f64)>, b: Option<(f64, f64)>) -> f64 {
    let (Some((a_lo, a_hi)), Some((b_lo, b_hi))) = (a, b) else {
        return 0.0;
    };
    let inter = (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0);
    let union = (a_hi - a_lo) + (b_hi - b_lo) - inter;
    if union <= 0.0 {
        // both degenerate: 1.0 when equal points, else 0.0
        return if a_lo == b_lo && a_hi == b_hi && a_hi.min(b_hi) >= a_lo.max(b_lo) {
            1.0
        } else {
            0.0
        };
    }
    inter / union
}

/// 1-D earth mover's distance between two empirical distributions after each
/// side is min-max normalized into [0,1], by the sorted-quantile method.
/// Empty sides yield the sentinel maximum 1.0.
pub fn emd_score(values_a: &[f64], values_b: &[f64]) -> f64 {
    if values_a.is_empty() || values_b.is_empty() {
        return 1.0;
    }
    let a = normalize_side(values_a);
    let b = normalize_side(values_b);
    let q = a.len().max(b.len()).min(256);
    let mut total = 0.0;
    for t in 0..q {
        let p = (t as f64 + 0.5) / q as f64;
        total += (inv_cdf(&a, p) - inv_cdf(&b, p)).abs();
    }
    total / q as f64
}

fn normalize_side(values: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|x, y| x.partial_cmp(y).unwrap());
    distinct.dedup();
    let lo = distinct[0];
    let hi = *distinct.last().unwrap();
    if hi == lo {
        return vec![0.0];
    }
    distinct.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

fn inv_cdf(sorted: &[f64], p: f64) -> f64 {
    let idx = ((p * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
    sorted[idx]
}

/// EMD over a column's distinct values: numeric/date columns use the parsed
/// values, other types use the ranks of the sorted distinct values.
pub fn column_emd_values(profile: &ColumnProfile) -> Vec<f64> {
    if profile.value_type.is_numeric() || profile.value_type == ValueType::Date {
        let mut parsed: Vec<f64> = profile
            .distinct_values
            .iter()
            .filter_map(|v| v.parse::<f64>().ok())
            .collect();
        if parsed.len() == profile.distinct_values.len() && !parsed.is_empty() {
            parsed.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return parsed;
        }
    }
    (0..profile.distinct_values.len()).map(|i| i as f64).collect()
}

/// Everything featurization needs besides the candidate itself.
pub struct FeatureContext<'a> {
    pub tables: &'a [Table],
    pub profiles: &'a [Vec<ColumnProfile>],
    pub corpus_stats: &'a CorpusStats,
}

impl<'a> FeatureContext<'a> {
    fn profile(&self, r: crate::table::ColumnRef) -> &ColumnProfile {
        &self.profiles[r.table][r.column]
    }
}

fn one_hot(vt: ValueType) -> [f64; 5] {
    let mut v = [0.0; 5];
    let idx = match vt {
        ValueType::Integer => 0,
        ValueType::Float => 1,
        ValueType::String => 2,
        ValueType::Date => 3,
        ValueType::Boolean => 4,
    };
    v[idx] = 1.0;
    v
}

/// Build the feature vector for a candidate. The schema (and its length) is
/// fixed by the candidate's cardinality class.
pub fn featurize(pair: &JoinCandidate, ctx: &FeatureContext) -> Vec<f64> {
    let sp = ctx.profile(pair.source); // i: N/FK side
    let tp = ctx.profile(pair.target); // j: 1/PK side
    let s_table = &ctx.tables[pair.source.table];
    let t_table = &ctx.tables[pair.target.table];

    // name similarities use the 1-side table name as prefix
    let sims = name_similarities(&tp.name, &t_table.name, &sp.name);
    let emb = embedding_similarity(&tp.name, &t_table.name, &sp.name);

    let n_cols_i = s_table.columns.len().max(1) as f64;
    let n_cols_j = t_table.columns.len().max(1) as f64;

    let mut v = Vec::with_capacity(SHARED_FEATURES.len() + 4);
    v.extend_from_slice(&sims);
    v.push(emb);
    v.push(sp.name_tokens.len() as f64);
    v.push(tp.name_tokens.len() as f64);
    v.push(sp.name.chars().count() as f64);
    v.push(tp.name.chars().count() as f64);
    v.push((1.0 + ctx.corpus_stats.frequency(&sp.name) as f64).ln());
    v.push((1.0 + ctx.corpus_stats.frequency(&tp.name) as f64).ln());
    v.push(sp.position as f64);
    v.push(tp.position as f64);
    v.push(sp.position as f64 / n_cols_i);
    v.push(tp.position as f64 / n_cols_j);
    v.push(sp.unique_position.map(|u| u as f64).unwrap_or(n_cols_i));
    v.push(tp.unique_position.map(|u| u as f64).unwrap_or(n_cols_j));
    v.push(pair.left_containment);
    v.push(pair.right_containment);
    v.push(sp.distinct_ratio);
    v.push(tp.distinct_ratio);
    let numeric = sp.min_max.is_some() && tp.min_max.is_some();
    v.push(if numeric { range_overlap(sp.min_max, tp.min_max) } else { 0.0 });
    v.push(if numeric { 1.0 } else { 0.0 });
    v.push(emd_score(&column_emd_values(sp), &column_emd_values(tp)));
    v.push(sp.avg_value_length);
    v.push(tp.avg_value_length);
    v.extend_from_slice(&one_hot(sp.value_type));
    v.extend_from_slice(&one_hot(tp.value_type));
    v.push((1.0 + sp.row_count as f64).ln());
    v.push((1.0 + tp.row_count as f64).ln());

    match pair.cardinality {
        Cardinality::N1 => {
            v.push(pair.left_containment.max(pair.right_containment));
            v.push((1.0 + sp.row_count as f64).ln() - (1.0 + tp.row_count as f64).ln());
            v.push(n_cols_i.ln() - n_cols_j.ln());
            v.push(
                (1.0 + sp.row_count as f64 * n_cols_i).ln()
                    - (1.0 + tp.row_count as f64 * n_cols_j).ln(),
            );
        }
        Cardinality::OneOne => {
            v.push(pair.left_containment.min(pair.right_containment));
            v.push(text::trigram_cosine(&s_table.name, &t_table.name));
            v.push(header_jaccard(s_table, t_table));
        }
    }

    debug_assert_eq!(v.len(), feature_names(pair.cardinality).len());
    debug_assert!(v.iter().all(|x| x.is_finite()));
    v
}

/// Token-Jaccard between the full column-name token sets of two tables.
pub fn header_jaccard(a: &Table, b: &Table) -> f64 {
    let ta: BTreeSet<String> = a
        .columns
        .iter()
        .flat_map(|c| tokenize_name(&c.name))
        .collect();
    let tb: BTreeSet<String> = b
        .columns
        .iter()
        .flat_map(|c| tokenize_name(&c.name))
        .collect();
    if ta.is_empty() && tb.is_empty() {
        return 1.0;
    }
    let inter = ta.intersection(&tb).count() as f64;
    let union = ta.union(&tb).count() as f64;
    if union == 0.0 { 0.0 } else { inter / union }
}
