//! Evaluation metrics: edge-level precision/recall/F1 with semantic
//! equivalence of 1:1-joined columns, case-level accuracy, latency
//! percentiles, and expected calibration error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::candidates::Cardinality;
use crate::recall::Relationship;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True iff edge precision is exactly 1 (every predicted edge correct).
    pub case_correct: bool,
    pub n_predicted: usize,
    pub n_truth: usize,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cases: Vec<CaseMetrics>,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    /// Fraction of cases with edge precision 1.
    pub case_precision: f64,
    pub latency_ms_p50: f64,
    pub latency_ms_p90: f64,
    pub latency_ms_p95: f64,
    /// Cases that failed to run, as (case name, error) pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<(String, String)>,
}

/// Union-find over column names.
struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            self.parent[x] = self.find(self.parent[x]);
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

type ColName = (String, String);

/// An edge lifted to column-equivalence classes; 1:1 edges are unordered.
type ClassEdge = (Cardinality, usize, usize);

/// Edge precision/recall/F1 between predicted and ground-truth relationships.
///
/// With `equivalence` on, columns connected by a 1:1 join on either side are
/// treated as the same logical column: an n:1 edge into any member of the
/// class counts as correct when the truth has that edge into another member.
/// Matching is one-to-one: each truth edge can justify at most one
/// prediction, so redundant predictions still cost precision.
pub fn edge_metrics(
    predicted: &[Relationship],
    truth: &[Relationship],
    equivalence: bool,
) -> (f64, f64, f64) {
    let mut ids: BTreeMap<ColName, usize> = BTreeMap::new();
    let id_of = |c: ColName, ids: &mut BTreeMap<ColName, usize>| {
        let next = ids.len();
        *ids.entry(c).or_insert(next)
    };
    let endpoints = |r: &Relationship| {
        (
            (r.from_table.clone(), r.from_columns[0].clone()),
            (r.to_table.clone(), r.to_columns[0].clone()),
        )
    };
    for r in predicted.iter().chain(truth) {
        let (a, b) = endpoints(r);
        id_of(a, &mut ids);
        id_of(b, &mut ids);
    }
    let mut dsu = Dsu::new(ids.len());
    if equivalence {
        for r in predicted.iter().chain(truth) {
            if r.cardinality == Cardinality::OneOne {
                let (a, b) = endpoints(r);
                let (ia, ib) = (ids[&a], ids[&b]);
                dsu.union(ia, ib);
            }
        }
    }

    let mut lift = |rs: &[Relationship]| -> Vec<ClassEdge> {
        rs.iter()
            .map(|r| {
                let (a, b) = endpoints(r);
                let (mut ca, mut cb) = (dsu.find(ids[&a]), dsu.find(ids[&b]));
                if r.cardinality == Cardinality::OneOne && ca > cb {
                    std::mem::swap(&mut ca, &mut cb);
                }
                (r.cardinality, ca, cb)
            })
            .collect()
    };
    let pred_edges = lift(predicted);
    let truth_edges = lift(truth);

    let mut budget: BTreeMap<ClassEdge, usize> = BTreeMap::new();
    for e in &truth_edges {
        *budget.entry(*e).or_insert(0) += 1;
    }
    let mut matched = 0usize;
    for e in &pred_edges {
        if let Some(b) = budget.get_mut(e) {
            if *b > 0 {
                *b -= 1;
                matched += 1;
            }
        }
    }

    let precision = if pred_edges.is_empty() { 1.0 } else { matched as f64 / pred_edges.len() as f64 };
    let recall = if truth_edges.is_empty() { 1.0 } else { matched as f64 / truth_edges.len() as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    (precision, recall, f1)
}

pub fn case_metrics(
    name: &str,
    predicted: &[Relationship],
    truth: &[Relationship],
    equivalence: bool,
    latency_ms: f64,
) -> CaseMetrics {
    let (precision, recall, f1) = edge_metrics(predicted, truth, equivalence);
    CaseMetrics {
        name: name.to_string(),
        precision,
        recall,
        f1,
        case_correct: precision == 1.0,
        n_predicted: predicted.len(),
        n_truth: truth.len(),
        latency_ms,
    }
}

/// Nearest-rank percentile of an unsorted sample; 0 for an empty sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

pub fn summarize(cases: Vec<CaseMetrics>) -> MetricsReport {
    let n = cases.len().max(1) as f64;
    let lat: Vec<f64> = cases.iter().map(|c| c.latency_ms).collect();
    MetricsReport {
        mean_precision: cases.iter().map(|c| c.precision).sum::<f64>() / n,
        mean_recall: cases.iter().map(|c| c.recall).sum::<f64>() / n,
        mean_f1: cases.iter().map(|c| c.f1).sum::<f64>() / n,
        case_precision: cases.iter().filter(|c| c.case_correct).count() as f64 / n,
        latency_ms_p50: percentile(&lat, 50.0),
        latency_ms_p90: percentile(&lat, 90.0),
        latency_ms_p95: percentile(&lat, 95.0),
        failures: Vec::new(),
        cases,
    }
}

/// Expected calibration error over equal-width probability bins.
pub fn expected_calibration_error(probs: &[f64], labels: &[u8], n_bins: usize) -> f64 {
    assert_eq!(probs.len(), labels.len());
    if probs.is_empty() {
        return 0.0;
    }
    let mut sum_p = vec![0.0; n_bins];
    let mut sum_y = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        sum_p[b] += p;
        sum_y[b] += y as f64;
        count[b] += 1;
    }
    let n = probs.len() as f64;
    (0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n) * ((sum_p[b] / c) - (sum_y[b] / c)).abs()
        })
        .sum()
}

/// Plain-text table for one report.
pub fn format_report(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>6} {:>6} {:>6} {:>5} {:>9}\n",
        "case", "prec", "rec", "f1", "ok", "ms"
    ));
    for c in &report.cases {
        out.push_str(&format!(
            "{:<24} {:>6.3} {:>6.3} {:>6.3} {:>5} {:>9.1}\n",
            c.name,
            c.precision,
            c.recall,
            c.f1,
            if c.case_correct { "yes" } else { "no" },
            c.latency_ms
        ));
    }
    out.push_str(&format!(
        "mean P={:.4} R={:.4} F1={:.4} case-precision={:.4}\n",
        report.mean_precision, report.mean_recall, report.mean_f1, report.case_precision
    ));
    out.push_str(&format!(
        "latency ms p50={:.1} p90={:.1} p95={:.1}\n",
        report.latency_ms_p50, report.latency_ms_p90, report.latency_ms_p95
    ));
    for (name, err) in &report.failures {
        out.push_str(&format!("FAILED {name}: {err}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use Cardinality::{OneOne, N1};

    fn r(ft: &str, fc: &str, tt: &str, tc: &str, card: Cardinality) -> Relationship {
        Relationship {
            from_table: ft.into(),
            from_columns: vec![fc.into()],
            to_table: tt.into(),
            to_columns: vec![tc.into()],
            cardinality: card,
            probability: None,
            provenance: None,
        }
    }

    #[test]
    fn exact_match_full_scores() {
        let t = vec![r("f", "a_id", "a", "id", N1)];
        let (p, rec, f1) = edge_metrics(&t, &t, true);
        assert_eq!((p, rec, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_prediction_empty_truth() {
        let (p, rec, f1) = edge_metrics(&[], &[], true);
        assert_eq!((p, rec, f1), (1.0, 1.0, 1.0));
        let t = vec![r("f", "a_id", "a", "id", N1)];
        let (p, rec, _) = edge_metrics(&[], &t, true);
        assert_eq!((p, rec), (1.0, 0.0));
    }

    #[test]
    fn one_one_direction_irrelevant() {
        let pred = vec![r("b", "id", "a", "id", OneOne)];
        let truth = vec![r("a", "id", "b", "id", OneOne)];
        let (p, rec, _) = edge_metrics(&pred, &truth, false);
        assert_eq!((p, rec), (1.0, 1.0));
    }

    #[test]
    fn equivalence_accepts_one_one_sibling_target() {
        // truth: F→A (n:1), A=B (1:1); predicting F→B plus A=B is fully right
        let truth = vec![r("f", "a_id", "a", "id", N1), r("a", "id", "b", "a_id", OneOne)];
        let pred = vec![r("f", "a_id", "b", "a_id", N1), r("a", "id", "b", "a_id", OneOne)];
        let (p, rec, f1) = edge_metrics(&pred, &truth, true);
        assert_eq!((p, rec, f1), (1.0, 1.0, 1.0));
        // without equivalence the n:1 edge is wrong
        let (p, rec, _) = edge_metrics(&pred, &truth, false);
        assert!((p - 0.5).abs() < 1e-12 && (rec - 0.5).abs() < 1e-12);
    }

    #[test]
    fn redundant_predictions_cost_precision() {
        let truth = vec![r("f", "a_id", "a", "id", N1), r("a", "id", "b", "a_id", OneOne)];
        // predicting both F→A and F→B duplicates one logical edge
        let pred = vec![
            r("f", "a_id", "a", "id", N1),
            r("f", "a_id", "b", "a_id", N1),
            r("a", "id", "b", "a_id", OneOne),
        ];
        let (p, rec, _) = edge_metrics(&pred, &truth, true);
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rec, 1.0);
    }

    #[test]
    fn spurious_one_one_costs_precision() {
        let truth = vec![r("f", "a_id", "a", "id", N1)];
        let pred = vec![r("f", "a_id", "a", "id", N1), r("a", "id", "c", "id", OneOne)];
        let (p, rec, _) = edge_metrics(&pred, &truth, true);
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(rec, 1.0);
    }

    #[test]
    fn cardinality_mismatch_not_matched() {
        let truth = vec![r("a", "id", "b", "id", OneOne)];
        let pred = vec![r("a", "id", "b", "id", N1)];
        let (p, rec, _) = edge_metrics(&pred, &truth, false);
        assert_eq!((p, rec), (0.0, 0.0));
    }

    #[test]
    fn percentile_nearest_rank() {
        let v = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(percentile(&v, 50.0), 5.0);
        assert_eq!(percentile(&v, 90.0), 9.0);
        assert_eq!(percentile(&v, 95.0), 10.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }

    #[test]
    fn ece_perfect_and_miscalibrated() {
        // perfectly calibrated bins: p=0.25 with 1/4 positives etc.
        let probs = vec![0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75];
        let labels = vec![1, 0, 0, 0, 1, 1, 1, 0];
        assert!(expected_calibration_error(&probs, &labels, 10) < 1e-12);
        // always confident, always wrong
        let probs = vec![0.95; 10];
        let labels = vec![0; 10];
        assert!((expected_calibration_error(&probs, &labels, 10) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn summary_means_and_case_precision() {
        let mk = |p: f64, lat: f64| CaseMetrics {
            name: "c".into(),
            precision: p,
            recall: 1.0,
            f1: 2.0 * p / (1.0 + p),
            case_correct: p == 1.0,
            n_predicted: 1,
            n_truth: 1,
            latency_ms: lat,
        };
        let rep = summarize(vec![mk(1.0, 10.0), mk(0.5, 30.0)]);
        assert!((rep.mean_precision - 0.75).abs() < 1e-12);
        assert_eq!(rep.case_precision, 0.5);
        assert_eq!(rep.latency_ms_p50, 10.0);
        assert_eq!(rep.latency_ms_p95, 30.0);
    }
}
