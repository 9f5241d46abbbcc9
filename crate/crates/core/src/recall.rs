//! Recall stage (greedy edge growing on top of the backbone) and BI-model
//! assembly, plus the ground-truth/relationship schema shared with training
//! and evaluation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::candidates::Cardinality;
use crate::error::Result;
use crate::graph::JoinGraph;
use crate::solver::check_fk_once;
use crate::table::Table;

/// Default recall-stage probability threshold.
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Backbone,
    Recall,
}

/// A join relationship, used both for ground truth (probability and
/// provenance absent) and for predicted BI models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Relationship {
    pub from_table: String,
    pub from_columns: Vec<String>,
    pub to_table: String,
    pub to_columns: Vec<String>,
    pub cardinality: Cardinality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub relationships: Vec<Relationship>,
}

impl GroundTruth {
    pub fn from_json(json: &str) -> Result<GroundTruth> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }
}

/// The assembled prediction for one table set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BIModel {
    pub tables: Vec<String>,
    pub relationships: Vec<Relationship>,
    /// Number of backbone components.
    pub k: usize,
}

/// Edge ids not in the backbone with P >= tau, by descending probability,
/// ties by ascending id.
pub fn remaining_candidates(graph: &JoinGraph, backbone: &[usize], tau: f64) -> Vec<usize> {
    let in_backbone: BTreeSet<usize> = backbone.iter().copied().collect();
    let mut ids: Vec<usize> = graph
        .edges
        .iter()
        .filter(|e| !in_backbone.contains(&e.id) && e.probability >= tau)
        .map(|e| e.id)
        .collect();
    ids.sort_by(|&a, &b| {
        graph
            .edge(b)
            .probability
            .partial_cmp(&graph.edge(a).probability)
            .unwrap()
            .then(a.cmp(&b))
    });
    ids
}

/// Unordered key identifying a relationship after 1:1 collapse.
fn collapsed_key(graph: &JoinGraph, id: usize) -> (usize, usize, usize, usize, bool) {
    let e = graph.edge(id);
    match e.cardinality {
        Cardinality::N1 => {
            (e.source.table, e.source.column, e.target.table, e.target.column, false)
        }
        Cardinality::OneOne => {
            let a = (e.source.table, e.source.column);
            let b = (e.target.table, e.target.column);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            (lo.0, lo.1, hi.0, hi.1, true)
        }
    }
}

/// Greedy recall: walk the remaining candidates by descending probability and
/// accept each edge that keeps the selection FK-once and cycle-free. A 1:1
/// edge whose reverse twin is already selected is a duplicate, not a cycle,
/// and is skipped. One pass is maximal: both constraints are monotone, so an
/// edge rejected once can never become acceptable later.
pub fn solve_ems_greedy(graph: &JoinGraph, backbone: &[usize], tau: f64) -> Vec<usize> {
    let mut selected: Vec<usize> = backbone.to_vec();
    let mut keys: BTreeSet<_> = backbone.iter().map(|&id| collapsed_key(graph, id)).collect();
    let mut accepted = Vec::new();

    for id in remaining_candidates(graph, backbone, tau) {
        if keys.contains(&collapsed_key(graph, id)) {
            continue; // 1:1 reverse twin of an already-selected edge
        }
        selected.push(id);
        let ok = check_fk_once(graph, &selected).is_empty()
            && !has_table_cycle(graph, &selected);
        if ok {
            keys.insert(collapsed_key(graph, id));
            accepted.push(id);
        } else {
            selected.pop();
        }
    }
    accepted.sort_unstable();
    accepted
}

fn has_table_cycle(graph: &JoinGraph, edge_ids: &[usize]) -> bool {
    let n = graph.n_vertices;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &id in edge_ids {
        let e = graph.edge(id);
        adj[e.source.table].push(e.target.table);
    }
    // iterative three-color DFS
    let mut state = vec![0u8; n];
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state[start] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < adj[v].len() {
                let u = adj[v][*next];
                *next += 1;
                match state[u] {
                    0 => {
                        state[u] = 1;
                        stack.push((u, 0));
                    }
                    1 => return true,
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    false
}

/// Assemble the BI model from backbone and recall edges. 1:1 relationships
/// are collapsed to a canonical direction (lexicographically smaller table
/// name first, column name as tie-break) and deduplicated.
pub fn assemble_bi_model(
    tables: &[Table],
    graph: &JoinGraph,
    backbone: &[usize],
    recall: &[usize],
    k: usize,
) -> BIModel {
    let mut seen = BTreeSet::new();
    let mut relationships = Vec::new();
    let sets = [(backbone, Provenance::Backbone), (recall, Provenance::Recall)];
    for (ids, provenance) in sets {
        for &id in ids {
            let key = collapsed_key(graph, id);
            if !seen.insert(key) {
                continue;
            }
            let e = graph.edge(id);
            let (src, dst) = match e.cardinality {
                Cardinality::N1 => (e.source, e.target),
                Cardinality::OneOne => {
                    let a_name = (&tables[e.source.table].name, col_name(tables, e.source));
                    let b_name = (&tables[e.target.table].name, col_name(tables, e.target));
                    if a_name <= b_name {
                        (e.source, e.target)
                    } else {
                        (e.target, e.source)
                    }
                }
            };
            relationships.push(Relationship {
                from_table: tables[src.table].name.clone(),
                from_columns: vec![col_name(tables, src).to_string()],
                to_table: tables[dst.table].name.clone(),
                to_columns: vec![col_name(tables, dst).to_string()],
                cardinality: e.cardinality,
                probability: Some(e.probability),
                provenance: Some(provenance),
            });
        }
    }
    BIModel {
        tables: tables.iter().map(|t| t.name.clone()).collect(),
        relationships,
        k,
    }
}

fn col_name(tables: &[Table], r: crate::table::ColumnRef) -> &str {
    &tables[r.table].columns[r.column].name
}
