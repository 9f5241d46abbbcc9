//! Weighted directed join graph: vertices are tables, edges are scored
//! candidates with weight w = -log2(P).

use serde::{Deserialize, Serialize};

use crate::candidates::{Cardinality, JoinCandidate};
use crate::table::ColumnRef;

/// Default noise floor on candidate probabilities (distinct from the recall
/// stage threshold tau).
pub const DEFAULT_MIN_PROBABILITY: f64 = 0.01;

/// Default virtual-edge penalty: -log2(0.5) = 1 exactly.
pub const DEFAULT_PENALTY: f64 = 1.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphEdge {
    pub id: usize,
    pub source: ColumnRef,
    pub target: ColumnRef,
    pub probability: f64,
    pub weight: f64,
    pub cardinality: Cardinality,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JoinGraph {
    /// Number of vertices (tables), including isolated ones.
    pub n_vertices: usize,
    pub edges: Vec<GraphEdge>,
}

impl JoinGraph {
    pub fn edge(&self, id: usize) -> &GraphEdge {
        &self.edges[id]
    }

    /// Sum of weights of the given edges (by id, summed in sorted-id order so
    /// equal edge sets always produce bit-identical costs).
    pub fn weight_sum(&self, edge_ids: &[usize]) -> f64 {
        let mut ids: Vec<usize> = edge_ids.to_vec();
        ids.sort_unstable();
        ids.iter().map(|&id| self.edges[id].weight).sum()
    }
}

/// Edge weight from a calibrated probability, in log base 2.
pub fn edge_weight(probability: f64) -> f64 {
    -probability.log2()
}

/// Objective cost of a solution: edge weights plus (k-1) virtual edges of
/// weight p.
pub fn objective_cost(graph: &JoinGraph, edge_ids: &[usize], k: usize, p: f64) -> f64 {
    debug_assert!(k >= 1);
    graph.weight_sum(edge_ids) + (k.saturating_sub(1)) as f64 * p
}

/// Build the join graph from scored candidates.
///
/// One vertex per table (isolated tables included); edges only for candidates
/// with P >= min_probability; no self-loops; parallel column-level edges
/// between a table pair are retained. Edge ids follow candidate order.
pub fn build_graph(
    n_tables: usize,
    candidates: &[JoinCandidate],
    min_probability: f64,
) -> JoinGraph {
    let mut edges = Vec::new();
    for cand in candidates {
        if cand.source.table == cand.target.table {
            continue;
        }
        if cand.probability < min_probability {
            continue;
        }
        let id = edges.len();
        edges.push(GraphEdge {
            id,
            source: cand.source,
            target: cand.target,
            probability: cand.probability,
            weight: edge_weight(cand.probability),
            cardinality: cand.cardinality,
        });
    }
    JoinGraph { n_vertices: n_tables, edges }
}

/// DOT rendering of a join graph, labeled with probabilities.
pub fn to_dot(graph: &JoinGraph, table_names: &[String]) -> String {
    let mut out = String::from("digraph joins {\n");
    for (i, name) in table_names.iter().enumerate() {
        out.push_str(&format!("  t{} [label=\"{}\"];\n", i, name));
    }
    for e in &graph.edges {
        out.push_str(&format!(
            "  t{} -> t{} [label=\"{:.3}\"];\n",
            e.source.table, e.target.table, e.probability
        ));
    }
    out.push_str("}\n");
    out
}
