//! Exact arborescence solvers: fixed-root Chu-Liu/Edmonds, free-root 1-MCA,
//! k-MCA via an artificial root, and k-MCA-CC via branch-and-bound over
//! FK-once conflict sets. Brute-force oracles for all of them.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{objective_cost, JoinGraph};
use crate::table::ColumnRef;

/// A selected edge set inducing a k-arborescence.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Selected edge ids, sorted ascending.
    pub edges: Vec<usize>,
    /// One root per component, sorted ascending.
    pub roots: Vec<usize>,
    pub k: usize,
    /// Objective cost: edge weights + (k-1)·p.
    pub cost: f64,
}

impl Solution {
    fn better_than(&self, other: &Solution) -> bool {
        self.cost < other.cost || (self.cost == other.cost && self.edges < other.edges)
    }
}

/// Edges selected from the same source column with distinct targets.
#[derive(Debug, Clone)]
pub struct ConflictSet {
    pub source_column: ColumnRef,
    /// Edge ids, sorted ascending; always >= 2 entries.
    pub edges: Vec<usize>,
}

/// Limits for the branch-and-bound search.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct SolveLimits {
    pub max_nodes: usize,
    pub timeout: Option<Duration>,
    pub trace: bool,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { max_nodes: 10_000, timeout: None, trace: false }
    }
}

/// Search statistics; `optimal` is false when a limit cut the search short.
#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub optimal: bool,
    pub trace: Vec<String>,
}

#[derive(Debug, Clone)]
struct SEdge {
    /// Index into the working edge list of the parent level.
    parent_idx: usize,
    /// Original graph edge id carried through contractions for tie-breaking.
    tie: usize,
    src: usize,
    dst: usize,
    w: f64,
}

/// Recursive Chu-Liu/Edmonds. Returns indices into `edges` forming a minimum
/// spanning arborescence rooted at `root`, or None when some vertex cannot be
/// reached. Ties break by the lowest original edge id.
fn chu_liu_edmonds(n: usize, root: usize, edges: &[SEdge]) -> Option<Vec<usize>> {
    if n <= 1 {
        return Some(Vec::new());
    }

    // cheapest incoming edge per non-root vertex
    let mut best_in: Vec<Option<usize>> = vec![None; n];
    for (idx, e) in edges.iter().enumerate() {
        if e.dst == root || e.src == e.dst {
            continue;
        }
        match best_in[e.dst] {
            None => best_in[e.dst] = Some(idx),
            Some(cur) => {
                let c = &edges[cur];
                if (e.w, e.tie) < (c.w, c.tie) {
                    best_in[e.dst] = Some(idx);
                }
            }
        }
    }
    for v in 0..n {
        if v != root && best_in[v].is_none() {
            return None;
        }
    }

    // cycle detection on the parent pointers
    let cycle = find_cycle(n, root, &best_in, edges);
    let Some(cycle) = cycle else {
        return Some((0..n).filter(|&v| v != root).map(|v| best_in[v].unwrap()).collect());
    };

    let in_cycle = {
        let mut m = vec![false; n];
        for &v in &cycle {
            m[v] = true;
        }
        m
    };

    // contract the cycle into a single super-vertex
    let mut map = vec![usize::MAX; n];
    let mut next = 0usize;
    for v in 0..n {
        if !in_cycle[v] {
            map[v] = next;
            next += 1;
        }
    }
    let super_v = next;
    let n_new = next + 1;
    for v in 0..n {
        if in_cycle[v] {
            map[v] = super_v;
        }
    }

    let mut new_edges = Vec::new();
    for (idx, e) in edges.iter().enumerate() {
        let s_in = in_cycle[e.src];
        let d_in = in_cycle[e.dst];
        if s_in && d_in {
            continue;
        }
        let w = if d_in {
            // entering the cycle: reduce by the cycle edge it would replace
            e.w - edges[best_in[e.dst].unwrap()].w
        } else {
            e.w
        };
        new_edges.push(SEdge { parent_idx: idx, tie: e.tie, src: map[e.src], dst: map[e.dst], w });
    }

    let sub = chu_liu_edmonds(n_new, map[root], &new_edges)?;

    let mut chosen: Vec<usize> = sub.iter().map(|&i| new_edges[i].parent_idx).collect();
    // the unique chosen edge entering the cycle decides which cycle edge drops
    let entering = chosen
        .iter()
        .copied()
        .find(|&i| in_cycle[edges[i].dst])
        .expect("contracted super-vertex must have an incoming edge");
    let broken = edges[entering].dst;
    for &v in &cycle {
        if v != broken {
            chosen.push(best_in[v].unwrap());
        }
    }
    Some(chosen)
}

fn find_cycle(
    n: usize,
    root: usize,
    best_in: &[Option<usize>],
    edges: &[SEdge],
) -> Option<Vec<usize>> {
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; n];
    state[root] = 2;
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = edges[best_in[v].unwrap()].src;
        }
        if state[v] == 1 {
            // walk back to extract the cycle
            let pos = path.iter().position(|&x| x == v).unwrap();
            for &u in &path[..pos] {
                state[u] = 2;
            }
            return Some(path[pos..].to_vec());
        }
        for u in path {
            state[u] = 2;
        }
    }
    None
}

fn sedges(graph: &JoinGraph, banned: Option<&[bool]>) -> Vec<SEdge> {
    graph
        .edges
        .iter()
        .filter(|e| banned.map_or(true, |b| !b[e.id]))
        .map(|e| SEdge {
            parent_idx: e.id,
            tie: e.id,
            src: e.source.table,
            dst: e.target.table,
            w: e.weight,
        })
        .collect()
}

fn make_solution(graph: &JoinGraph, mut edge_ids: Vec<usize>, p: f64) -> Solution {
    edge_ids.sort_unstable();
    let mut indeg = vec![0usize; graph.n_vertices];
    for &id in &edge_ids {
        indeg[graph.edge(id).target.table] += 1;
    }
    let roots: Vec<usize> = (0..graph.n_vertices).filter(|&v| indeg[v] == 0).collect();
    let k = roots.len();
    let cost = objective_cost(graph, &edge_ids, k.max(1), p);
    let sol = Solution { edges: edge_ids, roots, k, cost };
    assert_k_arborescence(graph, &sol);
    sol
}

/// Post-hoc structural check: every non-root in-degree 1, no directed cycle,
/// component count equals |roots|.
pub fn assert_k_arborescence(graph: &JoinGraph, sol: &Solution) {
    let n = graph.n_vertices;
    let mut indeg = vec![0usize; n];
    for &id in &sol.edges {
        indeg[graph.edge(id).target.table] += 1;
    }
    assert!(indeg.iter().all(|&d| d <= 1), "vertex with in-degree > 1");
    assert_eq!(
        sol.roots,
        (0..n).filter(|&v| indeg[v] == 0).collect::<Vec<_>>(),
        "roots must be exactly the in-degree-0 vertices"
    );
    assert_eq!(sol.k, sol.roots.len());
    assert_eq!(sol.edges.len(), n - sol.k, "|edges| must equal |V| - k");
    // with in-degree <= 1 and |E| = |V| - k, acyclicity follows from having
    // no directed cycle along parent pointers
    let mut parent = vec![usize::MAX; n];
    for &id in &sol.edges {
        parent[graph.edge(id).target.table] = graph.edge(id).source.table;
    }
    for start in 0..n {
        let mut v = start;
        let mut steps = 0;
        while parent[v] != usize::MAX {
            v = parent[v];
            steps += 1;
            assert!(steps <= n, "directed cycle in solution");
        }
    }
}

/// Minimum spanning arborescence with a fixed root; None when infeasible.
pub fn edmonds_fixed_root(graph: &JoinGraph, root: usize) -> Option<Solution> {
    assert!(root < graph.n_vertices);
    let edges = sedges(graph, None);
    let chosen = chu_liu_edmonds(graph.n_vertices, root, &edges)?;
    let ids: Vec<usize> = chosen.iter().map(|&i| edges[i].parent_idx).collect();
    Some(make_solution(graph, ids, 0.0))
}

/// Free-root 1-MCA: cheapest spanning arborescence over all roots.
pub fn solve_1mca(graph: &JoinGraph) -> Option<Solution> {
    let mut best: Option<Solution> = None;
    for root in 0..graph.n_vertices {
        if let Some(sol) = edmonds_fixed_root(graph, root) {
            if best.as_ref().map_or(true, |b| sol.better_than(b)) {
                best = Some(sol);
            }
        }
    }
    best
}

/// k-MCA by artificial-root reduction: add a root r with edges r→v of weight
/// p, solve 1-MCA on the augmented graph, strip the artificial edges.
pub fn solve_kmca(graph: &JoinGraph, p: f64) -> Solution {
    solve_kmca_banned(graph, p, None)
}

fn solve_kmca_banned(graph: &JoinGraph, p: f64, banned: Option<&[bool]>) -> Solution {
    let n = graph.n_vertices;
    if n == 0 {
        return Solution { edges: vec![], roots: vec![], k: 0, cost: 0.0 };
    }
    let root = n;
    let n_real_edges = graph.edges.len();
    let mut edges = sedges(graph, banned);
    for v in 0..n {
        // artificial edge ids come after all real ids so real edges win ties
        edges.push(SEdge { parent_idx: n_real_edges + v, tie: n_real_edges + v, src: root, dst: v, w: p });
    }
    let chosen = chu_liu_edmonds(n + 1, root, &edges)
        .expect("artificial root guarantees feasibility");
    // the artificial root is necessarily the root of the internal 1-MCA
    debug_assert!(chosen.iter().all(|&i| edges[i].dst != root));
    let real: Vec<usize> = chosen
        .iter()
        .map(|&i| edges[i].parent_idx)
        .filter(|&id| id < n_real_edges)
        .collect();
    make_solution(graph, real, p)
}

/// Group selected edges by source column; every group with two or more
/// distinct targets is an FK-once violation.
pub fn check_fk_once(graph: &JoinGraph, edge_ids: &[usize]) -> Vec<ConflictSet> {
    let mut groups: BTreeMap<ColumnRef, Vec<usize>> = BTreeMap::new();
    for &id in edge_ids {
        groups.entry(graph.edge(id).source).or_default().push(id);
    }
    groups
        .into_iter()
        .filter(|(_, ids)| {
            if ids.len() < 2 {
                return false;
            }
            let mut targets: Vec<ColumnRef> = ids.iter().map(|&id| graph.edge(id).target).collect();
            targets.sort_unstable();
            targets.dedup();
            targets.len() >= 2
        })
        .map(|(source_column, mut ids)| {
            ids.sort_unstable();
            ConflictSet { source_column, edges: ids }
        })
        .collect()
}

/// k-MCA-CC: branch-and-bound over conflict sets. Optimal unless a limit is
/// hit, in which case the incumbent is returned with `optimal = false`.
pub fn solve_kmca_cc(graph: &JoinGraph, p: f64) -> (Solution, SolveStats) {
    solve_kmca_cc_limited(graph, p, &SolveLimits::default())
}

pub fn solve_kmca_cc_limited(
    graph: &JoinGraph,
    p: f64,
    limits: &SolveLimits,
) -> (Solution, SolveStats) {
    let mut stats = SolveStats { nodes: 0, optimal: true, trace: Vec::new() };
    let mut incumbent: Option<Solution> = None;
    let banned = vec![false; graph.edges.len()];
    let started = Instant::now();
    branch(graph, p, banned, &mut incumbent, &mut stats, limits, started);

    let solution = incumbent.unwrap_or_else(|| repair(graph, p));
    debug_assert!(check_fk_once(graph, &solution.edges).is_empty());
    (solution, stats)
}

fn branch(
    graph: &JoinGraph,
    p: f64,
    banned: Vec<bool>,
    incumbent: &mut Option<Solution>,
    stats: &mut SolveStats,
    limits: &SolveLimits,
    started: Instant,
) {
    if stats.nodes >= limits.max_nodes
        || limits.timeout.map_or(false, |t| started.elapsed() >= t)
    {
        stats.optimal = false;
        return;
    }
    stats.nodes += 1;

    let sol = solve_kmca_banned(graph, p, Some(&banned));
    let conflicts = check_fk_once(graph, &sol.edges);

    if limits.trace {
        stats.trace.push(
            serde_json::json!({
                "node": stats.nodes,
                "cost": sol.cost,
                "conflicts": conflicts.len(),
                "incumbent": incumbent.as_ref().map(|s| s.cost),
            })
            .to_string(),
        );
    }

    if conflicts.is_empty() {
        let improves = incumbent.as_ref().map_or(true, |inc| sol.cost < inc.cost);
        if improves {
            *incumbent = Some(sol);
        }
        return;
    }
    if let Some(inc) = incumbent.as_ref() {
        // prune non-strictly: an equal-cost subtree cannot beat the incumbent
        if sol.cost >= inc.cost {
            return;
        }
    }

    // branch on the largest conflict set, ties by lowest source column
    let conflict = conflicts
        .iter()
        .max_by(|a, b| {
            a.edges
                .len()
                .cmp(&b.edges.len())
                .then_with(|| b.source_column.cmp(&a.source_column))
        })
        .unwrap();

    for &keep in &conflict.edges {
        let mut sub = banned.clone();
        for &e in &conflict.edges {
            if e != keep {
                sub[e] = true;
            }
        }
        branch(graph, p, sub, incumbent, stats, limits, started);
    }
}

/// Fallback when limits fire before any feasible solution was found: ban all
/// but the lowest-id edge of each conflict until feasible.
fn repair(graph: &JoinGraph, p: f64) -> Solution {
    let mut banned = vec![false; graph.edges.len()];
    loop {
        let sol = solve_kmca_banned(graph, p, Some(&banned));
        let conflicts = check_fk_once(graph, &sol.edges);
        if conflicts.is_empty() {
            return sol;
        }
        for c in conflicts {
            for &e in &c.edges[1..] {
                banned[e] = true;
            }
        }
    }
}

/// Which constraint the oracle enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleConstraint {
    None,
    FkOnce,
}

const ORACLE_EDGE_LIMIT: usize = 20;

/// Exhaustive oracle: enumerate all edge subsets inducing a k-arborescence
/// (and FK-once if requested), return the minimum objective cost. Ties break
/// by lexicographically smallest edge-id set.
pub fn brute_force_oracle(
    graph: &JoinGraph,
    p: f64,
    constraint: OracleConstraint,
) -> Result<Solution> {
    let m = graph.edges.len();
    if m > ORACLE_EDGE_LIMIT {
        return Err(Error::OracleGuard { edges: m, limit: ORACLE_EDGE_LIMIT });
    }
    let mut best: Option<Solution> = None;
    for mask in 0u32..(1u32 << m) {
        let ids: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        if !is_k_arborescence(graph, &ids) {
            continue;
        }
        if constraint == OracleConstraint::FkOnce && !check_fk_once(graph, &ids).is_empty() {
            continue;
        }
        let sol = make_solution(graph, ids, p);
        if best.as_ref().map_or(true, |b| sol.better_than(b)) {
            best = Some(sol);
        }
    }
    Ok(best.expect("the empty edge set is always feasible"))
}

/// Exhaustive fixed-root spanning-arborescence oracle; None when infeasible.
pub fn brute_force_fixed_root(graph: &JoinGraph, root: usize) -> Result<Option<Solution>> {
    let m = graph.edges.len();
    if m > ORACLE_EDGE_LIMIT {
        return Err(Error::OracleGuard { edges: m, limit: ORACLE_EDGE_LIMIT });
    }
    let n = graph.n_vertices;
    let mut best: Option<Solution> = None;
    for mask in 0u32..(1u32 << m) {
        let ids: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        if ids.len() + 1 != n || !is_k_arborescence(graph, &ids) {
            continue;
        }
        let mut indeg = vec![0usize; n];
        for &id in &ids {
            indeg[graph.edge(id).target.table] += 1;
        }
        if indeg[root] != 0 {
            continue;
        }
        let sol = make_solution(graph, ids, 0.0);
        if sol.k != 1 {
            continue;
        }
        if best.as_ref().map_or(true, |b| sol.better_than(b)) {
            best = Some(sol);
        }
    }
    Ok(best)
}

fn is_k_arborescence(graph: &JoinGraph, edge_ids: &[usize]) -> bool {
    let n = graph.n_vertices;
    let mut parent = vec![usize::MAX; n];
    for &id in edge_ids {
        let e = graph.edge(id);
        if parent[e.target.table] != usize::MAX {
            return false; // in-degree > 1
        }
        parent[e.target.table] = e.source.table;
    }
    // no directed cycle along parent pointers
    for start in 0..n {
        let mut v = start;
        let mut steps = 0;
        while parent[v] != usize::MAX {
            v = parent[v];
            steps += 1;
            if steps > n {
                return false;
            }
        }
    }
    true
}
