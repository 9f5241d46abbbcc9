//! End-to-end orchestration: profile → candidates → scoring → backbone →
//! recall → BI model, plus corpus-level evaluation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::candidates::{enumerate_candidates, Cardinality, JoinCandidate};
use crate::classifier::LocalModel;
use crate::error::{Error, Result};
use crate::features::{featurize, FeatureContext};
use crate::graph::{build_graph, JoinGraph};
use crate::metrics::{case_metrics, summarize, MetricsReport};
use crate::profile::profile_table;
use crate::recall::{assemble_bi_model, solve_ems_greedy, BIModel, GroundTruth};
use crate::solver::{solve_kmca_cc_limited, Solution, SolveLimits, SolveStats};
use crate::table::Table;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub containment_threshold: f64,
    pub uniq_threshold: f64,
    /// Recall-stage probability threshold.
    pub tau: f64,
    /// Virtual-edge penalty p.
    pub penalty: f64,
    /// Noise floor below which candidates never become graph edges.
    pub min_probability: f64,
    pub seed: u64,
    /// Backbone only; skip the recall stage.
    pub precision_only: bool,
    /// Use the metadata-only classifier variant.
    pub schema_only: bool,
    /// Treat 1:1-joined columns as interchangeable during evaluation.
    pub equivalence: bool,
    /// Rows read per table; None means unbounded.
    pub row_cap: Option<usize>,
    pub limits: SolveLimits,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            containment_threshold: crate::candidates::DEFAULT_CONTAINMENT_THRESHOLD,
            uniq_threshold: crate::profile::DEFAULT_UNIQ_THRESHOLD,
            tau: crate::recall::DEFAULT_TAU,
            penalty: crate::graph::DEFAULT_PENALTY,
            min_probability: crate::graph::DEFAULT_MIN_PROBABILITY,
            seed: 0,
            precision_only: false,
            schema_only: false,
            equivalence: true,
            row_cap: Some(100_000),
            limits: SolveLimits::default(),
        }
    }
}

/// How candidate probabilities are produced.
pub enum Scorer<'a> {
    Model(&'a LocalModel),
    /// Ground-truth lookup: p_true for real joins, p_false for the rest.
    /// Isolates solver behavior from classifier quality.
    Oracle { truth: &'a GroundTruth, p_true: f64, p_false: f64 },
}

/// Everything produced for one table set.
#[derive(Debug)]
pub struct Prediction {
    pub model: BIModel,
    pub graph: JoinGraph,
    pub backbone: Solution,
    pub recall_edges: Vec<usize>,
    pub stats: SolveStats,
    pub latency_ms: f64,
}

fn truth_keys(truth: &GroundTruth) -> std::collections::BTreeSet<(String, String, String, String)> {
    let mut set = std::collections::BTreeSet::new();
    for r in &truth.relationships {
        let a = (r.from_table.clone(), r.from_columns[0].clone());
        let b = (r.to_table.clone(), r.to_columns[0].clone());
        set.insert((a.0.clone(), a.1.clone(), b.0.clone(), b.1.clone()));
        if r.cardinality == Cardinality::OneOne {
            set.insert((b.0, b.1, a.0, a.1));
        }
    }
    set
}

fn score_candidates(
    tables: &[Table],
    profiles: &[Vec<crate::profile::ColumnProfile>],
    candidates: &mut [JoinCandidate],
    scorer: &Scorer,
) -> Result<()> {
    match scorer {
        Scorer::Model(model) => {
            let ctx = FeatureContext { tables, profiles, corpus_stats: &model.corpus_stats };
            for cand in candidates.iter_mut() {
                let feats = featurize(cand, &ctx);
                cand.probability = model.score(cand.cardinality, &feats)?;
            }
        }
        Scorer::Oracle { truth, p_true, p_false } => {
            let keys = truth_keys(truth);
            for cand in candidates.iter_mut() {
                let s = &tables[cand.source.table];
                let t = &tables[cand.target.table];
                let key = (
                    s.name.clone(),
                    s.columns[cand.source.column].name.clone(),
                    t.name.clone(),
                    t.columns[cand.target.column].name.clone(),
                );
                cand.probability = if keys.contains(&key) { *p_true } else { *p_false };
            }
        }
    }
    Ok(())
}

/// Run the full pipeline on one table set.
pub fn predict_case(tables: &[Table], scorer: &Scorer, config: &PipelineConfig) -> Result<Prediction> {
    let started = Instant::now();
    let profiles: Vec<_> = tables.iter().map(|t| profile_table(t, config.seed)).collect();
    let mut candidates = enumerate_candidates(
        tables,
        &profiles,
        config.containment_threshold,
        config.uniq_threshold,
    );
    score_candidates(tables, &profiles, &mut candidates, scorer)?;

    let graph = build_graph(tables.len(), &candidates, config.min_probability);
    let (backbone, stats) = solve_kmca_cc_limited(&graph, config.penalty, &config.limits);
    let recall_edges = if config.precision_only {
        Vec::new()
    } else {
        solve_ems_greedy(&graph, &backbone.edges, config.tau)
    };
    let model = assemble_bi_model(tables, &graph, &backbone.edges, &recall_edges, backbone.k);
    Ok(Prediction {
        model,
        graph,
        backbone,
        recall_edges,
        stats,
        latency_ms: started.elapsed().as_secs_f64() * 1000.0,
    })
}

/// Pick the right model variant for the config.
pub fn select_model<'a>(models: &'a crate::classifier::TrainedModels, config: &PipelineConfig) -> &'a LocalModel {
    if config.schema_only {
        &models.schema_only
    } else {
        &models.full
    }
}

/// Which scorer to use for a whole corpus run.
pub enum ScorerSpec<'a> {
    Model(&'a LocalModel),
    Oracle { p_true: f64, p_false: f64 },
}

fn evaluate_case(
    name: &str,
    tables: &[Table],
    truth: Option<&GroundTruth>,
    scorer: &ScorerSpec,
    config: &PipelineConfig,
) -> Result<crate::metrics::CaseMetrics> {
    let truth = truth.ok_or_else(|| Error::MissingGroundTruth(name.to_string()))?;
    let known: std::collections::BTreeSet<&str> = tables.iter().map(|t| t.name.as_str()).collect();
    for r in &truth.relationships {
        for t in [&r.from_table, &r.to_table] {
            if !known.contains(t.as_str()) {
                return Err(Error::TableSetMismatch(format!(
                    "ground truth of {name} references unknown table {t}"
                )));
            }
        }
    }
    let case_scorer = match scorer {
        ScorerSpec::Model(m) => Scorer::Model(m),
        ScorerSpec::Oracle { p_true, p_false } => {
            Scorer::Oracle { truth, p_true: *p_true, p_false: *p_false }
        }
    };
    let pred = predict_case(tables, &case_scorer, config)?;
    Ok(case_metrics(
        name,
        &pred.model.relationships,
        &truth.relationships,
        config.equivalence,
        pred.latency_ms,
    ))
}

/// Predict every case and score it against its ground truth; any case error
/// aborts the run.
pub fn evaluate_corpus(
    corpus: &[(String, Vec<Table>, Option<GroundTruth>)],
    scorer: &ScorerSpec,
    config: &PipelineConfig,
) -> Result<MetricsReport> {
    let mut cases = Vec::with_capacity(corpus.len());
    for (name, tables, truth) in corpus {
        cases.push(evaluate_case(name, tables, truth.as_ref(), scorer, config)?);
    }
    Ok(summarize(cases))
}

/// Benchmark a corpus directory (`case_*/ *.csv + ground_truth.json`).
/// Per-case failures are recorded in the report instead of aborting the run.
pub fn run_benchmark(
    dir: &std::path::Path,
    scorer: &ScorerSpec,
    config: &PipelineConfig,
) -> Result<MetricsReport> {
    let options = crate::table::LoadOptions { row_cap: config.row_cap, ..Default::default() };
    let corpus = crate::synth::load_corpus(dir, &options)?;
    let mut cases = Vec::with_capacity(corpus.len());
    let mut failures = Vec::new();
    for (name, tables, truth) in &corpus {
        match evaluate_case(name, tables, truth.as_ref(), scorer, config) {
            Ok(m) => cases.push(m),
            Err(e) => failures.push((name.clone(), e.to_string())),
        }
    }
    let mut report = summarize(cases);
    report.failures = failures;
    Ok(report)
}
