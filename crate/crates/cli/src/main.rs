use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bimodel_core::classifier::{train, TrainOptions, TrainedModels, TrainingCase};
use bimodel_core::graph::to_dot;
use bimodel_core::metrics::format_report;
use bimodel_core::pipeline::{
    predict_case, run_benchmark, select_model, PipelineConfig, Scorer, ScorerSpec,
};
use bimodel_core::profile::profile_table;
use bimodel_core::synth::{load_case, load_corpus, write_corpus, SchemaSpec};
use bimodel_core::table::{load_table, LoadOptions};

/// Predict join relationships between tables and assemble a BI model.
#[derive(Parser)]
#[command(name = "bimodel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file; flags below override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Recall-stage probability threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Virtual-edge penalty.
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    containment_threshold: Option<f64>,
    #[arg(long)]
    uniq_threshold: Option<f64>,
    /// Backbone only; skip the recall stage.
    #[arg(long)]
    precision_only: bool,
    /// Use the metadata-only classifier variant.
    #[arg(long)]
    schema_only: bool,
    /// Disable 1:1 column equivalence during evaluation.
    #[arg(long)]
    no_equivalence: bool,
    /// Branch-and-bound node budget.
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Solver timeout in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Emit solver trace lines to stderr.
    #[arg(long)]
    verbose: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<PipelineConfig> {
        let mut cfg: PipelineConfig = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.penalty {
            cfg.penalty = v;
        }
        if let Some(v) = self.containment_threshold {
            cfg.containment_threshold = v;
        }
        if let Some(v) = self.uniq_threshold {
            cfg.uniq_threshold = v;
        }
        if self.precision_only {
            cfg.precision_only = true;
        }
        if self.schema_only {
            cfg.schema_only = true;
        }
        if self.no_equivalence {
            cfg.equivalence = false;
        }
        if let Some(v) = self.max_nodes {
            cfg.limits.max_nodes = v;
        }
        if let Some(ms) = self.timeout_ms {
            cfg.limits.timeout = Some(std::time::Duration::from_millis(ms));
        }
        cfg.limits.trace = self.verbose;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print column profiles of one or more CSV files as JSON.
    Profile {
        files: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Enumerate candidate joins for a case directory as JSON lines.
    Candidates {
        dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the local classifiers on a corpus of case directories.
    Train {
        corpus: PathBuf,
        /// Output model file.
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict the BI model for one case directory.
    Predict {
        dir: PathBuf,
        /// Trained model file; omit to score against ground_truth.json.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output file for the predicted BI model.
        #[arg(long, default_value = "bi_model.json")]
        out: PathBuf,
        /// Also write the join graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate predictions against ground truth over a corpus.
    Eval {
        corpus: PathBuf,
        /// Trained model file.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Score candidates from ground truth instead of a model.
        #[arg(long)]
        oracle: bool,
        /// Write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Generate a synthetic corpus with ground truth.
    Synth {
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        cases: usize,
        #[arg(long, default_value_t = 1)]
        n_fact: usize,
        #[arg(long, default_value_t = 4)]
        dims_per_fact: usize,
        #[arg(long, default_value_t = 1)]
        snowflake_depth: usize,
        #[arg(long, default_value_t = 0)]
        shared_dims: usize,
        #[arg(long, default_value_t = 200)]
        rows_fact: usize,
        #[arg(long, default_value_t = 40)]
        rows_dim: usize,
        #[arg(long, default_value_t = 1)]
        noise_columns: usize,
        #[arg(long, default_value_t = 0.3)]
        distractor_overlap: f64,
        #[arg(long, default_value_t = 0.0)]
        one_one_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_models(path: &PathBuf) -> Result<TrainedModels> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    Ok(TrainedModels::from_json(&text)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Profile { files, seed } => {
            if files.is_empty() {
                bail!("no input files");
            }
            let opts = LoadOptions::default();
            let mut out = Vec::new();
            for f in &files {
                let table = load_table(f, &opts)?;
                let profiles = profile_table(&table, seed.unwrap_or(0));
                out.push(serde_json::json!({ "table": table.name, "columns": profiles }));
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
        }

        Command::Candidates { dir, config } => {
            let cfg = config.build()?;
            let (tables, _) = load_case(&dir, &LoadOptions::default())?;
            let profiles: Vec<_> = tables.iter().map(|t| profile_table(t, cfg.seed)).collect();
            let cands = bimodel_core::candidates::enumerate_candidates(
                &tables,
                &profiles,
                cfg.containment_threshold,
                cfg.uniq_threshold,
            );
            for c in &cands {
                let line = serde_json::json!({
                    "from_table": tables[c.source.table].name,
                    "from_column": tables[c.source.table].columns[c.source.column].name,
                    "to_table": tables[c.target.table].name,
                    "to_column": tables[c.target.table].columns[c.target.column].name,
                    "cardinality": c.cardinality,
                    "left_containment": c.left_containment,
                    "right_containment": c.right_containment,
                });
                println!("{line}");
            }
        }

        Command::Train { corpus, out, seed } => {
            let cases = load_corpus(&corpus, &LoadOptions::default())?;
            let mut training = Vec::new();
            for (name, tables, truth) in cases {
                let truth = truth
                    .ok_or_else(|| bimodel_core::Error::MissingGroundTruth(name.clone()))?;
                training.push(TrainingCase { name, tables, truth });
            }
            let options = TrainOptions { seed: seed.unwrap_or(0), ..TrainOptions::default() };
            let models = train(&training, &options);
            fs::write(&out, models.to_json()?)
                .with_context(|| format!("writing {}", out.display()))?;
            eprintln!("trained on {} cases -> {}", training.len(), out.display());
        }

        Command::Predict { dir, model, out, dot, config } => {
            let cfg = config.build()?;
            let opts = LoadOptions { row_cap: cfg.row_cap, ..LoadOptions::default() };
            let (tables, truth) = load_case(&dir, &opts)?;
            let models = model.as_ref().map(load_models).transpose()?;
            let scorer = match (&models, &truth) {
                (Some(m), _) => Scorer::Model(select_model(m, &cfg)),
                (None, Some(t)) => Scorer::Oracle { truth: t, p_true: 0.9, p_false: 0.3 },
                (None, None) => bail!("no --model given and no ground_truth.json to score from"),
            };
            let pred = predict_case(&tables, &scorer, &cfg)?;
            fs::write(&out, serde_json::to_string_pretty(&pred.model)?)
                .with_context(|| format!("writing {}", out.display()))?;
            if let Some(dot_path) = dot {
                let names: Vec<String> = tables.iter().map(|t| t.name.clone()).collect();
                fs::write(&dot_path, to_dot(&pred.graph, &names))?;
            }
            if cfg.limits.trace {
                for line in &pred.stats.trace {
                    eprintln!("{line}");
                }
            }
            eprintln!(
                "{} tables, {} edges ({} backbone, {} recall), k={}, cost={:.4}, {}optimal, {:.1} ms -> {}",
                tables.len(),
                pred.model.relationships.len(),
                pred.backbone.edges.len(),
                pred.recall_edges.len(),
                pred.backbone.k,
                pred.backbone.cost,
                if pred.stats.optimal { "" } else { "NOT " },
                pred.latency_ms,
                out.display()
            );
            if !pred.stats.optimal {
                eprintln!("solver budget exhausted: the written result is feasible but not proven optimal");
                std::process::exit(2);
            }
        }

        Command::Eval { corpus, model, oracle, report, config } => {
            let cfg = config.build()?;
            let models = model.as_ref().map(load_models).transpose()?;
            let spec = if oracle {
                ScorerSpec::Oracle { p_true: 0.9, p_false: 0.3 }
            } else {
                let m = models.as_ref().context("--model required unless --oracle is set")?;
                ScorerSpec::Model(select_model(m, &cfg))
            };
            let rep = run_benchmark(&corpus, &spec, &cfg)?;
            print!("{}", format_report(&rep));
            if let Some(path) = report {
                fs::write(&path, serde_json::to_string_pretty(&rep)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if !rep.failures.is_empty() {
                std::process::exit(3);
            }
        }

        Command::Synth {
            out,
            cases,
            n_fact,
            dims_per_fact,
            snowflake_depth,
            shared_dims,
            rows_fact,
            rows_dim,
            noise_columns,
            distractor_overlap,
            one_one_rate,
            seed,
        } => {
            let spec = SchemaSpec {
                n_fact,
                dims_per_fact,
                snowflake_depth,
                rows_fact,
                rows_dim,
                noise_columns,
                distractor_overlap,
                shared_dims,
                one_one_rate,
                seed,
            };
            write_corpus(&out, &spec, cases)?;
            eprintln!("wrote {} cases under {}", cases, out.display());
        }
    }
    Ok(())
}
