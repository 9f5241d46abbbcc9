//! Full-pipeline integration: generate a corpus on disk, train from files,
//! predict, and evaluate — the same path the CLI exercises.

use bimodel_core::classifier::{train, TrainOptions, TrainedModels, TrainingCase};
use bimodel_core::pipeline::{evaluate_corpus, predict_case, PipelineConfig, Scorer, ScorerSpec};
use bimodel_core::recall::Provenance;
use bimodel_core::synth::{load_corpus, write_corpus, SchemaSpec};
use bimodel_core::table::LoadOptions;

#[test]
fn train_from_disk_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let train_dir = dir.path().join("train");
    let eval_dir = dir.path().join("eval");
    let spec = SchemaSpec {
        dims_per_fact: 3,
        one_one_rate: 0.3,
        noise_columns: 2,
        rows_fact: 100,
        rows_dim: 25,
        ..SchemaSpec::default()
    };
    write_corpus(&train_dir, &spec, 10).unwrap();
    write_corpus(&eval_dir, &SchemaSpec { seed: 500, ..spec }, 4).unwrap();

    let cases = load_corpus(&train_dir, &LoadOptions::default()).unwrap();
    let training: Vec<TrainingCase> = cases
        .into_iter()
        .map(|(name, tables, truth)| TrainingCase { name, tables, truth: truth.unwrap() })
        .collect();
    let models = train(&training, &TrainOptions::default());

    // model survives serialization
    let json = models.to_json().unwrap();
    let models = TrainedModels::from_json(&json).unwrap();

    let eval = load_corpus(&eval_dir, &LoadOptions::default()).unwrap();
    let config = PipelineConfig::default();
    let report = evaluate_corpus(&eval, &ScorerSpec::Model(&models.full), &config).unwrap();
    assert!(report.mean_f1 >= 0.9, "F1 {:.3} too low", report.mean_f1);
    assert!(report.mean_recall > 0.0);
    assert_eq!(report.cases.len(), 4);
}

#[test]
fn predicted_model_structure_is_sound() {
    let spec = SchemaSpec {
        n_fact: 2,
        shared_dims: 1,
        one_one_rate: 0.5,
        snowflake_depth: 1,
        seed: 11,
        ..SchemaSpec::default()
    };
    let (tables, truth) = bimodel_core::synth::generate_case(&spec);
    let scorer = Scorer::Oracle { truth: &truth, p_true: 0.9, p_false: 0.3 };
    let pred = predict_case(&tables, &scorer, &PipelineConfig::default()).unwrap();

    // every relationship references existing tables and columns
    for r in &pred.model.relationships {
        let from = tables.iter().find(|t| t.name == r.from_table).expect("from_table exists");
        assert!(from.columns.iter().any(|c| c.name == r.from_columns[0]));
        let to = tables.iter().find(|t| t.name == r.to_table).expect("to_table exists");
        assert!(to.columns.iter().any(|c| c.name == r.to_columns[0]));
        assert!(r.probability.unwrap() > 0.0 && r.probability.unwrap() <= 1.0);
        assert!(r.provenance.is_some());
    }
    // backbone relationships precede recall ones
    let first_recall = pred
        .model
        .relationships
        .iter()
        .position(|r| r.provenance == Some(Provenance::Recall))
        .unwrap_or(pred.model.relationships.len());
    assert!(pred.model.relationships[..first_recall]
        .iter()
        .all(|r| r.provenance == Some(Provenance::Backbone)));
    assert_eq!(pred.model.tables.len(), tables.len());
    assert!(pred.model.k >= 1);
}
