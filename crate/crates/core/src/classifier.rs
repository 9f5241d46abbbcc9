//! Local join classifiers: two logistic models (N:1 and 1:1) with Platt
//! sigmoid calibration, trained on labeled candidate pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidates::{enumerate_candidates, Cardinality, JoinCandidate};
use crate::error::{Error, Result};
use crate::features::{
    data_feature_indices, feature_names, featurize, CorpusStats, FeatureContext,
    FEATURE_SCHEMA_VERSION,
};
use crate::profile::{profile_table, ColumnProfile};
use crate::recall::GroundTruth;
use crate::table::Table;

/// Probability clamp so edge weights stay finite.
pub const PROBABILITY_EPS: f64 = 1e-6;

/// A candidate pair with its joinability label.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    pub pair: JoinCandidate,
    pub label: u8,
}

/// Platt sigmoid: P = 1 / (1 + exp(a*s + b)).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlattCalibration {
    pub a: f64,
    pub b: f64,
}

impl PlattCalibration {
    pub fn apply(&self, score: f64) -> f64 {
        let p = 1.0 / (1.0 + (self.a * score + self.b).exp());
        p.clamp(PROBABILITY_EPS, 1.0 - PROBABILITY_EPS)
    }
}

/// One logistic classifier with training-set standardization statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub calibration: PlattCalibration,
    /// Set when the class had fewer than 10 positives at training time.
    pub low_confidence: bool,
}

impl LinearModel {
    pub fn raw_score(&self, features: &[f64]) -> f64 {
        let mut s = self.bias;
        for ((x, m), (w, sd)) in features
            .iter()
            .zip(&self.feature_means)
            .zip(self.weights.iter().zip(&self.feature_stds))
        {
            s += w * (x - m) / sd;
        }
        s
    }
}

/// Both local classifiers plus shared corpus statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalModel {
    pub feature_schema_version: u32,
    pub n1: LinearModel,
    pub oneone: LinearModel,
    pub corpus_stats: CorpusStats,
    /// True when trained with data-value features zeroed (metadata only).
    pub schema_only: bool,
    pub seed: u64,
}

/// The serialized model file holds both the full and the schema-only variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModels {
    pub version: u32,
    pub full: LocalModel,
    pub schema_only: LocalModel,
}

impl TrainedModels {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<TrainedModels> {
        let m: TrainedModels = serde_json::from_str(s)?;
        if m.version != FEATURE_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                model: m.version,
                expected: FEATURE_SCHEMA_VERSION,
            });
        }
        Ok(m)
    }
}

impl LocalModel {
    /// Calibrated probability for a featurized candidate.
    pub fn score(&self, cardinality: Cardinality, features: &[f64]) -> Result<f64> {
        let model = match cardinality {
            Cardinality::N1 => &self.n1,
            Cardinality::OneOne => &self.oneone,
        };
        if features.len() != model.weights.len() {
            return Err(Error::SchemaMismatch {
                model: model.weights.len() as u32,
                expected: features.len() as u32,
            });
        }
        let mut feats = features.to_vec();
        if self.schema_only {
            for i in data_feature_indices(cardinality) {
                feats[i] = 0.0;
            }
        }
        Ok(model.calibration.apply(model.raw_score(&feats)))
    }
}

/// A training case: tables plus their ground-truth joins.
pub struct TrainingCase {
    pub name: String,
    pub tables: Vec<Table>,
    pub truth: GroundTruth,
}

/// Key identifying a column globally by name (stable across cases).
type ColKey = (String, String); // (table name, column name)

/// Positive-label transitive closure: if L(a,b)=1 and L(b,c)=1 then L(a,c)=1,
/// iterated to fixpoint. Only positive labels propagate; an existing 0 on a
/// closed pair is overridden to 1.
pub fn apply_label_transitivity(pairs: Vec<(ColKey, ColKey, u8)>) -> Vec<(ColKey, ColKey, u8)> {
    let positives: Vec<(&ColKey, &ColKey)> = pairs
        .iter()
        .filter(|(_, _, l)| *l == 1)
        .map(|(a, b, _)| (a, b))
        .collect();

    // connected components of the positive-label graph
    let mut parent: HashMap<ColKey, ColKey> = HashMap::new();
    fn find(parent: &mut HashMap<ColKey, ColKey>, k: &ColKey) -> ColKey {
        let p = parent.get(k).cloned();
        match p {
            None => {
                parent.insert(k.clone(), k.clone());
                k.clone()
            }
            Some(p) if p == *k => p,
            Some(p) => {
                let root = find(parent, &p);
                parent.insert(k.clone(), root.clone());
                root
            }
        }
    }
    for (a, b) in &positives {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        if ra != rb {
            parent.insert(ra, rb);
        }
    }

    let mut components: BTreeMap<ColKey, BTreeSet<ColKey>> = BTreeMap::new();
    for (a, b) in &positives {
        let ra = find(&mut parent, a);
        components.entry(ra.clone()).or_default().insert((*a).clone());
        let rb = find(&mut parent, b);
        components.entry(rb).or_default().insert((*b).clone());
    }

    let mut out: BTreeMap<(ColKey, ColKey), u8> = BTreeMap::new();
    for (a, b, l) in pairs {
        let key = canonical(a, b);
        let e = out.entry(key).or_insert(l);
        *e = (*e).max(l);
    }
    for members in components.values() {
        let members: Vec<&ColKey> = members.iter().collect();
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let key = canonical(members[i].clone(), members[j].clone());
                out.insert(key, 1);
            }
        }
    }
    out.into_iter().map(|((a, b), l)| (a, b, l)).collect()
}

fn canonical(a: ColKey, b: ColKey) -> (ColKey, ColKey) {
    if a <= b { (a, b) } else { (b, a) }
}

/// Options controlling training.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub containment_threshold: f64,
    pub uniq_threshold: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            seed: 0,
            learning_rate: 0.3,
            epochs: 400,
            l2: 1e-4,
            containment_threshold: 0.9,
            uniq_threshold: 0.95,
        }
    }
}

struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    /// case index of each row, for the case-level split
    case_idx: Vec<usize>,
}

/// Train both classifiers (N:1 and 1:1) plus schema-only variants.
///
/// Cases are split 80/20 at the case level; the 20% holdout fits the Platt
/// calibration. Negatives are all enumerated candidates not in the (closed)
/// ground truth. Deterministic given the seed.
pub fn train(corpus: &[TrainingCase], options: &TrainOptions) -> TrainedModels {
    let mut corpus_stats = CorpusStats::default();

    // featurize every case once per class
    let mut n1 = Dataset { features: vec![], labels: vec![], case_idx: vec![] };
    let mut oneone = Dataset { features: vec![], labels: vec![], case_idx: vec![] };

    let mut case_profiles: Vec<Vec<Vec<ColumnProfile>>> = Vec::with_capacity(corpus.len());
    for case in corpus {
        for t in &case.tables {
            for c in &t.columns {
                corpus_stats.record(&c.name);
            }
        }
        case_profiles.push(case.tables.iter().map(|t| profile_table(t, options.seed)).collect());
    }

    for (ci, case) in corpus.iter().enumerate() {
        let profiles = &case_profiles[ci];
        let candidates = enumerate_candidates(
            &case.tables,
            profiles,
            options.containment_threshold,
            options.uniq_threshold,
        );
        let positives = positive_pairs(case);
        let ctx = FeatureContext { tables: &case.tables, profiles, corpus_stats: &corpus_stats };
        for cand in &candidates {
            let skey = col_key(&case.tables, cand.source);
            let tkey = col_key(&case.tables, cand.target);
            let label = u8::from(positives.contains(&canonical(skey, tkey)));
            let feats = featurize(cand, &ctx);
            let ds = match cand.cardinality {
                Cardinality::N1 => &mut n1,
                Cardinality::OneOne => &mut oneone,
            };
            ds.features.push(feats);
            ds.labels.push(label);
            ds.case_idx.push(ci);
        }
    }

    // case-level 80/20 split
    let mut case_order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    case_order.shuffle(&mut rng);
    let n_train = ((corpus.len() as f64) * 0.8).ceil() as usize;
    let train_cases: HashSet<usize> = case_order.iter().take(n_train.max(1)).copied().collect();

    let fit = |ds: &Dataset, card: Cardinality, schema_only: bool| {
        fit_class(ds, card, schema_only, &train_cases, options)
    };

    let mk = |schema_only: bool| LocalModel {
        feature_schema_version: FEATURE_SCHEMA_VERSION,
        n1: fit(&n1, Cardinality::N1, schema_only),
        oneone: fit(&oneone, Cardinality::OneOne, schema_only),
        corpus_stats: corpus_stats.clone(),
        schema_only,
        seed: options.seed,
    };

    TrainedModels { version: FEATURE_SCHEMA_VERSION, full: mk(false), schema_only: mk(true) }
}

fn positive_pairs(case: &TrainingCase) -> BTreeSet<(ColKey, ColKey)> {
    let raw: Vec<(ColKey, ColKey, u8)> = case
        .truth
        .relationships
        .iter()
        .map(|r| {
            (
                (r.from_table.clone(), r.from_columns[0].clone()),
                (r.to_table.clone(), r.to_columns[0].clone()),
                1u8,
            )
        })
        .collect();
    apply_label_transitivity(raw)
        .into_iter()
        .filter(|(_, _, l)| *l == 1)
        .map(|(a, b, _)| (a, b))
        .collect()
}

fn col_key(tables: &[Table], r: crate::table::ColumnRef) -> ColKey {
    (tables[r.table].name.clone(), tables[r.table].columns[r.column].name.clone())
}

fn fit_class(
    ds: &Dataset,
    cardinality: Cardinality,
    schema_only: bool,
    train_cases: &HashSet<usize>,
    options: &TrainOptions,
) -> LinearModel {
    let n_features = feature_names(cardinality).len();
    let mask: Vec<usize> = if schema_only { data_feature_indices(cardinality) } else { vec![] };

    let rows: Vec<(Vec<f64>, f64, bool)> = ds
        .features
        .iter()
        .zip(&ds.labels)
        .zip(&ds.case_idx)
        .map(|((f, &l), ci)| {
            let mut f = f.clone();
            for &i in &mask {
                f[i] = 0.0;
            }
            (f, l as f64, train_cases.contains(ci))
        })
        .collect();

    let train_rows: Vec<&(Vec<f64>, f64, bool)> = rows.iter().filter(|r| r.2).collect();
    let holdout_rows: Vec<&(Vec<f64>, f64, bool)> = rows.iter().filter(|r| !r.2).collect();
    let positives = train_rows.iter().filter(|r| r.1 > 0.5).count();
    let low_confidence = positives < 10;

    // standardization from training rows only
    let mut means = vec![0.0; n_features];
    let mut stds = vec![1.0; n_features];
    if !train_rows.is_empty() {
        for (f, _, _) in train_rows.iter().map(|r| &**r) {
            for (m, x) in means.iter_mut().zip(f) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= train_rows.len() as f64;
        }
        let mut var = vec![0.0; n_features];
        for (f, _, _) in train_rows.iter().map(|r| &**r) {
            for ((v, x), m) in var.iter_mut().zip(f).zip(&means) {
                *v += (x - m) * (x - m);
            }
        }
        for (s, v) in stds.iter_mut().zip(var) {
            let sd = (v / train_rows.len() as f64).sqrt();
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
    }

    // full-batch gradient descent on the logistic loss with L2
    let mut weights = vec![0.0; n_features];
    let mut bias = 0.0;
    let n = train_rows.len().max(1) as f64;
    for _ in 0..options.epochs {
        let mut gw = vec![0.0; n_features];
        let mut gb = 0.0;
        for (f, y, _) in train_rows.iter().map(|r| &**r) {
            let mut s = bias;
            for ((x, m), (w, sd)) in
                f.iter().zip(&means).zip(weights.iter().zip(&stds))
            {
                s += w * (x - m) / sd;
            }
            let p = 1.0 / (1.0 + (-s).exp());
            let err = p - y;
            gb += err;
            for ((g, x), (m, sd)) in
                gw.iter_mut().zip(f).zip(means.iter().zip(&stds))
            {
                *g += err * (x - m) / sd;
            }
        }
        for (w, g) in weights.iter_mut().zip(&gw) {
            *w -= options.learning_rate * (g / n + options.l2 * *w);
        }
        bias -= options.learning_rate * gb / n;
    }

    let model = LinearModel {
        weights,
        bias,
        feature_means: means,
        feature_stds: stds,
        calibration: PlattCalibration { a: -1.0, b: 0.0 },
        low_confidence,
    };

    // Platt calibration on the case-level holdout
    let scores: Vec<f64> = holdout_rows.iter().map(|(f, _, _)| model.raw_score(f)).collect();
    let labels: Vec<f64> = holdout_rows.iter().map(|(_, y, _)| *y).collect();
    let calibration = fit_platt(&scores, &labels).unwrap_or(PlattCalibration { a: -1.0, b: 0.0 });

    LinearModel { calibration, ..model }
}

/// Fit Platt sigmoid parameters by Newton's method on the log-likelihood of
/// P = 1/(1+exp(a*s+b)), with the usual prior-smoothed targets.
pub fn fit_platt(scores: &[f64], labels: &[f64]) -> Option<PlattCalibration> {
    let n_pos = labels.iter().filter(|&&y| y > 0.5).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos < 1.0 || n_neg < 1.0 {
        return None;
    }
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&y| if y > 0.5 { hi } else { lo }).collect();

    let mut a = 0.0f64;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let min_step = 1e-10;
    let sigma = 1e-12;

    let nll = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&targets)
            .map(|(&s, &t)| {
                let fapb = a * s + b;
                if fapb >= 0.0 {
                    t * fapb + (1.0 + (-fapb).exp()).ln()
                } else {
                    (t - 1.0) * fapb + (1.0 + fapb.exp()).ln()
                }
            })
            .sum()
    };

    let mut fval = nll(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21) = (sigma, sigma, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&s, &t) in scores.iter().zip(&targets) {
            let fapb = a * s + b;
            let (p, q) = if fapb >= 0.0 {
                let e = (-fapb).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = fapb.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = t - p;
            g1 += s * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;

        let mut step = 1.0;
        let mut advanced = false;
        while step >= min_step {
            let na = a + step * da;
            let nb = b + step * db;
            let nf = nll(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                advanced = true;
                break;
            }
            step /= 2.0;
        }
        if !advanced {
            break;
        }
    }
    Some(PlattCalibration { a, b })
}
