//! Synthetic star/snowflake corpus generator with ground truth, used for
//! training, evaluation, and benchmarks.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::candidates::Cardinality;
use crate::error::{Error, Result};
use crate::recall::{GroundTruth, Relationship};
use crate::table::{load_table, LoadOptions, Table};

/// Shape parameters for one generated case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub n_fact: usize,
    pub dims_per_fact: usize,
    /// Extra n:1 hops hanging off each dimension (0 = plain star).
    pub snowflake_depth: usize,
    pub rows_fact: usize,
    pub rows_dim: usize,
    /// Generic-named distractor columns added per table.
    pub noise_columns: usize,
    /// Fraction of a distractor column's values drawn from a real key domain.
    pub distractor_overlap: f64,
    /// Dimensions shared by all fact tables (must be <= dims_per_fact).
    pub shared_dims: usize,
    /// Fraction of dimensions that get a 1:1 extension table.
    pub one_one_rate: f64,
    pub seed: u64,
}

impl Default for SchemaSpec {
    fn default() -> Self {
        SchemaSpec {
            n_fact: 1,
            dims_per_fact: 4,
            snowflake_depth: 1,
            rows_fact: 200,
            rows_dim: 40,
            noise_columns: 1,
            distractor_overlap: 0.3,
            shared_dims: 0,
            one_one_rate: 0.0,
            seed: 0,
        }
    }
}

const DIM_NAMES: &[&str] = &[
    "customer", "product", "store", "employee", "supplier", "region", "category", "carrier",
    "promotion", "account", "warehouse", "channel", "currency", "plant", "vendor", "device",
    "contract", "project", "segment", "brand", "city", "country", "team", "branch", "policy",
    "asset", "campaign", "customer_group", "cost_center", "material", "route", "terminal",
    "operator", "tariff", "license", "portfolio", "site", "machine", "driver", "shift",
];

const FACT_NAMES: &[&str] =
    &["sales", "orders", "shipments", "invoices", "payments", "returns", "bookings", "claims"];

const WORDS: &[&str] = &[
    "alpha", "birch", "cobalt", "delta", "ember", "fjord", "garnet", "harbor", "indigo", "juniper",
    "krypton", "lumen", "maple", "nimbus", "onyx", "prairie", "quartz", "raven", "sierra", "topaz",
];

struct DimPlan {
    name: String,
    /// Key domain: [base, base + rows_dim).
    base: i64,
    one_one: bool,
    chain: Vec<String>, // snowflake tables hanging off this dim
}

/// Generate one case: tables plus ground truth. Deterministic in the seed.
pub fn generate_case(spec: &SchemaSpec) -> (Vec<Table>, GroundTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let shared = spec.shared_dims.min(spec.dims_per_fact);
    let n_dims = shared + spec.n_fact * (spec.dims_per_fact - shared);

    let mut dim_names: Vec<&str> = DIM_NAMES.to_vec();
    dim_names.shuffle(&mut rng);
    assert!(n_dims <= dim_names.len(), "too many dimensions for the name pool");

    let mut plans: Vec<DimPlan> = (0..n_dims)
        .map(|i| {
            let name = dim_names[i].to_string();
            DimPlan {
                // disjoint key domains so only real FK pairs have containment
                base: 10_000 * (i as i64 + 1),
                one_one: rng.gen_bool(spec.one_one_rate),
                chain: (0..spec.snowflake_depth)
                    .map(|d| format!("{}_{}", dim_names[i], ["type", "group", "class"][d % 3]))
                    .collect(),
                name,
            }
        })
        .collect();

    let mut tables = Vec::new();
    let mut relationships = Vec::new();
    // chain key domains come after dim domains
    let mut next_base = 10_000 * (n_dims as i64 + 1);

    // real key domains, used to make distractors overlap something real
    let mut key_domains: Vec<(i64, usize)> = Vec::new();

    for plan in &plans {
        key_domains.push((plan.base, spec.rows_dim));
    }

    for plan in &mut plans {
        let mut chain_bases = Vec::new();
        for _ in &plan.chain {
            chain_bases.push(next_base);
            key_domains.push((next_base, spec.rows_dim));
            next_base += 10_000;
        }

        // dimension table: id, name, attributes, FK to first chain table
        let rows = spec.rows_dim;
        let mut cols: Vec<(String, Vec<Option<String>>)> = vec![
            ("id".into(), (0..rows).map(|r| Some((plan.base + r as i64).to_string())).collect()),
            (format!("{}_name", plan.name), word_col(rows, &mut rng)),
        ];
        if let Some(&cb) = chain_bases.first() {
            cols.push((
                format!("{}_id", plan.chain[0]),
                fk_col(rows, cb, spec.rows_dim, &mut rng),
            ));
            relationships.push(rel(&plan.name, &format!("{}_id", plan.chain[0]), &plan.chain[0], "id", Cardinality::N1));
        }
        add_noise_columns(&mut cols, spec, &key_domains, &mut rng);
        tables.push(Table::from_columns(&plan.name, cols));

        // snowflake chain tables
        for (d, chain_name) in plan.chain.iter().enumerate() {
            let mut cols: Vec<(String, Vec<Option<String>>)> = vec![
                (
                    "id".into(),
                    (0..rows).map(|r| Some((chain_bases[d] + r as i64).to_string())).collect(),
                ),
                (format!("{}_label", chain_name), word_col(rows, &mut rng)),
            ];
            if d + 1 < plan.chain.len() {
                cols.push((
                    format!("{}_id", plan.chain[d + 1]),
                    fk_col(rows, chain_bases[d + 1], spec.rows_dim, &mut rng),
                ));
                relationships.push(rel(
                    chain_name,
                    &format!("{}_id", plan.chain[d + 1]),
                    &plan.chain[d + 1],
                    "id",
                    Cardinality::N1,
                ));
            }
            add_noise_columns(&mut cols, spec, &key_domains, &mut rng);
            tables.push(Table::from_columns(chain_name, cols));
        }

        // 1:1 extension: same key domain, one row per dim row
        if plan.one_one {
            let ext_name = format!("{}_details", plan.name);
            let mut ids: Vec<i64> = (0..rows as i64).map(|r| plan.base + r).collect();
            ids.shuffle(&mut rng);
            let cols: Vec<(String, Vec<Option<String>>)> = vec![
                (format!("{}_id", plan.name), ids.iter().map(|v| Some(v.to_string())).collect()),
                ("notes".into(), word_col(rows, &mut rng)),
            ];
            tables.push(Table::from_columns(&ext_name, cols));
            relationships.push(rel(
                &plan.name,
                "id",
                &ext_name,
                &format!("{}_id", plan.name),
                Cardinality::OneOne,
            ));
        }
    }

    // fact tables
    let mut dim_cursor = shared; // private dims handed out from here
    for f in 0..spec.n_fact {
        let fact_name = format!("{}_{}", FACT_NAMES[f % FACT_NAMES.len()], f + 1);
        let rows = spec.rows_fact;
        let mut cols: Vec<(String, Vec<Option<String>>)> = vec![(
            format!("{}_id", fact_name),
            (0..rows).map(|r| Some((1_000_000 * (f as i64 + 1) + r as i64).to_string())).collect(),
        )];
        let mut my_dims: Vec<usize> = (0..shared).collect();
        for _ in shared..spec.dims_per_fact {
            my_dims.push(dim_cursor);
            dim_cursor += 1;
        }
        for &di in &my_dims {
            let plan = &plans[di];
            cols.push((
                format!("{}_id", plan.name),
                fk_col(rows, plan.base, spec.rows_dim, &mut rng),
            ));
            relationships.push(rel(
                &fact_name,
                &format!("{}_id", plan.name),
                &plan.name,
                "id",
                Cardinality::N1,
            ));
        }
        cols.push((
            "amount".into(),
            (0..rows).map(|_| Some(format!("{:.2}", rng.gen_range(1.0..5000.0)))).collect(),
        ));
        add_noise_columns(&mut cols, spec, &key_domains, &mut rng);
        tables.push(Table::from_columns(&fact_name, cols));
    }

    let truth = GroundTruth { relationships };
    validate_case(&tables, &truth);
    (tables, truth)
}

fn rel(from_t: &str, from_c: &str, to_t: &str, to_c: &str, card: Cardinality) -> Relationship {
    Relationship {
        from_table: from_t.to_string(),
        from_columns: vec![from_c.to_string()],
        to_table: to_t.to_string(),
        to_columns: vec![to_c.to_string()],
        cardinality: card,
        probability: None,
        provenance: None,
    }
}

fn word_col(rows: usize, rng: &mut ChaCha8Rng) -> Vec<Option<String>> {
    (0..rows)
        .map(|_| {
            Some(format!(
                "{} {}",
                WORDS[rng.gen_range(0..WORDS.len())],
                WORDS[rng.gen_range(0..WORDS.len())]
            ))
        })
        .collect()
}

/// FK values into [base, base+domain), with ~3% dangling references pointing
/// at a single deleted-entity key just past the domain. A single dangling key
/// bounds distinct-value containment below by d/(d+1), keeping it above the
/// IND threshold while still exercising imperfect data.
fn fk_col(rows: usize, base: i64, domain: usize, rng: &mut ChaCha8Rng) -> Vec<Option<String>> {
    (0..rows)
        .map(|_| {
            let dangling = rng.gen_bool(0.03);
            let v = if dangling {
                base + domain as i64
            } else {
                base + rng.gen_range(0..domain as i64)
            };
            Some(v.to_string())
        })
        .collect()
}

fn add_noise_columns(
    cols: &mut Vec<(String, Vec<Option<String>>)>,
    spec: &SchemaSpec,
    key_domains: &[(i64, usize)],
    rng: &mut ChaCha8Rng,
) {
    const NOISE_NAMES: &[&str] = &["code", "value", "flag", "score", "rank", "level"];
    let rows = cols.first().map(|(_, v)| v.len()).unwrap_or(0);
    for ni in 0..spec.noise_columns {
        let name = NOISE_NAMES[ni % NOISE_NAMES.len()].to_string();
        let &(base, domain) = &key_domains[rng.gen_range(0..key_domains.len())];
        // half of the distractors are "hard": drawn entirely from a real key
        // domain, so they pass the containment filter and must be rejected on
        // names and statistics alone
        let hard = rng.gen_bool(0.5);
        let vals = (0..rows)
            .map(|_| {
                let v = if hard || rng.gen_bool(spec.distractor_overlap) {
                    base + rng.gen_range(0..domain as i64)
                } else {
                    rng.gen_range(0..1_000_000)
                };
                Some(v.to_string())
            })
            .collect();
        cols.push((name, vals));
    }
}

/// Structural self-checks on generated ground truth: FK-once and acyclicity
/// over the n:1 edges, and every referenced table/column exists.
fn validate_case(tables: &[Table], truth: &GroundTruth) {
    let find = |t: &str, c: &str| {
        let table = tables.iter().find(|x| x.name == t).unwrap_or_else(|| panic!("table {t}"));
        assert!(table.columns.iter().any(|x| x.name == c), "column {t}.{c}");
    };
    let mut fk_sources = std::collections::BTreeSet::new();
    for r in &truth.relationships {
        find(&r.from_table, &r.from_columns[0]);
        find(&r.to_table, &r.to_columns[0]);
        if r.cardinality == Cardinality::N1 {
            assert!(
                fk_sources.insert((r.from_table.clone(), r.from_columns[0].clone())),
                "FK-once violated in generated truth"
            );
        }
    }
    // acyclic over n:1 edges (table level)
    let idx = |t: &str| tables.iter().position(|x| x.name == t).unwrap();
    let mut adj = vec![Vec::new(); tables.len()];
    for r in &truth.relationships {
        if r.cardinality == Cardinality::N1 {
            adj[idx(&r.from_table)].push(idx(&r.to_table));
        }
    }
    let mut state = vec![0u8; tables.len()];
    fn dfs(v: usize, adj: &[Vec<usize>], state: &mut [u8]) {
        state[v] = 1;
        for &u in &adj[v] {
            assert!(state[u] != 1, "cycle in generated truth");
            if state[u] == 0 {
                dfs(u, adj, state);
            }
        }
        state[v] = 2;
    }
    for v in 0..tables.len() {
        if state[v] == 0 {
            dfs(v, &adj, &mut state);
        }
    }
}

/// Write `n_cases` cases under `dir/case_<i>/` as CSVs plus ground_truth.json.
/// Case i uses seed `spec.seed + i`.
pub fn write_corpus(dir: &Path, spec: &SchemaSpec, n_cases: usize) -> Result<()> {
    for i in 0..n_cases {
        let mut case_spec = spec.clone();
        case_spec.seed = spec.seed + i as u64;
        let (tables, truth) = generate_case(&case_spec);
        let case_dir = dir.join(format!("case_{i:03}"));
        fs::create_dir_all(&case_dir).map_err(|e| Error::Io { path: case_dir.clone(), source: e })?;
        for t in &tables {
            write_table_csv(&case_dir.join(format!("{}.csv", t.name)), t)?;
        }
        let gt_path = case_dir.join("ground_truth.json");
        fs::write(&gt_path, truth.to_json())
            .map_err(|e| Error::Io { path: gt_path, source: e })?;
    }
    Ok(())
}

pub fn write_table_csv(path: &Path, table: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?;
    w.write_record(table.columns.iter().map(|c| c.name.as_str()))
        .map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?;
    for r in 0..table.row_count {
        let record: Vec<&str> = table
            .columns
            .iter()
            .map(|c| c.values[r].as_deref().unwrap_or(""))
            .collect();
        w.write_record(&record)
            .map_err(|e| Error::Csv { path: path.to_path_buf(), source: e })?;
    }
    w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

/// Load one case directory: every *.csv as a table (sorted by file name) and
/// ground_truth.json when present.
pub fn load_case(dir: &Path, options: &LoadOptions) -> Result<(Vec<Table>, Option<GroundTruth>)> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::NoTables(dir.to_path_buf()));
    }
    let tables: Result<Vec<Table>> = paths.iter().map(|p| load_table(p, options)).collect();
    let gt_path = dir.join("ground_truth.json");
    let truth = if gt_path.exists() {
        let json = fs::read_to_string(&gt_path).map_err(|e| Error::Io { path: gt_path, source: e })?;
        Some(GroundTruth::from_json(&json)?)
    } else {
        None
    };
    Ok((tables?, truth))
}

/// Load all case_* subdirectories of a corpus directory, sorted by name.
pub fn load_corpus(dir: &Path, options: &LoadOptions) -> Result<Vec<(String, Vec<Table>, Option<GroundTruth>)>> {
    let mut dirs: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::NoTables(dir.to_path_buf()));
    }
    dirs.iter()
        .map(|d| {
            let name = d.file_name().unwrap().to_string_lossy().into_owned();
            load_case(d, options).map(|(t, g)| (name, t, g))
        })
        .collect()
}
