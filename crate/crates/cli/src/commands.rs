use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use l2dcd::data::{pairs_to_json, read_two_columns, split_table, CausalPair};
use l2dcd::defer::{DeferralModel, DeferralRule, MODEL_FORMAT_VERSION};
use l2dcd::eval::{accuracy_csv, evaluate_combo, loo_select, paper_grid, BenchmarkReport, ExperimentSettings};
use l2dcd::features::FittedFeaturizer;
use l2dcd::graphext::{
    ancestry_matrix, flatten_training, infer_order, pair_description, train_graph_deferral, Ancestry, LabeledGraph,
};
use l2dcd::remote::ContentCache;
use l2dcd::{CdMethod, Direction, Model};

use crate::config::{read_json, GraphConfig, RunConfig};
use crate::error::CliError;

fn settings(cfg: &RunConfig) -> ExperimentSettings {
    ExperimentSettings {
        featurizer: cfg.featurizer.clone(),
        hp: cfg.hp,
        train_seeds: cfg.train_seeds.clone(),
        baseline_seeds: cfg.baseline_seeds(),
        weighting: cfg.weighting,
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Failure(format!("thread pool: {e}")))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(&format!("writing {}", path.display()), e))
}

type CdColumns = Vec<(String, BTreeMap<u32, Direction>)>;

fn cd_columns(cfg: &RunConfig, pairs: &[CausalPair]) -> Result<CdColumns, CliError> {
    let mut out = Vec::with_capacity(cfg.cd_methods.len());
    for entry in &cfg.cd_methods {
        let name = entry.name();
        if out.iter().any(|(n, _)| *n == name) {
            return Err(CliError::Usage(format!("CD method {name} listed twice")));
        }
        out.push((name, entry.predictions(pairs)?));
    }
    Ok(out)
}

/// Runs every (CD, expert) combination and writes `accuracies.csv`,
/// `consistency.json` and `manifest.json` to the output directory.
pub fn benchmark(cfg: &RunConfig, jobs: usize) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let out_dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no output_dir in config or on the command line".into()))?;
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&format!("creating {}", out_dir.display()), e))?;

    let experts = cfg.experts()?;
    let (train, test) = cfg.load_pairs()?;
    let all: Vec<CausalPair> = train.iter().chain(&test).cloned().collect();
    let cd = cd_columns(cfg, &all)?;
    let s = settings(cfg);

    let combos: Vec<(usize, usize)> =
        (0..cd.len()).flat_map(|c| (0..experts.len()).map(move |e| (c, e))).collect();
    let results = pool(jobs)?.install(|| {
        combos
            .par_iter()
            .map(|&(c, e)| evaluate_combo(&train, &test, &cd[c].0, &cd[c].1, &experts[e], &s))
            .collect::<Result<Vec<_>, _>>()
    })?;
    for r in &results {
        let empty = r.runs.iter().filter(|run| run.s_size == 0).count();
        if empty > 0 {
            eprintln!(
                "warning: {} / {}: predictors never disagree in {empty} run(s); those models always choose CD",
                r.row.cd_name, r.row.expert_name
            );
        }
    }
    let report = BenchmarkReport::assemble(&results, &experts)?;

    write_file(&out_dir.join("accuracies.csv"), &accuracy_csv(&report.rows))?;
    let consistency = serde_json::to_string_pretty(&report.consistency).expect("report serializes");
    write_file(&out_dir.join("consistency.json"), &(consistency + "\n"))?;
    let manifest = manifest(cfg, &train, &test);
    write_file(
        &out_dir.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;
    Ok(out_dir)
}

/// Everything needed to rerun: the resolved config and its hash, the seeds,
/// a digest of the pairs used, and digests of every remote cache file.
fn manifest(cfg: &RunConfig, train: &[CausalPair], test: &[CausalPair]) -> Value {
    let config = serde_json::to_value(cfg).expect("config serializes");
    let caches: BTreeMap<String, Vec<(String, String)>> = cfg
        .cache_dirs()
        .into_iter()
        .map(|d| (d.display().to_string(), ContentCache::new(d).digests()))
        .collect();
    json!({
        "tool": "l2dcd",
        "version": env!("CARGO_PKG_VERSION"),
        "model_format_version": MODEL_FORMAT_VERSION,
        "config_sha256": sha256_hex(config.to_string().as_bytes()),
        "config": config,
        "train_seeds": cfg.train_seeds,
        "baseline_seeds": cfg.baseline_seeds(),
        "n_train": train.len(),
        "n_test": test.len(),
        "train_sha256": sha256_hex(pairs_to_json(train).as_bytes()),
        "test_sha256": sha256_hex(pairs_to_json(test).as_bytes()),
        "cache_digests": caches,
    })
}

pub fn pair(method: &str, file: &Path) -> Result<Value, CliError> {
    let m = match method.to_ascii_lowercase().as_str() {
        "reci" => CdMethod::reci(),
        "lingam" | "pair_lingam" => CdMethod::PairLingam,
        "bqcd" | "bqcd_lite" => CdMethod::bqcd_lite(),
        other => return Err(CliError::Usage(format!("unknown method {other:?}; use reci, lingam or bqcd"))),
    };
    let (x, y) = read_two_columns::<f64>(file)?;
    let s = m
        .score(&x, &y)
        .map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?;
    Ok(json!({
        "method": m.name(),
        "direction": s.direction,
        "score": s.score,
        "n": x.len(),
    }))
}

pub fn loo(cfg: &RunConfig, jobs: usize) -> Result<Value, CliError> {
    cfg.validate()?;
    let experts = cfg.experts()?;
    let (train, _) = cfg.load_pairs()?;
    let cd = cd_columns(cfg, &train)?;
    let grid = cfg.grid.clone().unwrap_or_else(paper_grid);
    let sel = pool(jobs)?.install(|| loo_select(&train, &grid, &experts, &cd, &cfg.train_seeds, &cfg.featurizer))?;
    Ok(json!({
        "best": sel.best,
        "best_index": sel.best_index,
        "grid": grid,
        "scores": sel.scores,
    }))
}

type Answers = BTreeMap<(String, String), Ancestry>;

/// Oracle answers for every node pair of `g`, in both orientations.
fn oracle_answers(g: &LabeledGraph, cd: Option<&CdMethod>, recorded: Option<&Answers>) -> Result<Answers, CliError> {
    let mut out = Answers::new();
    for i in 0..g.nodes.len() {
        for j in i + 1..g.nodes.len() {
            let (u, v) = (&g.nodes[i], &g.nodes[j]);
            let a = if let Some(m) = cd {
                let (xu, xv) = match (g.data.get(u), g.data.get(v)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(CliError::Data(format!("no data columns for {u:?} and {v:?}"))),
                };
                let s = m
                    .score(xu, xv)
                    .map_err(|e| CliError::Data(format!("{u} / {v}: {e}")))?;
                match s.direction {
                    Direction::Forward => Ancestry::Forward,
                    Direction::Backward => Ancestry::Backward,
                }
            } else {
                let rec = recorded.expect("one oracle is configured");
                match (rec.get(&(u.clone(), v.clone())), rec.get(&(v.clone(), u.clone()))) {
                    (Some(a), _) => *a,
                    (None, Some(b)) => b.flip(),
                    (None, None) => Ancestry::NoAncestry,
                }
            };
            out.insert((u.clone(), v.clone()), a);
            out.insert((v.clone(), u.clone()), a.flip());
        }
    }
    Ok(out)
}

pub fn graph(cfg: &GraphConfig) -> Result<Value, CliError> {
    let recorded: Option<Answers> = cfg
        .expert_answers
        .as_ref()
        .map(|v| v.iter().map(|(u, w, a)| ((u.clone(), w.clone()), *a)).collect());
    let (cd, expert) = match (cfg.cd.as_ref(), recorded.as_ref()) {
        (None, None) => return Err(CliError::Usage("graph config needs `cd`, `expert_answers` or both".into())),
        (cd, rec) => (cd, rec),
    };
    // with a single oracle configured it answers for both sides
    let cd_of = |g: &LabeledGraph| match cd {
        Some(m) => oracle_answers(g, Some(m), None),
        None => oracle_answers(g, None, expert),
    };
    let expert_of = |g: &LabeledGraph| match expert {
        Some(_) => oracle_answers(g, None, expert),
        None => cd_of(g),
    };

    let model: Model = if cfg.training_graphs.is_empty() {
        let corpus: Vec<String> = cfg
            .graph
            .nodes
            .iter()
            .flat_map(|u| cfg.graph.nodes.iter().map(move |v| pair_description(&cfg.graph.context, u, v)))
            .collect();
        DeferralModel {
            format_version: MODEL_FORMAT_VERSION,
            featurizer: FittedFeaturizer::fit(&cfg.featurizer, &corpus)?,
            hp: cfg.hp,
            s_size: 0,
            baseline_p: 0.0,
            rule: DeferralRule::AlwaysCd,
        }
    } else {
        let rows = flatten_training(&cfg.training_graphs)?;
        let mut cd_preds = Vec::with_capacity(rows.len());
        let mut ex_preds = Vec::with_capacity(rows.len());
        for (gi, g) in cfg.training_graphs.iter().enumerate() {
            let c = cd_of(g)?;
            let e = expert_of(g)?;
            for r in rows.iter().filter(|r| r.graph_index == gi) {
                let key = (r.u.clone(), r.v.clone());
                cd_preds.push(c[&key]);
                ex_preds.push(e[&key]);
            }
        }
        train_graph_deferral(&rows, &cd_preds, &ex_preds, &cfg.featurizer, &cfg.hp)?
    };

    let c = cd_of(&cfg.graph)?;
    let e = expert_of(&cfg.graph)?;
    let cd_oracle = |_: &LabeledGraph, u: &str, v: &str| c[&(u.to_string(), v.to_string())];
    let expert_oracle = |_: &LabeledGraph, u: &str, v: &str| e[&(u.to_string(), v.to_string())];
    let ranking = infer_order(&cfg.graph, &model, &cd_oracle, &expert_oracle)?;
    let violation = if cfg.graph.edges.is_empty() {
        Value::Null
    } else {
        json!(ranking.violation_rate(&ancestry_matrix(&cfg.graph)?))
    };
    Ok(json!({
        "order": ranking.order,
        "violation_rate": violation,
        "s_size": model.s_size,
    }))
}

pub const DEFAULT_FETCH_URL: &str = "https://webdav.tuebingen.mpg.de/cause-effect/";

/// Downloads the metadata and every bivariate pair in the split table into
/// `dest`. Files that already exist are left alone.
pub fn fetch(base_url: &str, dest: &Path, timeout_s: f64) -> Result<Value, CliError> {
    std::fs::create_dir_all(dest).map_err(|e| CliError::io(&format!("creating {}", dest.display()), e))?;
    let client = reqwest::blocking::Client::builder()
        .timeout(std::time::Duration::from_secs_f64(timeout_s))
        .build()
        .map_err(|e| CliError::Remote(e.to_string()))?;
    let base = if base_url.ends_with('/') { base_url.to_string() } else { format!("{base_url}/") };
    let mut names = vec!["pairmeta.txt".to_string()];
    for id in split_table().ids() {
        names.push(format!("pair{id:04}.txt"));
        names.push(format!("pair{id:04}_des.txt"));
    }
    let (mut fetched, mut kept) = (0usize, 0usize);
    for name in &names {
        let target = dest.join(name);
        if target.exists() {
            kept += 1;
            continue;
        }
        let url = format!("{base}{name}");
        let resp = client
            .get(&url)
            .send()
            .map_err(|e| CliError::Remote(format!("{url}: {e}")))?;
        if !resp.status().is_success() {
            return Err(CliError::Remote(format!("{url}: HTTP {}", resp.status().as_u16())));
        }
        let body = resp.bytes().map_err(|e| CliError::Remote(format!("{url}: {e}")))?;
        let tmp = dest.join(format!(".{name}.part"));
        std::fs::write(&tmp, &body).map_err(|e| CliError::io(&format!("writing {}", tmp.display()), e))?;
        std::fs::rename(&tmp, &target).map_err(|e| CliError::io(&format!("renaming {}", tmp.display()), e))?;
        fetched += 1;
    }
    Ok(json!({
        "dest": dest.display().to_string(),
        "fetched": fetched,
        "already_present": kept,
    }))
}

pub fn load_graph_config(path: &Path) -> Result<GraphConfig, CliError> {
    read_json(path)
}
