//! Golden files under `tests/golden/`. Run with `L2DCD_UPDATE_GOLDEN=1` to
//! rewrite them after an intentional change.

use std::path::PathBuf;

use serde_json::Value;

use l2dcd::data::{generate_synthetic, stratified_split, CausalPair, Mechanism, SyntheticBenchSpec};
use l2dcd::eval::{accuracy_csv, run_benchmark, stub_cd_predictions, ExperimentSettings, Weighting};
use l2dcd::experts::{
    make_epsilon_expert, p_expert_from_name, CachedAnswer, Expert, RemoteExpert, RemoteExpertConfig,
};
use l2dcd::features::{hashed_tfidf, FeatureVector, FeaturizerConfig};
use l2dcd::remote::ContentCache;
use l2dcd::{Direction, ForestHyperparams};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn updating() -> bool {
    std::env::var_os("L2DCD_UPDATE_GOLDEN").is_some()
}

fn check_text(name: &str, actual: &str) {
    let path = golden(name);
    if updating() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "{name} differs from the golden copy");
}

/// Structural equality with a relative tolerance on numbers, since
/// transcendental functions may differ in the last bit across platforms.
fn close(a: &Value, b: &Value, at: &str) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{at}: {x} vs {y}");
        }
        (Value::Array(x), Value::Array(y)) => {
            assert_eq!(x.len(), y.len(), "{at}: length");
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                close(u, v, &format!("{at}[{i}]"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>(), "{at}: keys");
            for (k, u) in x {
                close(u, &y[k], &format!("{at}.{k}"));
            }
        }
        _ => assert_eq!(a, b, "{at}"),
    }
}

fn check_json(name: &str, actual: &Value) {
    let path = golden(name);
    if updating() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(actual).unwrap() + "\n").unwrap();
        return;
    }
    let expected: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    close(actual, &expected, name);
}

#[test]
fn tfidf_vectors() {
    let corpus = [
        "Data from a physics study. The first column (x) records voltage.",
        "Altitude and temperature of weather stations.",
        "household income, consumer spending",
    ];
    let v: Vec<FeatureVector> = hashed_tfidf(&corpus, 10).unwrap();
    check_json("tfidf_dim10.json", &serde_json::to_value(&v).unwrap());
}

#[test]
fn synthetic_benchmark_report() {
    let all: Vec<CausalPair> = generate_synthetic(&SyntheticBenchSpec {
        n_pairs_per_domain: 12,
        n_samples: 10,
        mechanism: Mechanism::NonlinearAnm,
        noise_scale: 0.1,
        seed: 1,
    })
    .unwrap();
    let (train, test) = stratified_split(&all);
    let cd = vec![("stub(0.65)".to_string(), stub_cd_predictions(&all, 0.65, 9))];
    let experts = vec![
        Expert::Synthetic(make_epsilon_expert(0.1, 0).unwrap()),
        Expert::Synthetic(p_expert_from_name("BCE").unwrap()),
    ];
    let settings = ExperimentSettings {
        featurizer: FeaturizerConfig::hashed_tfidf(20),
        hp: ForestHyperparams { n_trees: 25, ..ForestHyperparams::default() },
        train_seeds: vec![0, 1, 2],
        baseline_seeds: vec![10, 11, 12],
        weighting: Weighting::Unweighted,
    };
    let (report, _) = run_benchmark(&train, &test, &cd, &experts, &settings).unwrap();
    check_text("benchmark_accuracies.csv", &accuracy_csv(&report.rows));
    check_json("benchmark_consistency.json", &serde_json::to_value(&report.consistency).unwrap());
}

#[test]
fn recorded_expert_answers_replay_offline() {
    let cfg = RemoteExpertConfig {
        endpoint_url: "http://127.0.0.1:9/unreachable".into(),
        model_name: "recorded-model".into(),
        seed: 0,
        timeout_s: 1.0,
        cache_dir: golden("expert_cache"),
    };
    let answers = [
        ("The altitude of a weather station and its mean annual temperature.", "1) x causes y", Direction::Forward),
        ("The age of an abalone in rings and its shell length.", "The answer is 2) y causes x", Direction::Backward),
    ];
    let e = RemoteExpert::with_api_key(cfg, None).unwrap();
    if updating() {
        let cache = ContentCache::new(golden("expert_cache"));
        for (desc, raw, dir) in answers {
            let key = e.request_hash(desc);
            let rec = CachedAnswer {
                request_hash: key.clone(),
                model: "recorded-model".into(),
                seed: 0,
                raw_response: raw.into(),
                direction: dir,
            };
            if cache.get::<CachedAnswer>(&key).is_none() {
                cache.put(&key, &rec).unwrap();
            }
        }
    }
    for (i, (desc, raw, dir)) in answers.into_iter().enumerate() {
        let pair = CausalPair {
            id: i as u32,
            name_u: "x".into(),
            name_v: "y".into(),
            x_u: vec![0.0, 1.0],
            x_v: vec![0.0, 1.0],
            description: desc.into(),
            domain: l2dcd::Domain::Biology,
            truth: Direction::Forward,
            weight: 1.0,
        };
        let p = e.predict(&pair).unwrap();
        assert_eq!(p.direction, dir);
        assert_eq!(p.raw_answer.as_deref(), Some(raw));
    }
    assert_eq!(e.cache().digests().len(), 2);
}
