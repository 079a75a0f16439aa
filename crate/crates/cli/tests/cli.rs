use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_l2dcd"));
    c.env_remove("L2DCD_EXPERT_API_KEY");
    c
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn write_json(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn synthetic_config(out_dir: &Path) -> Value {
    json!({
        "data": {"source": "synthetic", "n_pairs_per_domain": 8, "n_samples": 60, "seed": 4},
        "cd_methods": [{"method": "reci"}, {"method": "stub", "accuracy": 0.6, "seed": 2}],
        "experts": [{"kind": "epsilon", "epsilon": 0.1}, {"kind": "p", "domains": "BCE"}, {"kind": "p", "domains": "CMP"}],
        "featurizer": {"kind": "hashed_tfidf", "dim": 20},
        "hp": {"n_trees": 15},
        "train_seeds": [0, 1],
        "output_dir": out_dir,
    })
}

#[test]
fn benchmark_writes_reproducible_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_json(tmp.path(), "run.json", &synthetic_config(&tmp.path().join("a")));
    let first = bin().args(["benchmark", "--config"]).arg(&cfg).args(["--jobs", "2"]).output().unwrap();
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = bin()
        .args(["benchmark", "--config"])
        .arg(&cfg)
        .args(["--jobs", "1", "--output-dir"])
        .arg(tmp.path().join("b"))
        .output()
        .unwrap();
    assert!(second.status.success());

    let read = |d: &str, f: &str| std::fs::read(tmp.path().join(d).join(f)).unwrap();
    let csv = String::from_utf8(read("a", "accuracies.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
    assert!(csv.starts_with("cd,expert,n_seeds,"));
    assert!(csv.lines().nth(1).unwrap().starts_with("RECI,eps=0.1,2,"));
    assert_eq!(read("a", "accuracies.csv"), read("b", "accuracies.csv"));
    assert_eq!(read("a", "consistency.json"), read("b", "consistency.json"));

    let consistency: Value = serde_json::from_slice(&read("a", "consistency.json")).unwrap();
    assert_eq!(consistency.as_array().unwrap().len(), 3 * 2);

    let ma: Value = serde_json::from_slice(&read("a", "manifest.json")).unwrap();
    let mb: Value = serde_json::from_slice(&read("b", "manifest.json")).unwrap();
    assert_eq!(ma["train_seeds"], json!([0, 1]));
    assert_eq!(ma["baseline_seeds"], json!([1000, 1001]));
    assert_eq!(ma["train_sha256"], mb["train_sha256"]);
    assert_eq!(ma["config"]["hp"]["min_samples_split"], 5);
    assert_eq!(ma["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn config_without_experts_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_config(tmp.path());
    cfg["experts"] = json!([]);
    let path = write_json(tmp.path(), "run.json", &cfg);
    let out = bin().args(["benchmark", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no experts"));
}

#[test]
fn malformed_invocations_exit_with_usage_code() {
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(2));
    let out = bin().args(["benchmark", "--config", "/nonexistent/run.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_config(tmp.path());
    cfg["baseline_seeds"] = json!([1]);
    let path = write_json(tmp.path(), "run.json", &cfg);
    assert_eq!(bin().args(["loo", "--config"]).arg(&path).output().unwrap().status.code(), Some(2));
}

#[test]
fn pair_scores_a_two_column_file() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("two_col.txt");
    let mut text = String::new();
    for i in 0..300 {
        let x = (i as f64 * 0.6180339887).fract();
        let noise = ((i as f64 * 0.7548776662).fract() - 0.5) * 0.05;
        text.push_str(&format!("{x} {}\n", x + x * x * x + noise));
    }
    std::fs::write(&path, text).unwrap();
    let v = stdout_json(&bin().args(["pair", "reci"]).arg(&path).output().unwrap());
    assert_eq!(v["direction"], "forward");
    assert_eq!(v["method"], "RECI");
    assert!(v["score"].as_f64().unwrap() > 0.0);
    assert_eq!(v["n"], 300);

    assert_eq!(bin().args(["pair", "magic"]).arg(&path).output().unwrap().status.code(), Some(2));
    let missing = bin().args(["pair", "reci"]).arg(tmp.path().join("nope.txt")).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn loo_on_a_single_point_grid_returns_it() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_config(tmp.path());
    cfg["grid"] = json!([{"n_trees": 7, "min_samples_split": 3, "dim": 10}]);
    let path = write_json(tmp.path(), "run.json", &cfg);
    let v = stdout_json(&bin().args(["loo", "--config"]).arg(&path).output().unwrap());
    assert_eq!(v["best"], json!({"n_trees": 7, "min_samples_split": 3, "dim": 10}));
    assert_eq!(v["best_index"], 0);
    assert_eq!(v["scores"].as_array().unwrap().len(), 1);
}

#[test]
fn graph_orders_the_chain() {
    let v = stdout_json(&bin().args(["graph", "--config"]).arg(fixture("chain.json")).output().unwrap());
    assert_eq!(v["order"], json!(["u", "v", "w"]));
    assert_eq!(v["violation_rate"], 0.0);
}

#[test]
fn cyclic_graph_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_json(
        tmp.path(),
        "g.json",
        &json!({
            "graph": {"nodes": ["a", "b"], "edges": [["a", "b"], ["b", "a"]]},
            "expert_answers": [["a", "b", "forward"]],
        }),
    );
    assert_eq!(bin().args(["graph", "--config"]).arg(&path).output().unwrap().status.code(), Some(3));
}

#[test]
fn unreachable_expert_service_exits_with_remote_code() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_config(tmp.path());
    cfg["experts"] = json!([{
        "kind": "remote",
        "endpoint_url": "http://127.0.0.1:9/v1/chat/completions",
        "model_name": "m",
        "timeout_s": 2.0,
        "cache_dir": tmp.path().join("cache"),
    }]);
    let path = write_json(tmp.path(), "run.json", &cfg);
    let no_key = bin().args(["benchmark", "--config"]).arg(&path).output().unwrap();
    assert_eq!(no_key.status.code(), Some(4));
    let refused = bin()
        .args(["benchmark", "--config"])
        .arg(&path)
        .env("L2DCD_EXPERT_API_KEY", "k")
        .output()
        .unwrap();
    assert_eq!(refused.status.code(), Some(4));
}

#[test]
fn fetch_downloads_every_listed_file() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/data", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut first = String::new();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            reader.read_line(&mut first).unwrap();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim_end().is_empty() {
                    break;
                }
            }
            let path = first.split_whitespace().nth(1).unwrap_or("/").to_string();
            write!(stream, "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{path}", path.len())
                .unwrap();
        }
    });
    let tmp = tempfile::tempdir().unwrap();
    let dest = tmp.path().join("tuebingen");
    std::fs::create_dir_all(&dest).unwrap();
    std::fs::write(dest.join("pair0001.txt"), "kept").unwrap();
    let v = stdout_json(
        &bin()
            .args(["fetch", "--base-url", &base, "--dest"])
            .arg(&dest)
            .output()
            .unwrap(),
    );
    assert_eq!(v["already_present"], 1);
    assert_eq!(v["fetched"].as_u64().unwrap() + 1, 1 + 2 * 102);
    assert_eq!(std::fs::read_to_string(dest.join("pairmeta.txt")).unwrap(), "/data/pairmeta.txt");
    assert_eq!(std::fs::read_to_string(dest.join("pair0001.txt")).unwrap(), "kept");
    assert!(dest.join("pair0108_des.txt").exists());
}

#[test]
fn fetch_reports_server_errors_with_remote_code() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}/", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        if let Some(Ok(mut s)) = listener.incoming().next() {
            let mut line = String::new();
            let mut r = BufReader::new(s.try_clone().unwrap());
            while r.read_line(&mut line).map(|n| n > 2).unwrap_or(false) {
                line.clear();
            }
            write!(s, "HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\nConnection: close\r\n\r\n").unwrap();
        }
    });
    let tmp = tempfile::tempdir().unwrap();
    let out = bin().args(["fetch", "--base-url", &base, "--dest"]).arg(tmp.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}
