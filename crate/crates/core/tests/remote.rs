//! Remote expert and embedding clients against a local fixture server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};

use l2dcd::data::{CausalPair, Domain};
use l2dcd::experts::{CachedAnswer, ExpertError, RemoteExpert, RemoteExpertConfig};
use l2dcd::features::{embed_remote_with_key, FeatureError, FeaturizerConfig, FeaturizerKind};
use l2dcd::remote::TransportError;
use l2dcd::Direction;

struct Fixture {
    url: String,
    seen: Arc<Mutex<Vec<(String, Value)>>>,
    handle: JoinHandle<()>,
}

/// Serves the given `(status, body)` responses in order, one per connection.
fn serve(responses: Vec<(u16, String)>) -> Fixture {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/endpoint", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = std::thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            let mut auth = String::new();
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let l = line.trim_end();
                if l.is_empty() {
                    break;
                }
                let lower = l.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if lower.starts_with("authorization:") {
                    auth = l["authorization:".len()..].trim().to_string();
                }
            }
            let mut buf = vec![0u8; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push((auth, serde_json::from_slice(&buf).unwrap()));
            let mut out = stream;
            write!(
                out,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
            out.flush().unwrap();
        }
    });
    Fixture { url, seen, handle }
}

fn chat(content: &str) -> (u16, String) {
    (200, json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string())
}

fn pair(description: &str) -> CausalPair {
    CausalPair {
        id: 7,
        name_u: "altitude".into(),
        name_v: "temperature".into(),
        x_u: vec![0.0, 1.0],
        x_v: vec![1.0, 0.0],
        description: description.into(),
        domain: Domain::ClimateEnvironment,
        truth: Direction::Forward,
        weight: 1.0,
    }
}

fn expert(url: &str, dir: &std::path::Path) -> RemoteExpert {
    let cfg = RemoteExpertConfig {
        endpoint_url: url.into(),
        model_name: "fixture-model".into(),
        seed: 3,
        timeout_s: 10.0,
        cache_dir: dir.to_path_buf(),
    };
    RemoteExpert::with_api_key(cfg, Some("secret".into())).unwrap()
}

#[test]
fn answer_is_parsed_cached_and_replayed_offline() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = serve(vec![chat("Looking at the columns, the answer is 2) y causes x.")]);
    let e = expert(&fx.url, tmp.path());
    let p = e.predict(&pair("altitude and mean temperature")).unwrap();
    assert_eq!(p.direction, Direction::Backward);
    assert_eq!(p.pair_id, 7);
    fx.handle.join().unwrap();

    let seen = fx.seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    let (auth, body) = &seen[0];
    assert_eq!(auth, "Bearer secret");
    assert_eq!(body["model"], "fixture-model");
    assert_eq!(body["seed"], 3);
    assert_eq!(body["messages"][0]["role"], "system");
    assert!(body["messages"][1]["content"].as_str().unwrap().contains("altitude and mean temperature"));

    // the server is gone; a second query must be answered from the cache
    let again = e.predict(&pair("altitude and mean temperature")).unwrap();
    assert_eq!(again.direction, Direction::Backward);
    let cached: CachedAnswer = e.cache().get(&e.request_hash("altitude and mean temperature")).unwrap();
    assert_eq!(cached.direction, Direction::Backward);
    assert_eq!(cached.model, "fixture-model");

    // every file stays inside the cache directory
    for entry in std::fs::read_dir(tmp.path()).unwrap() {
        let path = entry.unwrap().path();
        assert_eq!(path.parent().unwrap(), tmp.path());
        assert_eq!(path.extension().unwrap(), "json");
    }
}

#[test]
fn unparseable_answer_is_retried_once() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = serve(vec![chat("I cannot tell."), chat("1) x causes y")]);
    let e = expert(&fx.url, tmp.path());
    assert_eq!(e.predict(&pair("d")).unwrap().direction, Direction::Forward);
    fx.handle.join().unwrap();
    assert_eq!(fx.seen.lock().unwrap().len(), 2);
}

#[test]
fn two_server_errors_surface_as_transport() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = serve(vec![(500, "{}".into()), (500, "{\"error\":\"boom\"}".into())]);
    let e = expert(&fx.url, tmp.path());
    let err = e.predict(&pair("d")).unwrap_err();
    fx.handle.join().unwrap();
    match err {
        ExpertError::Transport(TransportError::Status { status, body }) => {
            assert_eq!(status, 500);
            assert!(body.contains("boom"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(e.cache().digests().is_empty());
}

#[test]
fn missing_key_fails_before_any_request() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RemoteExpertConfig {
        endpoint_url: "http://127.0.0.1:9/unused".into(),
        model_name: "m".into(),
        seed: 0,
        timeout_s: 1.0,
        cache_dir: tmp.path().to_path_buf(),
    };
    let e = RemoteExpert::with_api_key(cfg, None).unwrap();
    assert!(matches!(e.predict(&pair("d")), Err(ExpertError::AuthMissing)));
}

#[test]
fn embeddings_are_fetched_once() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = serve(vec![(200, json!({"data": [{"embedding": [3.0, 4.0, 12.0]}]}).to_string())]);
    let cfg = FeaturizerConfig {
        kind: FeaturizerKind::RemoteEmbedding,
        dim: 2,
        endpoint: Some(fx.url.clone()),
        model_name: Some("embed".into()),
        cache_dir: Some(tmp.path().to_path_buf()),
        timeout_s: 10.0,
    };
    let v = embed_remote_with_key(&cfg, "some text", Some("k")).unwrap();
    assert_eq!(v, vec![3.0, 4.0, 12.0]);
    fx.handle.join().unwrap();
    assert_eq!(fx.seen.lock().unwrap()[0].1, json!({"model": "embed", "input": "some text"}));
    // served from the cache with no key and no server
    assert_eq!(embed_remote_with_key(&cfg, "some text", None).unwrap(), v);
    assert!(matches!(
        embed_remote_with_key(&cfg, "other text", None),
        Err(FeatureError::AuthMissing)
    ));
}
