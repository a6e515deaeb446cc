use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use belief_client::api::ErrorKind;
use belief_client::{ClientError, EngineClient, RemoteOracle, RemoteOracleConfig};
use belief_core::construction::{BeliefOracle, OracleError};

#[derive(Clone)]
struct Reply {
    status: u16,
    body: &'static str,
    delay: Duration,
}

fn ok(body: &'static str) -> Reply {
    Reply { status: 200, body, delay: Duration::ZERO }
}

fn status(status: u16, body: &'static str) -> Reply {
    Reply { status, body, delay: Duration::ZERO }
}

/// Answers each request with the next scripted reply; the last one repeats.
struct Stub {
    url: String,
    hits: Arc<AtomicUsize>,
    paths: Arc<Mutex<Vec<String>>>,
}

fn stub(script: Vec<Reply>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let paths = Arc::new(Mutex::new(Vec::new()));
    let (h, p) = (hits.clone(), paths.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
            let n = h.fetch_add(1, Ordering::SeqCst);
            let reply = script[n.min(script.len() - 1)].clone();
            let p = p.clone();
            thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                p.lock().unwrap().push(line.split_whitespace().nth(1).unwrap_or("").to_string());
                let mut length = 0;
                loop {
                    let mut header = String::new();
                    reader.read_line(&mut header).unwrap();
                    if header.trim().is_empty() {
                        break;
                    }
                    if let Some(v) = header.to_ascii_lowercase().strip_prefix("content-length:") {
                        length = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                thread::sleep(reply.delay);
                let response = format!(
                    "HTTP/1.1 {} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                    reply.status,
                    reply.body.len(),
                    reply.body
                );
                let _ = stream.write_all(response.as_bytes());
            });
        }
    });
    Stub { url, hits, paths }
}

fn quick(cache: Option<&std::path::Path>) -> RemoteOracleConfig {
    RemoteOracleConfig {
        timeout: Duration::from_millis(300),
        attempts: 3,
        backoff: Duration::from_millis(10),
        cache_dir: cache.map(|p| p.to_path_buf()),
    }
}

#[test]
fn score_is_fetched_once_then_served_from_cache() {
    let s = stub(vec![ok(r#"{"score": 0.98}"#)]);
    let o = RemoteOracle::new(&s.url, quick(None)).unwrap();
    assert_eq!(o.score_statement("Mammals give live birth").unwrap(), 0.98);
    assert_eq!(o.score_statement("mammals give  live birth.").unwrap(), 0.98);
    assert_eq!(o.network_calls(), 1);
    assert_eq!(s.hits.load(Ordering::SeqCst), 1);
    assert_eq!(s.paths.lock().unwrap()[0], "/v1/oracle/score_statement");
    assert_eq!(o.identity(), format!("remote:{}", s.url));
}

#[test]
fn malformed_response_is_a_decode_error_without_retry() {
    let s = stub(vec![ok(r#"{"probability": 0.9}"#)]);
    let o = RemoteOracle::new(&s.url, quick(None)).unwrap();
    assert!(matches!(o.score_statement("x"), Err(OracleError::Decode(_))));
    assert_eq!(o.network_calls(), 1);
}

#[test]
fn out_of_range_score_is_rejected() {
    let s = stub(vec![ok(r#"{"score": 1.5}"#)]);
    let o = RemoteOracle::new(&s.url, quick(None)).unwrap();
    assert!(matches!(o.score_statement("x"), Err(OracleError::Invalid(_))));
}

#[test]
fn server_errors_are_retried_three_times() {
    let s = stub(vec![status(503, "busy"), status(500, "oops"), ok(r#"{"negation": "It is cold"}"#)]);
    let o = RemoteOracle::new(&s.url, quick(None)).unwrap();
    assert_eq!(o.negate("It is warm").unwrap(), "It is cold");
    assert_eq!(o.network_calls(), 3);

    let s = stub(vec![status(503, "busy")]);
    let o = RemoteOracle::new(&s.url, quick(None)).unwrap();
    assert!(matches!(o.negate("It is warm"), Err(OracleError::Transport(_))));
    assert_eq!(o.network_calls(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let s = stub(vec![status(400, "bad")]);
    let o = RemoteOracle::new(&s.url, quick(None)).unwrap();
    assert!(matches!(o.generate_premises("h"), Err(OracleError::Transport(_))));
    assert_eq!(o.network_calls(), 1);
}

#[test]
fn timeouts_are_typed_and_keep_the_partial_cache() {
    let dir = tempfile::tempdir().unwrap();
    let slow = Reply { status: 200, body: r#"{"score": 0.5}"#, delay: Duration::from_millis(1500) };
    let s = stub(vec![ok(r#"{"premises": ["a", "b"]}"#), ok(r#"{"score": 0.7}"#), slow]);
    let o = RemoteOracle::new(&s.url, quick(Some(dir.path()))).unwrap();
    assert_eq!(o.generate_premises("h").unwrap(), vec!["a", "b"]);
    assert_eq!(o.score_entailment(&["b".into(), "a".into()], "h").unwrap(), 0.7);
    assert!(matches!(o.score_statement("h"), Err(OracleError::Timeout(_))));
    assert_eq!(o.network_calls(), 5);
    drop(o);

    let again = RemoteOracle::new(&s.url, quick(Some(dir.path()))).unwrap();
    assert_eq!(again.cached_entries(), 2);
    assert_eq!(again.generate_premises("H.").unwrap(), vec!["a", "b"]);
    assert_eq!(again.score_entailment(&["a".into(), "b".into()], "h").unwrap(), 0.7);
    assert_eq!(again.network_calls(), 0);
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let o = RemoteOracle::new(&format!("http://127.0.0.1:{port}"), quick(None)).unwrap();
    assert!(matches!(o.score_statement("x"), Err(OracleError::Transport(_))));
    assert_eq!(o.network_calls(), 3);
}

#[test]
fn engine_errors_keep_their_kind() {
    let s = stub(vec![status(422, r#"{"error": {"kind": "infeasible", "message": "no"}}"#)]);
    let c = EngineClient::new(format!("{}/", s.url)).unwrap();
    assert_eq!(c.base_url(), s.url);
    match c.health() {
        Err(ClientError::Api { status: 422, kind: ErrorKind::Infeasible, message }) => assert_eq!(message, "no"),
        other => panic!("{other:?}"),
    }
    let s = stub(vec![ok("not json")]);
    let c = EngineClient::new(s.url.clone()).unwrap();
    assert!(matches!(c.health(), Err(ClientError::Decode(_))));
}
