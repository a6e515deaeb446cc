use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use belief_core::construction::MockFixture;
use belief_core::document::{GraphDocument, OutcomeDocument};
use belief_core::metrics::DatasetReport;
use belief_core::reasoner::resolve_interactive;
use belief_core::{Label, ReasonOptions, StatementId};
use belief_server::{AppState, BackgroundServer};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn belief(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_belief"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = belief(args, "");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn mock() -> String {
    format!("mock:{}", fixture("mock_oracle.json").display())
}

#[test]
fn build_counts_follow_depth() {
    for (d, statements, rules) in [("0", 2, 2), ("1", 8, 6), ("2", 14, 11)] {
        let text = ok(&["--oracle", &mock(), "--d-max", d, "build", path(&fixture("plant_question.json"))]);
        let doc = GraphDocument::from_json(&text).unwrap();
        assert_eq!((doc.statements.len(), doc.rules.len()), (statements, rules), "d_max {d}");
        assert_eq!(doc.provenance.config.unwrap().calibration.d_max, d.parse::<u32>().unwrap());
    }
    let text = ok(&["--oracle", &mock(), "--d-max", "1", "build", "--hypothesis", "A plant needs sunlight to grow", "--hypothesis", "A plant needs darkness to grow"]);
    assert_eq!(GraphDocument::from_json(&text).unwrap().statements.len(), 8);
}

#[test]
fn overrides_change_the_digest() {
    let q = fixture("plant_question.json");
    let a = GraphDocument::from_json(&ok(&["--oracle", &mock(), "build", path(&q)])).unwrap();
    let b = GraphDocument::from_json(&ok(&["--oracle", &mock(), "--workers", "3", "build", path(&q)])).unwrap();
    assert_ne!(a.provenance.config_digest, b.provenance.config_digest);
    assert_eq!(b.provenance.config.unwrap().workers, 3);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"workers": 3}"#).unwrap();
    let c = GraphDocument::from_json(&ok(&["--oracle", &mock(), "--config", path(&cfg), "build", path(&q)])).unwrap();
    assert_eq!(c.provenance.config_digest, b.provenance.config_digest);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let q = fixture("plant_question.json");
    let run = |tag: &str| {
        let graph = dir.path().join(format!("graph-{tag}.json"));
        let outcome = dir.path().join(format!("outcome-{tag}.json"));
        let dot = dir.path().join(format!("dot-{tag}.dot"));
        ok(&["--oracle", &mock(), "--d-max", "2", "build", path(&q), "-o", path(&graph)]);
        let summary = ok(&["--export-dot", path(&dot), "reason", path(&graph), "-o", path(&outcome)]);
        let read = |p: &Path| std::fs::read(p).unwrap();
        (read(&graph), read(&outcome), read(&dot), summary)
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn reason_summaries() {
    let summary = ok(&["reason", path(&fixture("live_birth.json"))]);
    assert!(summary.starts_with("answer: 0 (s1) A giraffe gives live birth\n1 flips, 0 rules discarded\n"), "{summary}");

    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture("live_birth.json")).unwrap()).unwrap();
    doc["statements"][1]["label"] = false.into();
    doc["statements"][1]["raw_score"] = 0.2.into();
    let consistent = dir.path().join("consistent.json");
    std::fs::write(&consistent, doc.to_string()).unwrap();
    assert!(ok(&["reason", path(&consistent)]).contains("0 flips, 0 rules discarded"));

    let ablated = ok(&["--ablate", "xor", "reason", path(&fixture("conductor.json")), "--json"]);
    let out = OutcomeDocument::from_json(&ablated).unwrap();
    assert_eq!(out.summary.tau_after_full_graph, 0.25);
    assert_eq!(out.summary.tau_after, 0.0);
    assert!(ok(&["--ablate", "mc", "reason", path(&fixture("conductor.json"))]).contains("ablated: mc"));
}

#[test]
fn scripted_resolution_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("resolved.json");
    let g = fixture("graduated_cylinder.json");
    let out = belief(&["resolve", path(&g), "-o", path(&out_path)], "y\n");
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Is this true? A graduated cylinder is used to measure liquids [y/n] yes"));
    assert!(stdout.contains("1 questions asked, 0 conflicts remaining"));
    let doc = OutcomeDocument::from_json(&std::fs::read_to_string(&out_path).unwrap()).unwrap();

    let graph = GraphDocument::from_json(&std::fs::read_to_string(&g).unwrap()).unwrap().to_graph().unwrap();
    let mut yes = |_: &belief_core::StatementNode| Some(Label::True);
    let lib = resolve_interactive(&graph, &mut yes, ReasonOptions::default(), 5).unwrap();
    assert_eq!(doc.assignment, lib.outcome.final_assignment);
    assert!(doc.discarded_rules.is_empty());
    assert_eq!(doc.resolution.as_ref().unwrap().queries[0].statement, StatementId(5));

    // Unparseable lines are asked again.
    let again = belief(&["resolve", path(&g)], "maybe\nyes\n");
    assert!(String::from_utf8(again.stdout).unwrap().contains("please answer y or n"));
}

#[test]
fn resolution_edge_cases() {
    let g = fixture("graduated_cylinder.json");
    let out = belief(&["--budget", "0", "resolve", path(&g)], "");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(!stdout.contains("Is this true?"));
    assert!(stdout.contains("query budget exhausted with conflicts remaining"));

    let out = belief(&["resolve", path(&g)], "");
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stderr).unwrap().contains("no more answers"));
    assert!(String::from_utf8(out.stdout).unwrap().contains("0 flips, 1 rules discarded"));

    let out = belief(&["resolve", path(&fixture("renewable.json"))], "");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("0 questions asked, 0 conflicts remaining") && !stdout.contains("Is this true?"));
}

#[test]
fn exports() {
    let dot = ok(&["export-dot", path(&fixture("live_birth.json"))]);
    assert_eq!(dot.matches("shape=ellipse").count(), 7);
    assert_eq!(dot.matches("fillcolor=white").count(), 7);

    let dir = tempfile::tempdir().unwrap();
    let outcome = dir.path().join("outcome.json");
    ok(&["reason", path(&fixture("seasons.json")), "-o", path(&outcome)]);
    let dot = ok(&["export-dot", path(&outcome)]);
    assert_eq!(dot.matches("style=dashed").count(), 1);

    let wcnf = ok(&["export-wcnf", path(&fixture("live_birth.json"))]);
    assert!(wcnf.starts_with("c weighted CNF export\n"));
    assert!(wcnf.contains("c var 1 = s1 T\n"));
}

#[test]
fn tau_command_prints_the_report() {
    let report: serde_json::Value = serde_json::from_str(&ok(&["tau", path(&fixture("live_birth.json"))])).unwrap();
    assert_eq!(report["applicable_rules"], 6);
    assert_eq!(report["violated_rules"], 2);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"schema_version\": 1,\n  \"hypotheses\": [0]\n  \"statements\": []\n}\n").unwrap();
    let out = belief(&["reason", path(&bad)], "");
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 4 column 3"), "{err}");

    assert_eq!(code(&belief(&["reason", "/nonexistent/graph.json"], "")), 2);
    assert_eq!(code(&belief(&["--oracle", "file:x", "build", "--hypothesis", "a"], "")), 2);
    assert_eq!(code(&belief(&["build", "--hypothesis", "a"], "")), 2);
    assert_eq!(code(&belief(&["--ablate", "rules", "reason", path(&fixture("live_birth.json"))], "")), 2);
    assert_eq!(code(&belief(&["frobnicate"], "")), 2);
}

#[test]
fn infeasible_answers_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    let doc = serde_json::json!({
        "schema_version": 1,
        "hypotheses": [1, 2],
        "statements": [
            {"id": 1, "text": "a", "raw_score": 0.999, "label": true, "confidence": 0.99, "depth": 0, "is_hypothesis": true, "negation_of": null},
            {"id": 2, "text": "b", "raw_score": 0.999, "label": true, "confidence": 0.99, "depth": 0, "is_hypothesis": true, "negation_of": null},
            {"id": 3, "text": "c", "raw_score": 0.001, "label": false, "confidence": 0.99, "depth": 1, "is_hypothesis": false, "negation_of": null}
        ],
        "rules": [
            {"id": 0, "type": "entailment", "premises": [2], "hypotheses": [3], "raw_score": 0.9, "confidence": 0.3, "hard": false},
            {"id": 1, "type": "mc_hard", "premises": [], "hypotheses": [1, 2], "raw_score": 1.0, "confidence": null, "hard": true},
            {"id": 2, "type": "mc_pairwise", "premises": [1, 2], "hypotheses": [], "raw_score": 1.0, "confidence": 0.3, "hard": false}
        ]
    });
    std::fs::write(&g, doc.to_string()).unwrap();
    assert_eq!(code(&belief(&["resolve", path(&g)], "n\nn\n")), 4);
}

/// Oracle that answers `served` requests and then stops responding.
fn stalling_oracle(served: usize) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let h = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
            let n = h.fetch_add(1, Ordering::SeqCst);
            std::thread::spawn(move || {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
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
                if n >= served {
                    std::thread::sleep(Duration::from_secs(3));
                    return;
                }
                let reply = if line.contains("score_statement") { r#"{"score": 0.9}"# } else { r#"{"premises": []}"# };
                let response = format!(
                    "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                    reply.len()
                );
                let _ = stream.write_all(response.as_bytes());
            });
        }
    });
    (url, hits)
}

#[test]
fn oracle_timeout_exits_3_and_keeps_the_cache() {
    let (url, _hits) = stalling_oracle(3);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"oracle_timeout_ms": 200}"#).unwrap();
    let cache = dir.path().join("cache");
    let out = belief(
        &["--config", path(&cfg), "--oracle", &format!("remote:{url}"), "--oracle-cache", path(&cache), "build", "--hypothesis", "a", "--hypothesis", "b"],
        "",
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stderr).unwrap().contains("timed out"));
    let files: Vec<_> = std::fs::read_dir(&cache).unwrap().collect();
    assert_eq!(files.len(), 1);
    let text = std::fs::read_to_string(files[0].as_ref().unwrap().path()).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn remote_oracle_and_external_engine_match_the_local_run() {
    let f: MockFixture = serde_json::from_str(&std::fs::read_to_string(fixture("mock_oracle.json")).unwrap()).unwrap();
    let server = BackgroundServer::start("127.0.0.1:0", AppState::with_fixture(Some(&f)).unwrap()).unwrap();
    let q = fixture("plant_question.json");
    let local = GraphDocument::from_json(&ok(&["--oracle", &mock(), "--d-max", "2", "build", path(&q)])).unwrap();
    let external = ok(&["--server", &server.url(), "--oracle", &mock(), "--d-max", "2", "build", path(&q)]);
    assert_eq!(GraphDocument::from_json(&external).unwrap(), local);

    let dir = tempfile::tempdir().unwrap();
    let remote = ok(&[
        "--oracle",
        &format!("remote:{}", server.url()),
        "--oracle-cache",
        path(dir.path()),
        "--d-max",
        "2",
        "build",
        path(&q),
    ]);
    let remote = GraphDocument::from_json(&remote).unwrap();
    assert_eq!(remote.statements, local.statements);
    assert_eq!(remote.rules, local.rules);
}

#[test]
fn evaluate_graphs_and_questions() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let graphs = ["live_birth", "plant_food", "renewable", "seasons"].map(|n| fixture(&format!("{n}.json")));
    let mut args = vec!["--workers", "2", "evaluate", "-o", path(&report_path)];
    args.extend(graphs.iter().map(|p| path(p)));
    ok(&args);
    let report: DatasetReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.questions.len(), 4);
    assert_eq!(report.mean_accuracy_after, Some(1.0));

    let questions = dir.path().join("questions.jsonl");
    let q = std::fs::read_to_string(fixture("plant_question.json")).unwrap();
    let line = serde_json::to_string(&serde_json::from_str::<serde_json::Value>(&q).unwrap()).unwrap();
    std::fs::write(&questions, format!("{line}\n\n{line}\n")).unwrap();
    let text = ok(&["--oracle", &mock(), "--d-max", "2", "evaluate", "--questions", path(&questions)]);
    let report: DatasetReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.questions.len(), 2);
    assert_eq!(report.questions[0].statements, 14);
}

#[test]
fn synth_is_seeded() {
    let a = ok(&["--seed", "5", "synth"]);
    assert_eq!(a, ok(&["--seed", "5", "synth"]));
    assert_ne!(a, ok(&["--seed", "6", "synth"]));
    let doc = GraphDocument::from_json(&a).unwrap();
    assert!(doc.statements.len() <= 400 && doc.rules.len() <= 90);
}
