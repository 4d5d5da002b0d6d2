mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;
use std::time::{Duration, Instant};

use common::*;
use grammargate::conformance::{self, Violation};
use grammargate::scorer::{RemoteScorer, Scorer, ScorerEndpoint, ScorerError, Transport};

fn subprocess(mode: &str, timeout_ms: u64) -> RemoteScorer {
    let ep = ScorerEndpoint::new(
        Transport::Subprocess(python_cmd("fake_scorer.py", mode)),
        Duration::from_millis(timeout_ms),
    )
    .unwrap();
    RemoteScorer::new(ep)
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| "x".repeat(i + 1)).collect()
}

fn expected(t: &str) -> f64 {
    (t.len() % 10) as f64 / 10.0
}

/// Serves the line protocol on an ephemeral port. `respond` maps a request
/// to the lines written back; connections are handled one after another.
fn tcp_server(respond: fn(u64, &str) -> Vec<String>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let mut writer = stream.try_clone().unwrap();
            for line in BufReader::new(stream).lines() {
                let Ok(line) = line else { break };
                let v: serde_json::Value = serde_json::from_str(&line).unwrap();
                for out in respond(v["id"].as_u64().unwrap(), v["text"].as_str().unwrap()) {
                    if writer.write_all(format!("{out}\n").as_bytes()).is_err() {
                        return;
                    }
                }
            }
        }
    });
    addr
}

fn tcp(addr: &str) -> RemoteScorer {
    RemoteScorer::new(ScorerEndpoint::parse(addr, Duration::from_secs(5)).unwrap())
}

#[test]
fn subprocess_scores_are_matched_to_inputs() {
    let s = subprocess("ok", 10_000);
    for batch in [texts(5), texts(12), vec![]] {
        let scores = s.score_batch(&batch).unwrap();
        assert_eq!(scores.len(), batch.len());
        for (t, sc) in batch.iter().zip(scores) {
            assert_eq!(sc.value(), expected(t));
        }
    }
}

#[test]
fn out_of_order_responses_are_matched_by_id() {
    let s = subprocess("reverse", 10_000);
    let batch = texts(4);
    let scores: Vec<f64> = s.score_batch(&batch).unwrap().into_iter().map(|s| s.value()).collect();
    assert_eq!(scores, batch.iter().map(|t| expected(t)).collect::<Vec<_>>());
}

#[test]
fn out_of_range_scores_are_clamped_and_counted() {
    let s = subprocess("clamp", 10_000);
    let scores = s.score_batch(&texts(5)).unwrap();
    assert_eq!(scores[2].value(), 1.0);
    assert_eq!(s.clamped_count(), 1);
}

#[test]
fn protocol_violations() {
    for mode in ["noid", "garbage", "dup", "nan"] {
        let r = subprocess(mode, 10_000).score_batch(&texts(6));
        assert!(matches!(r, Err(ScorerError::ProtocolViolation(_))), "{mode}: {r:?}");
    }
}

#[test]
fn hanging_endpoint_times_out() {
    let start = Instant::now();
    let r = subprocess("hang", 300).score_batch(&texts(2));
    assert!(matches!(r, Err(ScorerError::EndpointTimeout)), "{r:?}");
    assert!(start.elapsed() < Duration::from_secs(5));
    let r = subprocess("drop7", 300).score_batch(&texts(10));
    assert!(matches!(r, Err(ScorerError::EndpointTimeout)), "{r:?}");
}

#[test]
fn crashing_endpoint_is_reported() {
    let r = subprocess("crash", 5_000).score_batch(&texts(2));
    assert!(matches!(r, Err(ScorerError::EndpointCrash(_))), "{r:?}");
    let r = subprocess("half", 5_000).score_batch(&texts(8));
    assert!(matches!(r, Err(ScorerError::EndpointCrash(_))), "{r:?}");
}

#[test]
fn missing_program_is_an_error_not_a_panic() {
    let ep = ScorerEndpoint::new(
        Transport::Subprocess(vec!["/nonexistent/scorer-binary".into()]),
        Duration::from_secs(1),
    )
    .unwrap();
    assert!(RemoteScorer::new(ep).score_batch(&texts(1)).is_err());
}

#[test]
fn tcp_transport_round_trip_across_batches() {
    let addr = tcp_server(|id, text| vec![format!(r#"{{"id":{id},"score":{}}}"#, expected(text))]);
    let s = tcp(&addr);
    for n in [3, 7, 1] {
        let batch = texts(n);
        let got: Vec<f64> = s.score_batch(&batch).unwrap().into_iter().map(|s| s.value()).collect();
        assert_eq!(got, batch.iter().map(|t| expected(t)).collect::<Vec<_>>());
    }
}

#[test]
fn tcp_unknown_id_is_a_violation() {
    let addr = tcp_server(|id, _| vec![format!(r#"{{"id":{},"score":0.5}}"#, id + 1000)]);
    assert!(matches!(tcp(&addr).score_batch(&texts(2)), Err(ScorerError::ProtocolViolation(_))));
}

#[test]
fn unreachable_tcp_endpoint_fails() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    drop(listener);
    assert!(tcp(&addr).score_batch(&texts(1)).is_err());
}

fn conformance_of(mode: &str) -> conformance::ConformanceReport {
    let ep = ScorerEndpoint::new(
        Transport::Subprocess(python_cmd("fake_scorer.py", mode)),
        Duration::from_millis(1500),
    )
    .unwrap();
    conformance::check_endpoint(&ep).unwrap()
}

#[test]
fn conformance_passes_for_a_conforming_endpoint() {
    let r = conformance_of("ok");
    assert!(r.passed(), "{r}");
    assert_eq!(r.responses, 10);
    let addr = tcp_server(|id, _| vec![format!(r#"{{"id":{id},"score":0.25}}"#)]);
    let r = conformance::check_endpoint(&ScorerEndpoint::parse(&addr, Duration::from_secs(2)).unwrap()).unwrap();
    assert!(r.passed(), "{r}");
}

#[test]
fn conformance_lists_violations() {
    let r = conformance_of("clamp");
    assert_eq!(r.violations, vec![Violation::ScoreOutOfRange { id: 3, score: 1.7 }]);
    let r = conformance_of("drop7");
    assert!(r.violations.contains(&Violation::MissingId(7)), "{r}");
    let r = conformance_of("dup");
    assert!(r.violations.contains(&Violation::DuplicateId(1)), "{r}");
    let r = conformance_of("noid");
    assert!(r.violations.iter().filter(|v| matches!(v, Violation::Unparseable { .. })).count() == 10);
}
