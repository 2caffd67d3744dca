mod common;

use std::time::Duration;

use erc_kit::backend::{generate_all, BackendConfig};
use erc_kit::embed::{Embedder, EmbedderConfig, HttpEmbedder};
use erc_kit::eval::{evaluate_run, RunOptions};
use erc_kit::prompt::{PromptSample, SampleMeta, Task};
use erc_kit::Error;

use common::*;

fn sample(index: usize, gold: &str) -> PromptSample {
    PromptSample {
        task: Task::Main,
        input_text: format!("prompt {index}"),
        target_text: gold.into(),
        loss_weight: 1.0,
        meta: SampleMeta {
            dataset: "D".into(),
            conv_id: "c".into(),
            index,
            gold: gold.into(),
            utterance: String::new(),
        },
    }
}

fn reply(text: &str) -> (u16, String) {
    (200, serde_json::json!({ "text": text }).to_string())
}

#[test]
fn completion_request_is_greedy() {
    let (url, server) = serve_json(1, |_, _| reply(" Sad.\n"));
    let backend = BackendConfig::http(url).build().unwrap();
    assert_eq!(backend.generate(&sample(0, "sad")).unwrap(), " Sad.\n");
    let seen = server.join().unwrap();
    assert_eq!(seen[0]["prompt"], "prompt 0");
    assert_eq!(seen[0]["temperature"], 0.0);
    assert_eq!(seen[0]["max_new_tokens"], 16);
}

#[test]
fn nonzero_temperature_is_rejected() {
    let mut config = BackendConfig::http("http://127.0.0.1:9/");
    config.decoding.temperature = 0.7;
    assert!(matches!(config.build(), Err(Error::Config(_))));
}

#[test]
fn server_errors_are_retried() {
    let (url, server) = serve_json(2, |i, _| if i == 0 { (500, "{}".into()) } else { reply("mad") });
    let backend = BackendConfig::http(url).build().unwrap();
    let out = generate_all(backend.as_ref(), &[sample(0, "mad")], 1, 1);
    assert_eq!(out[0].as_ref().unwrap(), "mad");
    assert_eq!(server.join().unwrap().len(), 2);
}

#[test]
fn aborted_run_resumes_from_checkpoint() {
    let labels = strings(&["sad", "mad"]);
    let samples = [sample(0, "sad"), sample(1, "mad"), sample(2, "sad")];
    let dir = tempfile::tempdir().unwrap();
    let checkpoint = dir.path().join("checkpoint.jsonl");
    let options = RunOptions { concurrency: 1, retries: 0, checkpoint: Some(&checkpoint) };

    let (url, server) = serve_json(3, |i, _| if i == 2 { (503, "{}".into()) } else { reply(["sad", "mad"][i]) });
    let backend = BackendConfig::http(url).build().unwrap();
    match evaluate_run(&samples, backend.as_ref(), &labels, &options) {
        Err(Error::Aborted { completed, total, .. }) => assert_eq!((completed, total), (2, 3)),
        other => panic!("expected abort, got {other:?}"),
    }
    server.join().unwrap();

    let (url, server) = serve_json(1, |_, _| reply("sad"));
    let backend = BackendConfig::http(url).build().unwrap();
    let outcome = evaluate_run(&samples, backend.as_ref(), &labels, &options).unwrap();
    let seen = server.join().unwrap();
    assert_eq!(seen.len(), 1, "only the missing sample is requested again");
    assert_eq!(seen[0]["prompt"], "prompt 2");
    assert_eq!(outcome.report.weighted_f1, 1.0);
}

#[test]
fn unreachable_backend_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    drop(listener);
    let backend = BackendConfig::http(url).build().unwrap();
    let err = backend.generate(&sample(4, "sad")).unwrap_err();
    assert!(err.to_string().contains("D/c#4"), "{err}");
}

#[test]
fn embedding_service_vectors_are_normalized() {
    let (url, server) = serve_json(2, |i, _| {
        let v = if i == 0 { vec![3.0, 4.0, 0.0, 0.0] } else { vec![1.0, 2.0] };
        (200, serde_json::json!({ "embedding": v }).to_string())
    });
    let e = HttpEmbedder::new(url, 4, Duration::from_secs(5));
    assert_eq!(e.embed("k", "hello there").unwrap(), [0.6, 0.8, 0.0, 0.0]);
    assert!(matches!(e.embed("k", "short"), Err(Error::DimensionMismatch { expected: 4, actual: 2 })));
    let seen = server.join().unwrap();
    assert_eq!(seen[0]["text"], "hello there");
}

#[test]
fn embedder_config_builds_each_kind() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("vecs.txt"), "2 toy\nD/c#0 1 0\n").unwrap();
    let kinds = [
        r#"{"kind": "hashed_ngram"}"#,
        r#"{"kind": "vector_file", "path": "vecs.txt"}"#,
        r#"{"kind": "http", "endpoint": "http://127.0.0.1:9/", "dim": 8}"#,
    ];
    let dims: Vec<usize> = kinds
        .iter()
        .map(|k| serde_json::from_str::<EmbedderConfig>(k).unwrap().build(dir.path()).unwrap().dim())
        .collect();
    assert_eq!(dims, [256, 2, 8]);
}
