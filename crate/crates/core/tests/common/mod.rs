#![allow(dead_code, clippy::needless_range_loop)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::thread::JoinHandle;

use erc_kit::backend::BackendConfig;
use erc_kit::eval::{EvalReport, Prediction};
use erc_kit::pipeline::{DatasetSource, RunConfig, Workspace};

pub const DATASETS: [&str; 3] = ["IEMOCAP", "MELD", "EmoryNLP"];

/// W-F1 of the lexicon backend on the mini fixtures' unified test split
/// (60 utterances), frozen bit-for-bit.
pub const MOCK_RULE_GOLDEN: f64 = 0.8028211928893941;

/// The same quantity from an external lexicon + scikit-learn oracle.
pub const MOCK_RULE_ORACLE: f64 = 0.8028211928893941;

pub fn fixture_dir(set: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(set)
}

pub fn config(set: &str, seed: u64, target: &str) -> RunConfig {
    let dir = fixture_dir(set);
    let datasets = DATASETS
        .iter()
        .map(|d| DatasetSource {
            id: d.to_string(),
            corpus: dir.join(format!("{d}.jsonl")),
            manifest: dir.join(format!("{d}.manifest.json")),
        })
        .collect();
    RunConfig::new(seed, datasets, target)
}

/// ingest -> unify -> build-index -> build-prompts -> infer -> eval
pub fn run_eval_pipeline(ws: &Workspace) -> EvalReport {
    ws.ingest().unwrap();
    ws.unify().unwrap();
    ws.build_index().unwrap();
    ws.build_prompts().unwrap();
    ws.infer().unwrap();
    ws.eval().unwrap()
}

pub fn with_backend(mut config: RunConfig, backend: BackendConfig) -> RunConfig {
    config.backend = backend;
    config
}

/// Weighted F1 from an explicit confusion matrix. Unparseable predictions
/// land in an extra column that belongs to no class.
pub fn oracle_weighted_f1(gold: &[&str], pred: &[Option<&str>], labels: &[&str]) -> f64 {
    let k = labels.len();
    let pos = |l: &str| labels.iter().position(|x| *x == l).unwrap();
    let mut m = vec![vec![0u64; k + 1]; k];
    for (g, p) in gold.iter().zip(pred) {
        let col = p.map_or(k, pos);
        m[pos(g)][col] += 1;
    }
    let n: u64 = m.iter().flatten().sum();
    let mut total = 0.0;
    for c in 0..k {
        let tp = m[c][c] as f64;
        let support: u64 = m[c].iter().sum();
        let predicted: u64 = (0..k).map(|r| m[r][c]).sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if support == 0 { 0.0 } else { tp / support as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        total += support as f64 * f1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

pub fn to_predictions(pred: &[Option<&str>]) -> Vec<Prediction> {
    pred.iter().map(|p| p.map_or(Prediction::Unparseable, |l| Prediction::Label(l.to_string()))).collect()
}

pub fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Every file under `dir`, relative path and contents, sorted by path.
pub fn snapshot_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// A one-thread HTTP server answering JSON POSTs. `handler` maps each
/// request body to `(status, body)`. Stops after `requests` connections.
pub fn serve_json(
    requests: usize,
    handler: impl Fn(usize, serde_json::Value) -> (u16, String) + Send + 'static,
) -> (String, JoinHandle<Vec<serde_json::Value>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for i in 0..requests {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let request: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let (status, reply) = handler(i, request.clone());
            seen.push(request);
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
        seen
    });
    (url, handle)
}
