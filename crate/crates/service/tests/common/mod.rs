#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

pub const LABELS: [&str; 3] = ["PER", "LOC", "ORG"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tag(r: &mut impl Rng) -> String {
    let label = LABELS[r.random_range(0..LABELS.len())];
    match r.random_range(0..5) {
        0 | 1 => "O".to_string(),
        2 | 3 => format!("B-{label}"),
        _ => format!("I-{label}"),
    }
}

pub fn random_tags(r: &mut impl Rng, len: usize) -> Vec<String> {
    (0..len).map(|_| random_tag(r)).collect()
}

/// CoNLL text with token, gold and optional prediction columns.
pub fn conll(gold: &[Vec<String>], pred: Option<&[Vec<String>]>) -> String {
    let mut out = String::new();
    for (i, sentence) in gold.iter().enumerate() {
        for (j, tag) in sentence.iter().enumerate() {
            out.push_str(&format!("w{}_{} {tag}", i % 17, j));
            if let Some(p) = pred {
                out.push(' ');
                out.push_str(&p[i][j]);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Random gold sentences and noisy system copies as CoNLL texts.
pub fn random_ner_files(seed: u64, sentences: usize, max_len: usize, systems: usize) -> (String, Vec<String>) {
    let mut r = rng(seed);
    let gold: Vec<Vec<String>> = (0..sentences)
        .map(|_| {
            let len = r.random_range(1..=max_len);
            random_tags(&mut r, len)
        })
        .collect();
    let outputs = (0..systems)
        .map(|_| {
            let p = r.random_range(0.05..0.5);
            let pred: Vec<Vec<String>> = gold
                .iter()
                .map(|s| s.iter().map(|t| if r.random_bool(p) { random_tag(&mut r) } else { t.clone() }).collect())
                .collect();
            conll(&gold, Some(&pred))
        })
        .collect();
    (conll(&gold, None), outputs)
}

/// Random classification TSV (gold only) and system files with confidences.
pub fn random_cls_files(seed: u64, n: usize, systems: usize) -> (String, Vec<String>) {
    let mut r = rng(seed);
    let labels = ["pos", "neg", "neu"];
    let rows: Vec<(String, &str)> = (0..n)
        .map(|i| {
            let words = r.random_range(1..40);
            let text = (0..words).map(|w| format!("t{}", (i + w) % 50)).collect::<Vec<_>>().join(" ");
            (text, labels[r.random_range(0..3)])
        })
        .collect();
    let gold: String = rows.iter().map(|(t, g)| format!("{t}\t{g}\n")).collect();
    let outputs = (0..systems)
        .map(|_| {
            let acc = r.random_range(0.4..0.95);
            rows.iter()
                .map(|(t, g)| {
                    let p = if r.random_bool(acc) { g } else { labels[r.random_range(0..3)] };
                    let c = (r.random_range(0.0..1.0f64) * 1e4).round() / 1e4;
                    format!("{t}\t{g}\t{p}\t{c}\n")
                })
                .collect()
        })
        .collect();
    (gold, outputs)
}

pub type SpanKey = (usize, usize, usize, String);

/// Synthetic CoNLL-style data with three systems built so that:
/// system A is best overall but misses every entity of length >= 4 and half
/// of the PER entities; B recovers all PER entities; all three miss exactly
/// the entities in `common`; every other entity is missed by at most one
/// system.
pub struct ScenarioFixture {
    pub gold: PathBuf,
    pub systems: [PathBuf; 3],
    pub common: BTreeSet<SpanKey>,
}

pub fn scenario(dir: &Path, seed: u64, sentences: usize) -> ScenarioFixture {
    let mut r = rng(seed);
    let labels = ["PER", "LOC", "ORG", "MISC"];
    let mut gold = Vec::new();
    let mut preds: [Vec<Vec<String>>; 3] = Default::default();
    let mut common = BTreeSet::new();
    let mut entity = 0usize;
    for s in 0..sentences {
        let mut tags = vec!["O".to_string()];
        let mut miss: [Vec<bool>; 3] = [vec![false], vec![false], vec![false]];
        for _ in 0..r.random_range(1..=3) {
            let len = match r.random_range(0..100) {
                0..=44 => 1,
                45..=69 => 2,
                70..=89 => 3,
                _ => r.random_range(4..=5),
            };
            let label = labels[r.random_range(0..labels.len())];
            let start = tags.len();
            // Exactly one owner (or none) per entity, except the shared misses.
            let owner: Option<usize> = if len < 4 && entity.is_multiple_of(10) {
                common.insert((s, start, start + len - 1, label.to_string()));
                None
            } else if len >= 4 {
                Some(0)
            } else {
                match label {
                    "PER" if r.random_bool(0.5) => Some(0),
                    "ORG" if r.random_bool(0.9) => Some(1),
                    "LOC" if r.random_bool(0.6) => Some(1),
                    "LOC" | "MISC" if r.random_bool(0.6) => Some(2),
                    _ => None,
                }
            };
            let shared = owner.is_none() && common.contains(&(s, start, start + len - 1, label.to_string()));
            for k in 0..len {
                tags.push(if k == 0 { format!("B-{label}") } else { format!("I-{label}") });
                for (m, flags) in miss.iter_mut().enumerate() {
                    flags.push(shared || owner == Some(m));
                }
            }
            tags.push("O".to_string());
            for flags in miss.iter_mut() {
                flags.push(false);
            }
            entity += 1;
        }
        for (m, flags) in miss.iter().enumerate() {
            preds[m].push(tags.iter().zip(flags).map(|(t, &x)| if x { "O".to_string() } else { t.clone() }).collect());
        }
        gold.push(tags);
    }
    let gold_path = dir.join("test.conll");
    std::fs::write(&gold_path, conll(&gold, None)).unwrap();
    let systems = ["sysA", "sysB", "sysC"].map(|name| dir.join(format!("{name}.conll")));
    for (m, path) in systems.iter().enumerate() {
        std::fs::write(path, conll(&gold, Some(&preds[m]))).unwrap();
    }
    ScenarioFixture {
        gold: gold_path,
        systems,
        common,
    }
}

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn fineval(args: &[&str], envs: &[(&str, &str)]) -> CliOutput {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fineval"));
    cmd.args(args).env_remove("FINEVAL_ROOT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("run fineval");
    CliOutput {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("bad JSON ({e}): {s}"))
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<(String, Vec<u8>)>) -> (StatusCode, Vec<u8>) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some((content_type, bytes)) => builder.header("content-type", content_type).body(Body::from(bytes)),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, bytes.to_vec())
}

pub async fn get_json(app: &Router, uri: &str) -> (StatusCode, serde_json::Value) {
    let (status, body) = call(app, "GET", uri, None).await;
    (status, serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null))
}

/// multipart/form-data body from (name, filename, bytes) parts.
pub fn multipart(parts: &[(&str, Option<&str>, &[u8])]) -> (String, Vec<u8>) {
    let boundary = "----fineval-test-boundary";
    let mut body = Vec::new();
    for (name, filename, bytes) in parts {
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        match filename {
            Some(f) => body.extend_from_slice(
                format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{f}\"\r\n\r\n").as_bytes(),
            ),
            None => body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes()),
        }
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={boundary}"), body)
}

/// Submits `bytes` as a system for `dataset` and returns its id.
pub async fn submit(app: &Router, dataset: &str, name: &str, bytes: &[u8]) -> (StatusCode, serde_json::Value) {
    let meta = serde_json::json!({ "datasetId": dataset, "name": name }).to_string();
    let (status, body) = call(
        app,
        "POST",
        "/api/v1/systems",
        Some(multipart(&[("meta", None, meta.as_bytes()), ("file", Some("out.txt"), bytes)])),
    )
    .await;
    (status, serde_json::from_slice(&body).unwrap())
}
