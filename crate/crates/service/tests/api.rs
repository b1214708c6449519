mod common;

use std::sync::Arc;

use axum::http::StatusCode;
use axum::Router;
use common::*;
use fineval::api::router;
use fineval::registry::Registry;
use serde_json::Value;

struct Fixture {
    _dir: tempfile::TempDir,
    app: Router,
    root: std::path::PathBuf,
    systems: Vec<String>,
}

async fn ner_fixture(systems: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("registry");
    let app = router(Arc::new(Registry::open(&root).unwrap()), None);
    let (gold, outputs) = random_ner_files(11, 60, 10, systems);
    let (status, body) = call(
        &app,
        "POST",
        "/api/v1/datasets",
        Some(multipart(&[("id", None, b"toy"), ("task", None, b"ner"), ("file", Some("toy.conll"), gold.as_bytes())])),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&body));
    let mut ids = Vec::new();
    for (k, out) in outputs.iter().enumerate() {
        let (status, body) = submit(&app, "toy", &format!("sys{k}"), out.as_bytes()).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        ids.push(body["id"].as_str().unwrap().to_string());
    }
    Fixture {
        _dir: dir,
        app,
        root,
        systems: ids,
    }
}

fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap_or_default()
}

#[tokio::test]
async fn tasks_lists_every_task_kind() {
    let fx = ner_fixture(0).await;
    let (status, v) = get_json(&fx.app, "/api/v1/tasks").await;
    assert_eq!(status, StatusCode::OK);
    let kinds: Vec<&str> = v.as_array().unwrap().iter().map(|t| t["taskKind"].as_str().unwrap()).collect();
    assert_eq!(kinds.len(), 3);
    assert!(kinds.contains(&"sequence_labeling"));
}

#[tokio::test]
async fn datasets_and_systems_are_listed() {
    let fx = ner_fixture(2).await;
    let (_, datasets) = get_json(&fx.app, "/api/v1/datasets?task=ner").await;
    assert_eq!(datasets.as_array().unwrap().len(), 1);
    let (_, none) = get_json(&fx.app, "/api/v1/datasets?task=classification").await;
    assert!(none.as_array().unwrap().is_empty());

    let (_, systems) = get_json(&fx.app, "/api/v1/systems?dataset=toy").await;
    let values: Vec<f64> = systems
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["overallValue"].as_f64().unwrap())
        .collect();
    assert_eq!(values.len(), 2);
    assert!(values[0] >= values[1], "leaderboard order {values:?}");

    let (status, one) = get_json(&fx.app, &format!("/api/v1/systems/{}", fx.systems[0])).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(one["datasetId"], "toy");
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let fx = ner_fixture(1).await;
    let (status, v) = get_json(&fx.app, "/api/v1/systems/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&v), "UnknownSystem");
    let (status, v) = get_json(&fx.app, "/api/v1/datasets/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&v), "UnknownDataset");
    let (status, v) = get_json(&fx.app, "/api/v1/analysis/single/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&v), "UnknownSystem");
    let (status, _) = get_json(&fx.app, "/api/v1/no/such/route").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn duplicate_submission_returns_existing_id() {
    let fx = ner_fixture(1).await;
    let (_, outputs) = random_ner_files(11, 60, 10, 1);
    let (status, body) = submit(&fx.app, "toy", "again", outputs[0].as_bytes()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["duplicate"], true);
    assert_eq!(body["id"], fx.systems[0].as_str());
}

#[tokio::test]
async fn malformed_submission_is_rejected_with_line() {
    let fx = ner_fixture(0).await;
    let (status, body) = submit(&fx.app, "toy", "bad", b"w0 B-PER\n").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&body), "ValidationFailed");
    assert!(body["error"]["cause"].is_string());

    let (status, body) = submit(&fx.app, "missing", "x", b"w0 O O\n").await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{body}");
}

#[tokio::test]
async fn single_is_byte_identical_on_repeat() {
    let fx = ner_fixture(1).await;
    let uri = format!("/api/v1/analysis/single/{}?b=100&seed=3", fx.systems[0]);
    let (s1, first) = call(&fx.app, "GET", &uri, None).await;
    let (s2, second) = call(&fx.app, "GET", &uri, None).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(first, second);

    // A fresh registry over the same root serves the same bytes.
    let reopened = router(Arc::new(Registry::open(&fx.root).unwrap()), None);
    let (_, third) = call(&reopened, "GET", &uri, None).await;
    assert_eq!(first, third);
}

#[tokio::test]
async fn pair_with_itself_is_all_zero() {
    let fx = ner_fixture(1).await;
    let id = &fx.systems[0];
    let (status, v) = get_json(&fx.app, &format!("/api/v1/analysis/pair/{id}/{id}?b=50")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["overallGap"].as_f64(), Some(0.0));
    for buckets in v["perAttribute"].as_object().unwrap().values() {
        for b in buckets.as_array().unwrap() {
            assert!(b["gap"].is_null() || b["gap"].as_f64() == Some(0.0), "{b}");
        }
    }
}

#[tokio::test]
async fn pair_gap_matches_singles() {
    let fx = ner_fixture(2).await;
    let (a, b) = (&fx.systems[0], &fx.systems[1]);
    let (_, pair) = get_json(&fx.app, &format!("/api/v1/analysis/pair/{a}/{b}?b=50")).await;
    let (_, sa) = get_json(&fx.app, &format!("/api/v1/analysis/single/{a}?b=50")).await;
    let (_, sb) = get_json(&fx.app, &format!("/api/v1/analysis/single/{b}?b=50")).await;
    for (attr, buckets) in pair["perAttribute"].as_object().unwrap() {
        for (i, bucket) in buckets.as_array().unwrap().iter().enumerate() {
            let va = &sa["perAttribute"][attr][i]["value"];
            let vb = &sb["perAttribute"][attr][i]["value"];
            assert_eq!(bucket["a"]["value"], *va);
            assert_eq!(bucket["b"]["value"], *vb);
        }
    }
}

#[tokio::test]
async fn bad_parameters_are_bad_requests() {
    let fx = ner_fixture(1).await;
    let id = &fx.systems[0];
    let (status, v) = get_json(&fx.app, &format!("/api/v1/errors/{id}?bucket=eLen|(9,10]")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&v), "UnknownBucket");
    let (status, _) = get_json(&fx.app, &format!("/api/v1/analysis/single/{id}?b=abc")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get_json(&fx.app, &format!("/api/v1/analysis/single/{id}?attrs=bogus")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, v) = get_json(&fx.app, &format!("/api/v1/errors/common?systems={id}")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_code(&v), "NeedTwoOrMoreSystems");
    let (status, v) = get_json(&fx.app, &format!("/api/v1/calibration/{id}")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
}

#[tokio::test]
async fn bucket_errors_are_paginated() {
    let fx = ner_fixture(1).await;
    let id = &fx.systems[0];
    let (_, report) = get_json(&fx.app, &format!("/api/v1/analysis/single/{id}?b=10")).await;
    let bucket = &report["perAttribute"]["eLen"][0];
    let key = bucket["key"].as_str().unwrap();
    let c = &bucket["components"];
    let expected = (c["fp"].as_u64().unwrap() + c["fn"].as_u64().unwrap()) as usize;

    let uri = |page: usize| format!("/api/v1/errors/{id}?bucket=eLen|{key}&page={page}&pageSize=7");
    let (status, first) = get_json(&fx.app, &uri(1)).await;
    assert_eq!(status, StatusCode::OK, "{first}");
    assert_eq!(first["total"].as_u64().unwrap() as usize, expected);
    assert_eq!(first["totalPages"].as_u64().unwrap() as usize, expected.div_ceil(7));
    let mut seen = 0;
    for page in 1..=expected.div_ceil(7) {
        let (_, v) = get_json(&fx.app, &uri(page)).await;
        let n = v["items"].as_array().unwrap().len();
        assert!(n <= 7);
        seen += n;
    }
    assert_eq!(seen, expected);
    let (status, _) = get_json(&fx.app, &format!("/api/v1/errors/{id}?bucket=eLen|{key}&pageSize=0")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unique_and_common_errors() {
    let fx = ner_fixture(2).await;
    let (a, b) = (&fx.systems[0], &fx.systems[1]);
    let (status, common) = get_json(&fx.app, &format!("/api/v1/errors/common?systems={a},{b}&pageSize=1000")).await;
    assert_eq!(status, StatusCode::OK);
    let (_, unique) = get_json(&fx.app, &format!("/api/v1/errors/unique?a={a}&b={b}&pageSize=1000")).await;
    let key = |c: &Value| (c["sampleId"].clone().to_string(), c["unit"].to_string(), c["errorKind"].to_string());
    let common: Vec<_> = common["items"].as_array().unwrap().iter().map(key).collect();
    for case in unique["items"].as_array().unwrap() {
        assert!(!common.contains(&key(case)), "unique case also common: {case}");
    }
}

#[tokio::test]
async fn combine_persists_a_combined_system() {
    let fx = ner_fixture(3).await;
    let body = serde_json::json!({ "systemIds": fx.systems, "b": 20, "name": "vote" }).to_string();
    let (status, raw) = call(
        &fx.app,
        "POST",
        "/api/v1/analysis/combine",
        Some(("application/json".into(), body.into_bytes())),
    )
    .await;
    let v: Value = serde_json::from_slice(&raw).unwrap();
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["record"]["kind"], "combined");
    assert_eq!(v["record"]["name"], "vote");
    assert_eq!(v["memberIds"].as_array().unwrap().len(), 3);
    let id = v["combinedId"].as_str().unwrap();
    let (status, stored) = get_json(&fx.app, &format!("/api/v1/systems/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(stored["kind"], "combined");
}

#[tokio::test]
async fn bias_profiles_registered_datasets() {
    let fx = ner_fixture(0).await;
    let (status, v) = get_json(&fx.app, "/api/v1/analysis/bias?datasets=toy&attrs=eLen,sLen").await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["datasetIds"][0], "toy");
    let (status, _) = get_json(&fx.app, "/api/v1/analysis/bias?datasets=").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn calibration_of_a_classifier() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(Arc::new(Registry::open(dir.path()).unwrap()), None);
    let (gold, outputs) = random_cls_files(5, 300, 1);
    let (status, _) = call(
        &app,
        "POST",
        "/api/v1/datasets",
        Some(multipart(&[("id", None, b"cls"), ("task", None, b"classification"), ("file", Some("g.tsv"), gold.as_bytes())])),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, sub) = submit(&app, "cls", "c", outputs[0].as_bytes()).await;
    let id = sub["id"].as_str().unwrap();
    let (status, v) = get_json(&app, &format!("/api/v1/calibration/{id}?bins=5")).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["bins"].as_array().unwrap().len(), 5);
    assert_eq!(v["n"], 300);
}

#[tokio::test]
async fn existing_dataset_conflicts() {
    let fx = ner_fixture(0).await;
    let (status, body) = call(
        &fx.app,
        "POST",
        "/api/v1/datasets",
        Some(multipart(&[("id", None, b"toy"), ("task", None, b"ner"), ("file", Some("t.conll"), b"w B-PER\n")])),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT, "{}", String::from_utf8_lossy(&body));
}
