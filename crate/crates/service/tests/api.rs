mod common;

use std::collections::BTreeSet;
use std::fs;

use axum::http::StatusCode;
use common::{components, get_json, make_project, post_json, send};
use serde_json::{json, Value};
use shadowseg_core::export::read_label_png;
use shadowseg_core::pipeline::{LABELS_FILE, SIDECAR_FILE};
use shadowseg_service::{app, ServiceOptions, StartupError};

fn loaded(project: &std::path::Path) -> axum::Router {
    app(&ServiceOptions {
        project: Some(project.to_path_buf()),
        static_dir: None,
    })
    .unwrap()
    .0
}

fn labels_of(seg: &Value) -> Vec<u64> {
    seg["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect()
}

fn distinct_nonzero(png: &[u8]) -> usize {
    read_label_png(png)
        .unwrap()
        .iter()
        .filter(|&&l| l != 0)
        .collect::<BTreeSet<_>>()
        .len()
}

#[tokio::test]
async fn endpoints_need_a_session() {
    let (router, _) = app(&ServiceOptions::default()).unwrap();
    let (s, status) = get_json(&router, "/api/status").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(status["loaded"], false);
    for uri in ["/api/mesh", "/api/segmentation", "/api/export", "/api/export/segments"] {
        assert_eq!(send(&router, "GET", uri, None).await.0, StatusCode::CONFLICT, "{uri}");
    }
    let posts = [
        ("/api/resegment", json!({"kappa": 1.0})),
        ("/api/merge", json!({"a": 1, "b": 2})),
        ("/api/barrier", json!({"edge_id": 0})),
    ];
    for (uri, body) in posts {
        let (s, v) = post_json(&router, uri, body).await;
        assert_eq!(s, StatusCode::CONFLICT, "{uri}");
        assert_eq!(v["error"], "no project loaded");
    }
}

#[tokio::test]
async fn session_loads_over_the_api() {
    let dir = tempfile::tempdir().unwrap();
    let project = make_project(dir.path());
    let (router, _) = app(&ServiceOptions::default()).unwrap();
    let (s, _) = post_json(&router, "/api/session", json!({"project": dir.path().join("nope")})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, status) = post_json(&router, "/api/session", json!({"project": project})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(status["loaded"], true);
    assert_eq!(
        (status["width"].as_u64(), status["height"].as_u64()),
        (Some(128), Some(96))
    );
    let first = status["revision"].as_u64().unwrap();
    let (_, again) = post_json(&router, "/api/session", json!({"project": project})).await;
    assert!(again["revision"].as_u64().unwrap() > first);
}

#[tokio::test]
async fn preloaded_project_reports_ready() {
    let dir = tempfile::tempdir().unwrap();
    let router = loaded(&make_project(dir.path()));
    let (s, status) = get_json(&router, "/api/status").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(status["loaded"], true);
    assert_eq!(status["merges"], 0);
    assert_eq!(status["barriers"], 0);
}

#[tokio::test]
async fn bundled_and_custom_static_pages() {
    let (router, _) = app(&ServiceOptions::default()).unwrap();
    let (s, body) = send(&router, "GET", "/", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(body).unwrap().contains("/api/segmentation"));

    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("index.html"), "custom page").unwrap();
    fs::write(dir.path().join("app.js"), "let x = 1;").unwrap();
    let (router, _) = app(&ServiceOptions {
        project: None,
        static_dir: Some(dir.path().to_path_buf()),
    })
    .unwrap();
    assert_eq!(send(&router, "GET", "/", None).await.1, b"custom page");
    assert_eq!(send(&router, "GET", "/app.js", None).await.1, b"let x = 1;");
    assert_eq!(send(&router, "GET", "/api/status", None).await.0, StatusCode::OK);

    let bad = app(&ServiceOptions {
        project: None,
        static_dir: Some(dir.path().join("missing")),
    });
    assert!(matches!(bad, Err(StartupError::MissingStaticDir(_))));
    let empty = tempfile::tempdir().unwrap();
    let bad = app(&ServiceOptions {
        project: None,
        static_dir: Some(empty.path().to_path_buf()),
    });
    assert!(matches!(bad, Err(StartupError::MissingIndex(_))));
}

#[tokio::test]
async fn export_without_edits_matches_cli_output() {
    let dir = tempfile::tempdir().unwrap();
    let project = make_project(dir.path());
    let router = loaded(&project);
    let (s, png) = send(&router, "GET", "/api/export", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(png, fs::read(project.join(LABELS_FILE)).unwrap());
    assert_eq!(send(&router, "GET", "/api/export", None).await.1, png);
    let (_, sidecar) = send(&router, "GET", "/api/export/segments", None).await;
    assert_eq!(sidecar, fs::read(project.join(SIDECAR_FILE)).unwrap());
}

#[tokio::test]
async fn merge_joins_segments_and_survives_resegment() {
    let dir = tempfile::tempdir().unwrap();
    let router = loaded(&make_project(dir.path()));
    let (_, before) = get_json(&router, "/api/segmentation").await;
    let count = before["segment_count"].as_u64().unwrap();
    assert!(count >= 5, "fixture needs at least five segments, has {count}");
    let old = labels_of(&before);
    let rev = before["revision"].as_u64().unwrap();
    let png_before = send(&router, "GET", "/api/export", None).await.1;

    let (s, same) = post_json(&router, "/api/merge", json!({"a": 3, "b": 3})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(same["revision"].as_u64(), Some(rev));
    let (s, _) = post_json(&router, "/api/merge", json!({"a": 1, "b": count + 1})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = post_json(&router, "/api/merge", json!({"a": 0, "b": 1})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, merged) = post_json(&router, "/api/merge", json!({"a": 1, "b": 2})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(merged["revision"].as_u64(), Some(rev + 1));
    assert_eq!(merged["segment_count"].as_u64(), Some(count - 1));
    let png_after = send(&router, "GET", "/api/export", None).await.1;
    assert_eq!(distinct_nonzero(&png_after), distinct_nonzero(&png_before) - 1);

    let kappa = before["kappa"].clone();
    let (_, _) = post_json(&router, "/api/resegment", json!({"kappa": kappa})).await;
    let (_, after) = get_json(&router, "/api/segmentation").await;
    let now = labels_of(&after);
    let joined: BTreeSet<u64> = (0..old.len())
        .filter(|&t| old[t] == 1 || old[t] == 2)
        .map(|t| now[t])
        .collect();
    assert_eq!(joined.len(), 1);
}

#[tokio::test]
async fn merges_are_transitive() {
    let dir = tempfile::tempdir().unwrap();
    let router = loaded(&make_project(dir.path()));
    let (_, before) = get_json(&router, "/api/segmentation").await;
    let old = labels_of(&before);
    let rep = |l: u64| old.iter().position(|&x| x == l).unwrap();
    let (r1, r2, r5) = (rep(1), rep(2), rep(5));

    post_json(&router, "/api/merge", json!({"a": 1, "b": 2})).await;
    let (_, mid) = get_json(&router, "/api/segmentation").await;
    let mid = labels_of(&mid);
    let (s, _) = post_json(&router, "/api/merge", json!({"a": mid[r2], "b": mid[r5]})).await;
    assert_eq!(s, StatusCode::OK);
    let (_, after) = get_json(&router, "/api/segmentation").await;
    let now = labels_of(&after);
    assert_eq!(now[r1], now[r2]);
    assert_eq!(now[r2], now[r5]);
    assert_eq!(after["segment_count"], before["segment_count"].as_u64().unwrap() - 2);
}

#[tokio::test]
async fn stale_revision_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let router = loaded(&make_project(dir.path()));
    let (_, seg) = get_json(&router, "/api/segmentation").await;
    let rev = seg["revision"].as_u64().unwrap();
    assert_eq!(
        get_json(&router, &format!("/api/segmentation?rev={rev}")).await.0,
        StatusCode::OK
    );
    post_json(&router, "/api/resegment", json!({"kappa": 0.5})).await;
    let (s, err) = get_json(&router, &format!("/api/segmentation?rev={rev}")).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(err["revision"].as_u64(), Some(rev + 1));
}

#[tokio::test]
async fn resegment_is_deterministic_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let router = loaded(&make_project(dir.path()));
    let (s, mut a) = post_json(&router, "/api/resegment", json!({"kappa": 1.3, "a_min": 20.0})).await;
    assert_eq!(s, StatusCode::OK);
    let (_, mut b) = post_json(&router, "/api/resegment", json!({"kappa": 1.3, "a_min": 20.0})).await;
    assert_eq!(b["revision"].as_u64().unwrap(), a["revision"].as_u64().unwrap() + 1);
    a["revision"] = Value::Null;
    b["revision"] = Value::Null;
    assert_eq!(a, b);

    for body in [json!({"kappa": 0.0}), json!({"kappa": -1.0}), json!({"a_min": -5.0})] {
        assert_eq!(
            post_json(&router, "/api/resegment", body).await.0,
            StatusCode::BAD_REQUEST
        );
    }
    assert!(send(&router, "POST", "/api/resegment", Some(json!({"kappa": "x"})))
        .await
        .0
        .is_client_error());
}

#[tokio::test]
async fn tiny_kappa_gives_one_segment_per_component() {
    let dir = tempfile::tempdir().unwrap();
    let router = loaded(&make_project(dir.path()));
    let (_, mesh) = get_json(&router, "/api/mesh").await;
    let (s, summary) = post_json(&router, "/api/resegment", json!({"kappa": 1e-9, "a_min": 0.0})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(summary["segment_count"].as_u64().unwrap() as usize, components(&mesh));
}

#[tokio::test]
async fn barrier_cut_set_splits_and_toggles_back() {
    let dir = tempfile::tempdir().unwrap();
    let router = loaded(&make_project(dir.path()));
    let (_, mesh) = get_json(&router, "/api/mesh").await;
    let verts = mesh["vertices"].as_array().unwrap();
    let tris = mesh["triangles"].as_array().unwrap();
    let left = |t: u64| {
        let cx: f64 = tris[t as usize]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| verts[v.as_u64().unwrap() as usize][0].as_f64().unwrap())
            .sum::<f64>()
            / 3.0;
        cx < 64.0
    };
    let cut: Vec<u64> = mesh["dual_edges"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| left(e["t1"].as_u64().unwrap()) != left(e["t2"].as_u64().unwrap()))
        .map(|e| e["id"].as_u64().unwrap())
        .collect();
    assert!(!cut.is_empty());

    post_json(&router, "/api/resegment", json!({"kappa": 1e-9, "a_min": 0.0})).await;
    let (_, base) = get_json(&router, "/api/segmentation").await;
    assert_eq!(base["segment_count"], 1);
    for &id in &cut {
        let (s, r) = post_json(&router, "/api/barrier", json!({"edge_id": id})).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(r["barred"], true);
    }
    let (_, split) = get_json(&router, "/api/segmentation").await;
    assert!(split["segment_count"].as_u64().unwrap() >= 2);
    assert_eq!(split["barriers"].as_array().unwrap().len(), cut.len());
    for &id in &cut {
        let (_, r) = post_json(&router, "/api/barrier", json!({"edge_id": id})).await;
        assert_eq!(r["barred"], false);
    }
    let (_, back) = get_json(&router, "/api/segmentation").await;
    assert_eq!(labels_of(&back), labels_of(&base));

    let n = mesh["dual_edges"].as_array().unwrap().len();
    let (s, _) = post_json(&router, "/api/barrier", json!({"edge_id": n})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn barring_every_edge_keeps_singletons() {
    let dir = tempfile::tempdir().unwrap();
    let router = loaded(&make_project(dir.path()));
    let (_, mesh) = get_json(&router, "/api/mesh").await;
    for e in mesh["dual_edges"].as_array().unwrap() {
        post_json(&router, "/api/barrier", json!({"edge_id": e["id"]})).await;
    }
    let (_, summary) = post_json(&router, "/api/resegment", json!({"kappa": 1e-9, "a_min": 0.0})).await;
    assert_eq!(
        summary["segment_count"].as_u64().unwrap() as usize,
        mesh["triangles"].as_array().unwrap().len()
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_edits_each_bump_the_revision() {
    let dir = tempfile::tempdir().unwrap();
    let router = loaded(&make_project(dir.path()));
    let (_, start) = get_json(&router, "/api/status").await;
    let start = start["revision"].as_u64().unwrap();
    let mut tasks = Vec::new();
    for k in 0..16 {
        let r = router.clone();
        tasks.push(tokio::spawn(async move {
            if k % 2 == 0 {
                post_json(&r, "/api/resegment", json!({"kappa": 0.5 + k as f64 / 10.0}))
                    .await
                    .0
            } else {
                get_json(&r, "/api/segmentation").await.0
            }
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let (_, end) = get_json(&router, "/api/status").await;
    assert_eq!(end["revision"].as_u64().unwrap(), start + 8);
}
