#![allow(dead_code)]

use std::path::{Path, PathBuf};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use shadowseg_core::pipeline::{run_project, Inputs};
use shadowseg_core::synthetic::{ring_lights, SquareScene};
use shadowseg_core::{Exec, PipelineConfig};
use tower::ServiceExt;

pub fn scene() -> SquareScene {
    SquareScene {
        width: 128,
        height: 96,
        plate: (40, 28, 87, 67),
        elevation: 8.0,
        lights: ring_lights(8, 50.0, 22.5),
    }
}

/// Runs the pipeline on the small scene and returns the output directory.
pub fn make_project(root: &Path) -> PathBuf {
    let (stack, lights) = scene().render();
    let inputs = Inputs {
        mask_dir: root.join("masks"),
        lights: root.join("lights.txt"),
        config: None,
    };
    shadowseg_core::mask_io::write_stack(&inputs.mask_dir, &inputs.lights, &stack, &lights).unwrap();
    let out = root.join("out");
    run_project(inputs, &PipelineConfig::default(), &out, Exec::default()).unwrap();
    out
}

pub async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => req
            .header("content-type", "application/json")
            .body(Body::from(v.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

pub async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = send(app, "GET", uri, None).await;
    (s, serde_json::from_slice(&b).unwrap())
}

pub async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (s, b) = send(app, "POST", uri, Some(body)).await;
    (s, serde_json::from_slice(&b).unwrap())
}

/// Connected components of the dual graph described by a mesh payload.
pub fn components(mesh: &Value) -> usize {
    let n = mesh["triangles"].as_array().unwrap().len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &[usize], mut x: usize) -> usize {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for e in mesh["dual_edges"].as_array().unwrap() {
        let a = root(&parent, e["t1"].as_u64().unwrap() as usize);
        let b = root(&parent, e["t2"].as_u64().unwrap() as usize);
        parent[a] = b;
    }
    (0..n).filter(|&t| root(&parent, t) == t).count()
}
