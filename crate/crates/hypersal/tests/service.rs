use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use base64::Engine as _;
use http_body_util::BodyExt;
use hypersal::config::PipelineConfig;
use hypersal::fixture;
use hypersal::service::{router, AppState};
use hypersal_core::pseudo_label::{working_edges, EdgeInputs};
use serde_json::{json, Value};
use tempfile::{tempdir, TempDir};
use tower::ServiceExt;

struct Server {
    dir: TempDir,
    app: axum::Router,
}

impl Server {
    fn with(scenes: &[&str]) -> Self {
        let dir = tempdir().unwrap();
        for &id in scenes {
            fixture::square_scene().write(dir.path(), id).unwrap();
        }
        let state = Arc::new(AppState::new(dir.path().to_path_buf(), PipelineConfig::default()));
        let app = router(state, None);
        Self { dir, app }
    }

    async fn send(&self, req: Request<Body>) -> (StatusCode, Option<String>, Vec<u8>) {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let ct = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string());
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, ct, body)
    }

    async fn get(&self, uri: &str) -> (StatusCode, Option<String>, Vec<u8>) {
        self.send(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    async fn get_json(&self, uri: &str) -> (StatusCode, Value) {
        let (s, _, b) = self.get(uri).await;
        (s, serde_json::from_slice(&b).unwrap())
    }

    async fn label(&self, id: &str, body: Value) -> (StatusCode, Value) {
        let req = Request::post(format!("/api/scenes/{id}/label"))
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let (s, _, b) = self.send(req).await;
        (s, serde_json::from_slice(&b).unwrap())
    }
}

fn fixture_points() -> Value {
    json!({ "salient": [[64, 64]], "background": [5, 5] })
}

fn with(mut v: Value, key: &str, x: Value) -> Value {
    v[key] = x;
    v
}

#[tokio::test]
async fn listing_scenes() {
    let empty = Server::with(&[]);
    assert_eq!(empty.get_json("/api/scenes").await, (StatusCode::OK, json!([])));

    let two = Server::with(&["zeta", "alpha"]);
    std::fs::write(two.dir.path().join("broken.hdr"), "ENVI\nsamples = x\n").unwrap();
    let (s, v) = two.get_json("/api/scenes").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(
        v,
        json!([
            { "id": "alpha", "height": 128, "width": 128, "bands": 16 },
            { "id": "zeta", "height": 128, "width": 128, "bands": 16 },
        ])
    );
}

#[tokio::test]
async fn previews() {
    let srv = Server::with(&["sq"]);
    for uri in [
        "/api/scenes/sq/falsecolor.png",
        "/api/scenes/sq/specsal.png",
        "/api/scenes/sq/edges.png",
        "/api/scenes/sq/edges.png?source=spectral&tau=0.5",
    ] {
        let (s, ct, body) = srv.get(uri).await;
        assert_eq!(s, StatusCode::OK, "{uri}");
        assert_eq!(ct.as_deref(), Some("image/png"));
        assert!(body.starts_with(b"\x89PNG\r\n\x1a\n"));
    }
    assert_eq!(srv.get("/api/scenes/nope/falsecolor.png").await.0, StatusCode::NOT_FOUND);
    assert_eq!(srv.get("/api/scenes/..%2Fsq/falsecolor.png").await.0, StatusCode::NOT_FOUND);
    let (s, v) = srv.get_json("/api/scenes/sq/depth.png").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["kind"], "bad-kind");
    assert_eq!(srv.get("/api/scenes/sq/edges.png?source=depth").await.0, StatusCode::BAD_REQUEST);
}

fn decode_rle(v: &Value) -> Vec<u8> {
    v["rle"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|run| std::iter::repeat_n(run[0].as_u64().unwrap() as u8, run[1].as_u64().unwrap() as usize))
        .collect()
}

#[tokio::test]
async fn label_on_the_fixture() {
    let srv = Server::with(&["sq"]);
    let (s, v) = srv.label("sq", fixture_points()).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert!(v["counts"]["foreground"].as_u64().unwrap() > 0);
    assert_eq!(v["leak"], false);
    let codes = decode_rle(&v);
    assert_eq!(codes.len(), 128 * 128);
    // the salient point is foreground, the background point background
    assert_eq!(codes[64 * 128 + 64], 2);
    assert_eq!(codes[5 * 128 + 5], 0);
    let fg = codes.iter().filter(|&&c| c == 2).count() as u64;
    assert_eq!(fg, v["counts"]["foreground"].as_u64().unwrap());
}

/// A threshold above every merged edge value leaves no barrier at all.
#[tokio::test]
async fn threshold_above_every_edge_leaks() {
    let scene = fixture::square_scene();
    let cfg = PipelineConfig::default();
    let layers = hypersal::pipeline::Layers::compute(&scene.cube, &cfg).unwrap();
    let edges = working_edges(&layers.falsecolor, &layers.specsal, &cfg.label_config(), EdgeInputs::default()).unwrap();
    let max = edges.merged.as_slice().iter().cloned().fold(0.0, f64::max);

    let srv = Server::with(&["sq"]);
    let (s, v) = srv.label("sq", with(fixture_points(), "tau", json!(max + 1e-9))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["leak"], true);
    assert_eq!(v["counts"]["foreground"], 0);
    assert_eq!(v["counts"]["unknown"], 128 * 128);
    assert!(v["counts"]["unknown"].as_u64().unwrap() > v["counts"]["background"].as_u64().unwrap());
}

#[tokio::test]
async fn invalid_label_requests() {
    let srv = Server::with(&["sq"]);
    // (44, 44) is the object corner, on the contour at the working resolution
    let on_edge = json!({ "salient": [[44, 44]], "background": [5, 5] });
    let (s, v) = srv.label("sq", on_edge).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["kind"], "point-on-edge");

    let (s, v) = srv.label("sq", json!({ "salient": [], "background": [5, 5] })).await;
    assert_eq!((s, v["error"]["kind"].as_str()), (StatusCode::BAD_REQUEST, Some("empty-salient")));
    let (s, v) = srv.label("sq", json!({ "salient": [[1, 1]], "background": [128, 5] })).await;
    assert_eq!((s, v["error"]["kind"].as_str()), (StatusCode::BAD_REQUEST, Some("point-out-of-bounds")));
    let (s, v) = srv.label("sq", with(fixture_points(), "frame", json!([64, 64]))).await;
    assert_eq!((s, v["error"]["kind"].as_str()), (StatusCode::BAD_REQUEST, Some("dimension-mismatch")));
    let (s, _) = srv.label("sq", json!({ "salient": "nope" })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = srv.label("missing", fixture_points()).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn export_requires_an_annotation() {
    let srv = Server::with(&["sq"]);
    let (s, v) = srv.get_json("/api/scenes/sq/export").await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["error"]["kind"], "no-annotation");
    assert_eq!(srv.get("/api/scenes/nope/export").await.0, StatusCode::NOT_FOUND);
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_hypersal")).args(args).output().unwrap()
}

#[tokio::test]
async fn exported_points_reproduce_the_mask_with_the_cli() {
    let srv = Server::with(&["sq"]);
    let request = json!({ "salient": [[64, 64], [70, 60]], "background": [5, 5], "scale": 0.5, "tau": 0.4 });
    let (s, label) = srv.label("sq", request).await;
    assert_eq!(s, StatusCode::OK);
    let (s, export) = srv.get_json("/api/scenes/sq/export").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(export["points"]["frame"], json!([128, 128]));
    let served = base64::engine::general_purpose::STANDARD
        .decode(export["label_pgm"].as_str().unwrap())
        .unwrap();
    let (_, _, raw) = srv.get("/api/scenes/sq/export/label.pgm").await;
    assert_eq!(raw, served);

    let d = srv.dir.path();
    let (_, _, points) = srv.get("/api/scenes/sq/export/points.json").await;
    std::fs::write(d.join("exported.json"), points).unwrap();
    std::fs::write(d.join("exported.cfg"), export["config"].as_str().unwrap()).unwrap();
    let out = d.join("cli.pgm");
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let o = cli(&[
        "pseudolabel",
        "--config",
        &p(&d.join("exported.cfg")),
        "--input",
        &p(&d.join("sq.hdr")),
        "--points",
        &p(&d.join("exported.json")),
        "--out",
        &p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), served);

    // the RLE in the label response describes the same mask
    let codes = decode_rle(&label);
    let mask = hypersal::io::read_mask_pgm(&out).unwrap();
    let expect: Vec<u8> = mask.as_slice().iter().map(|&l| hypersal::service::rle_code(l)).collect();
    assert_eq!(codes, expect);
}

#[tokio::test]
async fn concurrent_requests_on_different_scenes() {
    let srv = Server::with(&["a", "b"]);
    let pts = |bg: [usize; 2]| json!({ "salient": [[64, 64]], "background": bg });
    let (ra, rb) = tokio::join!(srv.label("a", pts([5, 5])), srv.label("b", pts([120, 120])));
    assert_eq!((ra.0, rb.0), (StatusCode::OK, StatusCode::OK));
    let (_, ea) = srv.get_json("/api/scenes/a/export").await;
    let (_, eb) = srv.get_json("/api/scenes/b/export").await;
    assert_eq!(ea["points"]["background"], json!([5, 5]));
    assert_eq!(eb["points"]["background"], json!([120, 120]));
}

#[tokio::test]
async fn cors_headers_are_present() {
    let srv = Server::with(&[]);
    let req = Request::get("/api/scenes")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = srv.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers().get("access-control-allow-origin").unwrap(), "*");
}
