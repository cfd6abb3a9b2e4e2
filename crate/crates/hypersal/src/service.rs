//! HTTP API behind the annotation UI.
//!
//! Scenes are the `*.hdr` cubes in the data directory; the id is the file
//! stem. Derived layers are computed lazily, at most once per scene, and
//! label requests are answered by the same code path as the CLI.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use hypersal_core::pseudo_label::{binarize_edges, run_lengths, working_edges, EdgeInputs, WorkingEdges};
use hypersal_core::{Coord, EdgeMap, HyperCube, Label, PointSet, SaliencyMap, TriMask};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::config::PipelineConfig;
use crate::error::Error;
use crate::io::{self, png, pnm, points::PointsFile};
use crate::pipeline::{render_falsecolor, render_specsal, Layers};

/// An error response: `{"error":{"kind":…,"message":…}}` with a status.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown-scene", format!("no scene `{id}`"))
    }

    /// A failure caused by the request contents.
    fn bad_request(e: Error) -> Self {
        Self::new(StatusCode::BAD_REQUEST, e.kind(), e.to_string())
    }

    /// A failure to load or process a scene on disk.
    fn scene(e: Error) -> Self {
        let status = match e {
            Error::Missing { .. } => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.kind(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "kind": self.kind, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSource {
    Merged,
    Falsecolor,
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum PreviewKey {
    Falsecolor,
    Specsal,
    /// Scale and optional tau as raw bits, so the key is hashable.
    Edges(EdgeSource, u64, Option<u64>),
}

/// Lazily computed, per-scene derived data.
struct Scene {
    header: PathBuf,
    modified: Option<SystemTime>,
    cube: Mutex<Option<Arc<HyperCube>>>,
    layers: Mutex<Option<Arc<Layers>>>,
    edges: Mutex<HashMap<u64, Arc<WorkingEdges>>>,
    previews: Mutex<HashMap<PreviewKey, Arc<Vec<u8>>>>,
}

fn modified(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

impl Scene {
    fn new(header: PathBuf) -> Self {
        Self {
            modified: modified(&header),
            header,
            cube: Mutex::new(None),
            layers: Mutex::new(None),
            edges: Mutex::new(HashMap::new()),
            previews: Mutex::new(HashMap::new()),
        }
    }

    fn cube(&self) -> crate::Result<Arc<HyperCube>> {
        let mut slot = self.cube.lock().expect("cube lock");
        if let Some(c) = &*slot {
            return Ok(c.clone());
        }
        let cube = Arc::new(io::read_cube(&self.header)?);
        *slot = Some(cube.clone());
        Ok(cube)
    }

    /// The lock is held while computing so concurrent callers wait instead
    /// of repeating the work.
    fn layers(&self, config: &PipelineConfig) -> crate::Result<Arc<Layers>> {
        let mut slot = self.layers.lock().expect("layers lock");
        if let Some(l) = &*slot {
            return Ok(l.clone());
        }
        let cube = self.cube()?;
        let layers = Arc::new(Layers {
            falsecolor: render_falsecolor(&cube, config)?,
            specsal: render_specsal(&cube, config)?,
        });
        *slot = Some(layers.clone());
        Ok(layers)
    }

    fn edges(&self, config: &PipelineConfig, scale: f64) -> crate::Result<Arc<WorkingEdges>> {
        let layers = self.layers(config)?;
        let mut cache = self.edges.lock().expect("edges lock");
        if let Some(e) = cache.get(&scale.to_bits()) {
            return Ok(e.clone());
        }
        let mut label_config = config.label_config();
        label_config.scale = scale;
        let edges = Arc::new(working_edges(
            &layers.falsecolor,
            &layers.specsal,
            &label_config,
            EdgeInputs::default(),
        )?);
        cache.insert(scale.to_bits(), edges.clone());
        Ok(edges)
    }

    fn preview(&self, key: PreviewKey, config: &PipelineConfig) -> crate::Result<Arc<Vec<u8>>> {
        if let Some(p) = self.previews.lock().expect("preview lock").get(&key) {
            return Ok(p.clone());
        }
        let bytes = match key {
            PreviewKey::Falsecolor => png::rgb_png(&self.layers(config)?.falsecolor),
            PreviewKey::Specsal => png::gray_png(&self.layers(config)?.specsal),
            PreviewKey::Edges(source, scale, tau) => {
                let edges = self.edges(config, f64::from_bits(scale))?;
                let map = match source {
                    EdgeSource::Merged => &edges.merged,
                    EdgeSource::Falsecolor => &edges.falsecolor,
                    EdgeSource::Spectral => &edges.spectral,
                };
                png::gray_png(&edge_preview(map, tau.map(f64::from_bits))?)
            }
        };
        let bytes = Arc::new(bytes);
        self.previews.lock().expect("preview lock").insert(key, bytes.clone());
        Ok(bytes)
    }
}

/// Barriers at `tau` when given, otherwise the edge strength scaled so its
/// maximum is at most 1.
fn edge_preview(edges: &EdgeMap, tau: Option<f64>) -> crate::Result<SaliencyMap> {
    let (h, w) = edges.dims();
    let data = match tau {
        Some(tau) => binarize_edges(edges, tau)?
            .as_slice()
            .iter()
            .map(|&b| f64::from(u8::from(b)))
            .collect(),
        None => {
            let max = edges.as_slice().iter().cloned().fold(1.0, f64::max);
            edges.as_slice().iter().map(|v| v / max).collect()
        }
    };
    Ok(SaliencyMap::new(h, w, data)?)
}

/// Last proposed label of a scene.
#[derive(Clone, Debug)]
struct Session {
    points: PointSet,
    scale: f64,
    tau: f64,
    mask: TriMask,
    history: Vec<PointSet>,
}

pub struct AppState {
    data_dir: PathBuf,
    config: PipelineConfig,
    scenes: Mutex<HashMap<String, Arc<Scene>>>,
    sessions: Mutex<HashMap<String, Session>>,
}

/// Ids are bare file stems; anything that could escape the data directory
/// is rejected.
fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl AppState {
    pub fn new(data_dir: PathBuf, config: PipelineConfig) -> Self {
        Self {
            data_dir,
            config,
            scenes: Mutex::new(HashMap::new()),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    fn header_path(&self, id: &str) -> PathBuf {
        self.data_dir.join(format!("{id}.hdr"))
    }

    fn scene(&self, id: &str) -> ApiResult<Arc<Scene>> {
        let header = self.header_path(id);
        if !valid_id(id) || !header.is_file() {
            return Err(ApiError::not_found(id));
        }
        let mut scenes = self.scenes.lock().expect("scenes lock");
        // a cube rewritten on disk invalidates its cached layers
        match scenes.get(id) {
            Some(s) if s.modified == modified(&header) => Ok(s.clone()),
            _ => {
                let s = Arc::new(Scene::new(header));
                scenes.insert(id.to_string(), s.clone());
                Ok(s)
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SceneSummary {
    pub id: String,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
}

/// Headers whose raw file is present and of the declared size.
fn summarize(path: &Path) -> crate::Result<SceneSummary> {
    let header = io::read_header(path)?;
    let raw = io::envi::raw_path(path)?;
    let len = std::fs::metadata(&raw).map_err(|e| Error::io(&raw, e))?.len();
    let expected = (header.samples * header.lines * header.bands * 4 + header.header_offset) as u64;
    if len != expected {
        return Err(Error::format(&raw, "size-mismatch", format!("expected {expected} bytes, found {len}")));
    }
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    Ok(SceneSummary {
        id,
        height: header.lines,
        width: header.samples,
        bands: header.bands,
    })
}

pub fn list_scenes(data_dir: &Path) -> Vec<SceneSummary> {
    let Ok(entries) = std::fs::read_dir(data_dir) else {
        tracing::warn!(dir = %data_dir.display(), "data directory is not readable");
        return Vec::new();
    };
    let mut scenes: Vec<SceneSummary> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "hdr"))
        .filter(|p| p.file_stem().and_then(|s| s.to_str()).is_some_and(valid_id))
        .filter_map(|p| match summarize(&p) {
            Ok(s) => Some(s),
            Err(e) => {
                tracing::warn!(error = %e, "skipping unreadable scene");
                None
            }
        })
        .collect();
    scenes.sort_by(|a, b| a.id.cmp(&b.id));
    scenes
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn scenes_handler(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<SceneSummary>>> {
    blocking(move || Ok(Json(list_scenes(&state.data_dir)))).await
}

#[derive(Debug, Default, Deserialize)]
struct PreviewQuery {
    source: Option<EdgeSource>,
    scale: Option<f64>,
    tau: Option<f64>,
}

async fn preview_handler(
    State(state): State<Arc<AppState>>,
    UrlPath((id, file)): UrlPath<(String, String)>,
    Query(query): Query<PreviewQuery>,
) -> ApiResult<Response> {
    let scene = state.scene(&id)?;
    let key = match file.as_str() {
        "falsecolor.png" => PreviewKey::Falsecolor,
        "specsal.png" => PreviewKey::Specsal,
        "edges.png" => {
            let scale = query.scale.unwrap_or(state.config.scale);
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(ApiError::new(StatusCode::BAD_REQUEST, "invalid-parameter", "scale must be positive"));
            }
            PreviewKey::Edges(
                query.source.unwrap_or(EdgeSource::Merged),
                scale.to_bits(),
                query.tau.map(f64::to_bits),
            )
        }
        _ => {
            return Err(ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad-kind",
                format!("unknown layer `{file}`; expected falsecolor.png, specsal.png or edges.png"),
            ))
        }
    };
    let bytes = blocking(move || scene.preview(key, &state.config).map_err(ApiError::scene)).await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes.as_ref().clone()).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRequest {
    #[serde(default)]
    frame: Option<(usize, usize)>,
    salient: Vec<Coord>,
    background: Coord,
    #[serde(default)]
    scale: Option<f64>,
    #[serde(default)]
    tau: Option<f64>,
}

/// Wire code of a label in run-length responses.
pub fn rle_code(label: Label) -> u8 {
    match label {
        Label::Background => 0,
        Label::Unknown => 1,
        Label::Foreground => 2,
    }
}

async fn label_handler(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let scene = state.scene(&id)?;
    let request: LabelRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed-request", e.to_string()))?;
    let st = state.clone();
    let (session, leak) = blocking(move || {
        let cube = scene.cube().map_err(ApiError::scene)?;
        let dims = cube.dims();
        if let Some(frame) = request.frame.filter(|&f| f != dims) {
            return Err(ApiError::bad_request(
                hypersal_core::Error::DimensionMismatch {
                    expected: dims,
                    found: frame,
                }
                .into(),
            ));
        }
        let points = PointSet::new(dims, request.salient, request.background)
            .map_err(|e| ApiError::bad_request(e.into()))?;
        let mut config = st.config.clone();
        config.scale = request.scale.unwrap_or(config.scale);
        config.tau = request.tau.unwrap_or(config.tau);
        config.validate().map_err(ApiError::bad_request)?;
        let layers = scene.layers(&config).map_err(ApiError::scene)?;
        let label = layers
            .pseudo_label(&points, &config, EdgeInputs::default())
            .map_err(ApiError::bad_request)?;
        let session = Session {
            points,
            scale: config.scale,
            tau: config.tau,
            mask: label.mask,
            history: Vec::new(),
        };
        Ok((session, label.leak))
    })
    .await?;

    let (fg, bg, unknown) = session.mask.label_counts();
    let rle: Vec<(u8, usize)> = run_lengths(&session.mask).into_iter().map(|(l, n)| (rle_code(l), n)).collect();
    let response = json!({
        "height": session.mask.height(),
        "width": session.mask.width(),
        "rle": rle,
        "counts": { "foreground": fg, "background": bg, "unknown": unknown },
        "leak": leak,
        "scale": session.scale,
        "tau": session.tau,
    });
    let mut sessions = state.sessions.lock().expect("sessions lock");
    let history = match sessions.remove(&id) {
        Some(mut old) => {
            old.history.push(session.points.clone());
            old.history
        }
        None => vec![session.points.clone()],
    };
    sessions.insert(id, Session { history, ..session });
    Ok(Json(response))
}

fn session(state: &AppState, id: &str) -> ApiResult<Session> {
    state.scene(id)?;
    state.sessions.lock().expect("sessions lock").get(id).cloned().ok_or_else(|| {
        ApiError::new(
            StatusCode::CONFLICT,
            "no-annotation",
            format!("scene `{id}` has no proposed label yet"),
        )
    })
}

/// The configuration the session's label was produced with.
fn session_config(state: &AppState, s: &Session) -> PipelineConfig {
    PipelineConfig {
        scale: s.scale,
        tau: s.tau,
        ..state.config.clone()
    }
}

async fn export_handler(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let label = base64::engine::general_purpose::STANDARD.encode(pnm::mask_to_pgm(&s.mask));
    Ok(Json(json!({
        "id": id,
        "points": PointsFile::from(&s.points),
        "scale": s.scale,
        "tau": s.tau,
        "history_depth": s.history.len(),
        "config": session_config(&state, &s).to_string(),
        "label_pgm": label,
    })))
}

async fn export_file_handler(
    State(state): State<Arc<AppState>>,
    UrlPath((id, file)): UrlPath<(String, String)>,
) -> ApiResult<Response> {
    let s = session(&state, &id)?;
    let response = match file.as_str() {
        "points.json" => ([(header::CONTENT_TYPE, "application/json")], io::points::points_json(&s.points)).into_response(),
        "label.pgm" => ([(header::CONTENT_TYPE, "image/x-portable-graymap")], pnm::mask_to_pgm(&s.mask)).into_response(),
        "config.txt" => ([(header::CONTENT_TYPE, "text/plain")], session_config(&state, &s).to_string()).into_response(),
        _ => {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown-export",
                format!("no export file `{file}`"),
            ))
        }
    };
    Ok(response)
}

/// The API router; `ui` optionally serves static assets for all other paths.
pub fn router(state: Arc<AppState>, ui: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/scenes", get(scenes_handler))
        .route("/api/scenes/{id}/label", post(label_handler))
        .route("/api/scenes/{id}/export", get(export_handler))
        .route("/api/scenes/{id}/export/{file}", get(export_file_handler))
        .route("/api/scenes/{id}/{file}", get(preview_handler))
        .with_state(state);
    let app = match ui {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any))
        .layer(TraceLayer::new_for_http())
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>, ui: Option<&Path>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state, ui))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
