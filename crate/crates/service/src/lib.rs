//! HTTP control surface for a single render session.
//!
//! Every handler runs against the session behind one fair mutex, so requests
//! are applied in arrival order and state changes land between frames. Work
//! that touches the renderer runs on the blocking pool.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use vxct_core::engine::{EngineError, RenderJob, RenderMode, Renderer};
use vxct_core::mipvolume::export_visualization;
use vxct_core::{BuildOptions, Camera, ConeSettings, Scene, SceneError, SettingValue};

/// Largest frame edge the service will render.
pub const MAX_FRAME_EDGE: u32 = 2048;
pub const DEFAULT_FRAME_EDGE: u32 = 128;
pub const SNAPSHOT_HEADER: &str = "x-snapshot-id";

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub grid: usize,
    pub vox_freq: Option<u32>,
    pub threads: usize,
    /// Mesh paths in posted scenes resolve against this directory.
    pub base_dir: PathBuf,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            grid: 32,
            vox_freq: None,
            threads: 1,
            base_dir: PathBuf::from("."),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FrameRecord {
    seconds: f64,
    snapshot: u64,
}

/// Scene, camera and settings of the live session plus the renderer that
/// keeps the voxel volume between frames.
pub struct Session {
    scene: Arc<Scene>,
    camera: Camera,
    settings: ConeSettings,
    config: SessionConfig,
    renderer: Renderer,
    /// Incremented by every accepted mutation.
    snapshot: u64,
    frames: u64,
    last_frame: Option<FrameRecord>,
}

impl Session {
    pub fn new(scene: Scene, config: SessionConfig) -> Result<Self, ApiError> {
        let probe = RenderJob::new(Arc::new(scene), 1, 1, RenderMode::Vxct, config.grid)
            .map_err(ApiError::from)?;
        if config.threads == 0 {
            return Err(ApiError::bad_request("thread count must be at least 1"));
        }
        Ok(Self {
            camera: probe.scene.camera,
            settings: probe.settings,
            scene: probe.scene,
            config,
            renderer: Renderer::new(),
            snapshot: 0,
            frames: 0,
            last_frame: None,
        })
    }

    pub fn snapshot(&self) -> u64 {
        self.snapshot
    }

    fn job(&self, width: u32, height: u32, mode: RenderMode) -> RenderJob {
        let mut camera = self.camera;
        camera.aspect = width.max(1) as f64 / height.max(1) as f64;
        RenderJob {
            scene: self.scene.clone(),
            camera,
            width,
            height,
            mode,
            grid: self.config.grid,
            vox_freq: self.config.vox_freq,
            threads: self.config.threads,
            gamma: None,
            settings: self.settings,
        }
    }

    fn ensure_volume(&mut self) -> Result<(), ApiError> {
        if !self
            .renderer
            .is_current(&self.scene, self.config.grid, &self.settings)
        {
            self.renderer
                .voxelize(&self.scene, self.config.grid, &self.settings)
                .map_err(ApiError::from)?;
        }
        Ok(())
    }
}

/// Error body: `{"error": message}` plus `line` and `column` for scene errors.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
    pub location: Option<(usize, usize)>,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
            location: None,
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: message.into(),
            location: None,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<SceneError> for ApiError {
    fn from(e: SceneError) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: e.to_string(),
            location: e.location(),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Scene(s) => s.into(),
            EngineError::Io(_) => Self::internal(e.to_string()),
            other => Self::bad_request(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some((line, column)) = self.location {
            body["line"] = json!(line);
            body["column"] = json!(column);
        }
        (self.status, Json(body)).into_response()
    }
}

#[derive(Clone)]
pub struct AppState(Arc<Mutex<Session>>);

impl AppState {
    pub fn new(session: Session) -> Self {
        Self(Arc::new(Mutex::new(session)))
    }

    /// Runs `f` on the blocking pool once every earlier request has finished.
    async fn run<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
    {
        let mut guard = self.0.clone().lock_owned().await;
        tokio::task::spawn_blocking(move || f(&mut guard))
            .await
            .map_err(|e| ApiError::internal(format!("request task failed: {e}")))?
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/frame", get(frame))
        .route("/settings", get(get_settings).put(put_settings))
        .route("/camera", get(get_camera).put(put_camera))
        .route("/voxelize", post(voxelize))
        .route("/voxelmap", get(voxelmap))
        .route("/scene", post(post_scene))
        .route("/stats", get(stats))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(listener: TcpListener, session: Session) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(AppState::new(session)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

#[derive(Debug, Deserialize)]
struct FrameQuery {
    w: Option<u32>,
    h: Option<u32>,
    mode: Option<String>,
    lod: Option<usize>,
}

async fn frame(
    State(state): State<AppState>,
    Query(q): Query<FrameQuery>,
) -> Result<Response, ApiError> {
    let width = q.w.unwrap_or(DEFAULT_FRAME_EDGE);
    let height = q.h.unwrap_or(DEFAULT_FRAME_EDGE);
    if width == 0 || height == 0 || width > MAX_FRAME_EDGE || height > MAX_FRAME_EDGE {
        return Err(ApiError::bad_request(format!(
            "frame size must lie within 1..={MAX_FRAME_EDGE}, got {width}x{height}"
        )));
    }
    let name = q.mode.as_deref().unwrap_or("vxct");
    let mode = RenderMode::parse(name, q.lod.unwrap_or(0)).ok_or_else(|| {
        ApiError::bad_request(format!(
            "unknown mode '{name}', expected one of {:?}",
            RenderMode::NAMES
        ))
    })?;
    let (ppm, snapshot) = state
        .run(move |s| {
            let job = s.job(width, height, mode);
            let image = s.renderer.render(&job)?;
            let seconds = s.renderer.last_stats().frame_seconds;
            s.last_frame = Some(FrameRecord {
                seconds,
                snapshot: s.snapshot,
            });
            s.frames += 1;
            Ok((image.to_ppm(), s.snapshot))
        })
        .await?;
    let mut response = stamped(ppm, snapshot);
    response.headers_mut().insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("image/x-portable-pixmap"),
    );
    Ok(response)
}

/// Tags a response with the state snapshot it reflects.
fn stamped(body: impl IntoResponse, snapshot: u64) -> Response {
    let mut response = body.into_response();
    response
        .headers_mut()
        .insert(SNAPSHOT_HEADER, HeaderValue::from(snapshot));
    response
}

fn settings_document(s: &ConeSettings) -> Value {
    let map: Map<String, Value> = s
        .fields()
        .into_iter()
        .map(|(k, v)| {
            let v = match v {
                SettingValue::Real(x) => json!(x),
                SettingValue::Flag(b) => json!(b),
            };
            (k.to_string(), v)
        })
        .collect();
    Value::Object(map)
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON: {e}")))
}

/// Applies a partial settings document; nothing changes unless every key is
/// known and the merged settings validate.
pub fn merge_settings(
    base: &ConeSettings,
    patch: &Map<String, Value>,
) -> Result<ConeSettings, ApiError> {
    let mut merged = *base;
    for (key, value) in patch {
        let value = match value {
            Value::Bool(b) => SettingValue::Flag(*b),
            Value::Number(n) => SettingValue::Real(n.as_f64().unwrap_or(f64::NAN)),
            _ => {
                return Err(ApiError::bad_request(format!(
                    "setting '{key}' must be a number or boolean"
                )))
            }
        };
        merged
            .set(key, value)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
    }
    merged
        .validate()
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(merged)
}

async fn get_settings(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    state
        .run(|s| Ok(Json(settings_document(&s.settings))))
        .await
}

async fn put_settings(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let patch: Value = parse_json(&body)?;
    let Value::Object(patch) = patch else {
        return Err(ApiError::bad_request(
            "settings document must be a JSON object",
        ));
    };
    state
        .run(move |s| {
            s.settings = merge_settings(&s.settings, &patch)?;
            s.snapshot += 1;
            Ok(stamped(Json(settings_document(&s.settings)), s.snapshot))
        })
        .await
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraDocument {
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    pub fov: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraPatch {
    position: Option<[f64; 3]>,
    yaw: Option<f64>,
    pitch: Option<f64>,
    fov: Option<f64>,
}

fn camera_document(c: &Camera) -> CameraDocument {
    CameraDocument {
        position: c.position.to_array(),
        yaw: c.yaw,
        pitch: c.pitch,
        fov: c.fov_y,
    }
}

async fn get_camera(State(state): State<AppState>) -> Result<Json<CameraDocument>, ApiError> {
    state.run(|s| Ok(Json(camera_document(&s.camera)))).await
}

async fn put_camera(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let patch: CameraPatch = parse_json(&body)?;
    state
        .run(move |s| {
            let mut c = s.camera;
            if let Some(p) = patch.position {
                c.position = p.into();
            }
            c.yaw = patch.yaw.unwrap_or(c.yaw);
            c.pitch = patch.pitch.unwrap_or(c.pitch);
            c.fov_y = patch.fov.unwrap_or(c.fov_y);
            c.validate()
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
            s.camera = c;
            s.snapshot += 1;
            Ok(stamped(Json(camera_document(&c)), s.snapshot))
        })
        .await
}

async fn voxelize(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    state
        .run(|s| {
            let (stats, seconds) = s.renderer.voxelize(&s.scene, s.config.grid, &s.settings)?;
            Ok(Json(json!({
                "seconds": seconds,
                "grid": s.config.grid,
                "voxels_written": stats.voxels_written,
            })))
        })
        .await
}

#[derive(Debug, Deserialize)]
struct VoxelmapQuery {
    lod: Option<usize>,
}

async fn voxelmap(
    State(state): State<AppState>,
    Query(q): Query<VoxelmapQuery>,
) -> Result<Json<Value>, ApiError> {
    let lod = q.lod.unwrap_or(0);
    state
        .run(move |s| {
            s.ensure_volume()?;
            let pyramid = s.renderer.pyramid().expect("volume just ensured");
            let cubes = export_visualization(pyramid, lod)
                .map_err(|e| ApiError::bad_request(e.to_string()))?;
            let list: Vec<Value> = cubes
                .iter()
                .map(|c| json!({ "center": c.center.to_array(), "size": c.size, "rgba": c.rgba }))
                .collect();
            Ok(Json(Value::Array(list)))
        })
        .await
}

async fn post_scene(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let text = String::from_utf8(body.to_vec())
        .map_err(|_| ApiError::bad_request("scene text must be UTF-8"))?;
    state
        .run(move |s| {
            let options = BuildOptions {
                base_dir: s.config.base_dir.clone(),
                lenient: false,
            };
            let scene = Arc::new(Scene::parse(&text, &options)?);
            let settings = scene.cone_settings(s.config.grid)?;
            s.camera = scene.camera;
            s.settings = settings;
            s.scene = scene;
            s.renderer.invalidate();
            s.snapshot += 1;
            log::info!(
                "loaded scene: {} models, {} lights, {} triangles",
                s.scene.models.len(),
                s.scene.lights.len(),
                s.scene.triangle_count()
            );
            let info = json!({
                "models": s.scene.models.len(),
                "lights": s.scene.lights.len(),
                "triangles": s.scene.triangle_count(),
            });
            Ok(stamped(Json(info), s.snapshot))
        })
        .await
}

async fn stats(State(state): State<AppState>) -> Result<Json<Value>, ApiError> {
    state
        .run(|s| {
            Ok(Json(json!({
                "frametime_s": s.last_frame.map(|f| f.seconds),
                "grid": s.config.grid,
                "cones_per_fragment": s.settings.marches_per_fragment(s.scene.lights.len()),
                "snapshot_id": s.last_frame.map(|f| f.snapshot),
                "state_snapshot_id": s.snapshot,
                "frames": s.frames,
            })))
        })
        .await
}
