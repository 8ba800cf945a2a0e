use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::analyze::{analyze, overlay_png, restage, AnalyzeOptions, StageReport, PIPELINE_VERSION};
use crate::error::Error;
use crate::geometry::StageThresholds;
use crate::neural::ModelGraph;
use crate::phantom::{render, PhantomScene, ToothTruth};
use crate::raster::{io, Mask};

/// Default request body limit (16 MiB).
pub const DEFAULT_BODY_LIMIT: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone)]
struct Stored {
    report: StageReport,
    overlay: Vec<u8>,
}

/// Shared service state: the optional classifier is read-only, the report
/// store is the only mutable part.
#[derive(Debug, Clone)]
pub struct ServiceState {
    model: Option<Arc<ModelGraph>>,
    store: Arc<RwLock<HashMap<String, Stored>>>,
    body_limit: usize,
}

impl ServiceState {
    pub fn new(model: Option<ModelGraph>) -> Self {
        Self {
            model: model.map(Arc::new),
            store: Arc::default(),
            body_limit: DEFAULT_BODY_LIMIT,
        }
    }

    pub fn with_body_limit(mut self, bytes: usize) -> Self {
        self.body_limit = bytes;
        self
    }

    fn run(&self, tooth: &Mask, bone: &Mask, cej: &Mask, th: StageThresholds) -> Result<(String, StageReport), ApiError> {
        let opts = AnalyzeOptions {
            thresholds: th,
            ..AnalyzeOptions::default()
        };
        let report = analyze(tooth, bone, cej, self.model.as_deref(), &opts)?;
        let overlay = overlay_png(tooth, bone, cej)?;
        let id = report.image_id.clone();
        self.store.write().expect("store lock poisoned").insert(
            id.clone(),
            Stored {
                report: report.clone(),
                overlay,
            },
        );
        Ok((id, report))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no report with id {id:?}"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportResponse {
    pub id: String,
    pub report: StageReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PhantomMasks {
    pub tooth: String,
    pub bone: String,
    pub cej: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PhantomResponse {
    pub id: String,
    pub report: StageReport,
    /// Base64-encoded PNG masks.
    pub masks: PhantomMasks,
    pub truth: Vec<ToothTruth>,
}

fn parse_threshold(name: &str, text: &str) -> Result<f64, ApiError> {
    text.trim()
        .parse()
        .map_err(|_| ApiError::bad_request(format!("{name} is not a number: {text:?}")))
}

async fn analyze_handler(State(st): State<ServiceState>, mut mp: Multipart) -> Result<Json<ReportResponse>, ApiError> {
    let mut masks: HashMap<String, Mask> = HashMap::new();
    let mut th = StageThresholds::default();
    while let Some(field) = mp
        .next_field()
        .await
        .map_err(|e| ApiError::new(e.status(), e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::new(e.status(), e.body_text()))?;
        match name.as_str() {
            "tooth" | "bone" | "cej" => {
                let m = io::decode_mask(&bytes).map_err(|e| ApiError::bad_request(format!("{name}: {e}")))?;
                masks.insert(name, m);
            }
            "t1" => th.t1 = parse_threshold("t1", &String::from_utf8_lossy(&bytes))?,
            "t2" => th.t2 = parse_threshold("t2", &String::from_utf8_lossy(&bytes))?,
            other => return Err(ApiError::bad_request(format!("unexpected field {other:?}"))),
        }
    }
    let get = |k: &str| masks.get(k).ok_or_else(|| ApiError::bad_request(format!("missing {k} mask")));
    let (tooth, bone, cej) = (get("tooth")?, get("bone")?, get("cej")?);
    let (id, report) = st.run(tooth, bone, cej, th)?;
    Ok(Json(ReportResponse { id, report }))
}

async fn report_handler(State(st): State<ServiceState>, Path(id): Path<String>) -> Result<Json<StageReport>, ApiError> {
    let store = st.store.read().expect("store lock poisoned");
    store
        .get(&id)
        .map(|s| Json(s.report.clone()))
        .ok_or_else(|| ApiError::not_found(&id))
}

async fn restage_handler(
    State(st): State<ServiceState>,
    Path(id): Path<String>,
    body: Result<Json<StageThresholds>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<ReportResponse>, ApiError> {
    let Json(th) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let mut store = st.store.write().expect("store lock poisoned");
    let stored = store.get_mut(&id).ok_or_else(|| ApiError::not_found(&id))?;
    let report = restage(&stored.report, th)?;
    stored.report = report.clone();
    Ok(Json(ReportResponse { id, report }))
}

async fn phantom_handler(
    State(st): State<ServiceState>,
    body: Result<Json<PhantomScene>, axum::extract::rejection::JsonRejection>,
) -> Result<Json<PhantomResponse>, ApiError> {
    let Json(scene) = body.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    let r = render(&scene)?;
    let (id, report) = st.run(&r.tooth, &r.bone, &r.cej, StageThresholds::default())?;
    let enc = |m: &Mask| -> Result<String, ApiError> { Ok(BASE64.encode(io::encode_mask(m)?)) };
    Ok(Json(PhantomResponse {
        id,
        report,
        masks: PhantomMasks {
            tooth: enc(&r.tooth)?,
            bone: enc(&r.bone)?,
            cej: enc(&r.cej)?,
        },
        truth: r.truth,
    }))
}

async fn overlay_handler(State(st): State<ServiceState>, Path(file): Path<String>) -> Result<Response, ApiError> {
    let id = file.strip_suffix(".png").unwrap_or(&file);
    let store = st.store.read().expect("store lock poisoned");
    let stored = store.get(id).ok_or_else(|| ApiError::not_found(id))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], stored.overlay.clone()).into_response())
}

async fn health_handler() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": PIPELINE_VERSION }))
}

pub fn router(state: ServiceState) -> Router {
    let limit = state.body_limit;
    Router::new()
        .route("/api/analyze", post(analyze_handler))
        .route("/api/report/{id}", get(report_handler))
        .route("/api/restage/{id}", post(restage_handler))
        .route("/api/phantom", post(phantom_handler))
        .route("/api/overlay/{file}", get(overlay_handler))
        .route("/api/health", get(health_handler))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(state)
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(addr: SocketAddr, state: ServiceState) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await?;
    Ok(())
}
