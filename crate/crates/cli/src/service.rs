//! HTTP service backing the interactive viewer.
//!
//! Routes:
//! - `GET /model`: model summary and the first ten variance ratios.
//! - `GET /heads`: ids of the stored head slots.
//! - `POST /exaggerate`: `{head_id?, coeffs?, u1, u2}` to a mesh.
//! - `GET /mesh/{id}`: a stored head, or `mean` for the mean head.
//!
//! Meshes are returned in the binary layout of [`crate::payload`], or as
//! JSON with `?format=json`.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use anyhow::{bail, Context};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use carimorph_core::exaggerate::MeanHead;
use carimorph_core::mesh::load_mesh;
use carimorph_core::pca::{load_model, CariPcaModel, PcaCoeffs};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::ops::{self, HeadSlot};
use crate::payload::{encode_mesh, JsonMesh, BINARY_CONTENT_TYPE};

pub const MEAN_ID: &str = "mean";
const SUMMARY_RATIOS: usize = 10;

pub struct Session {
    pub model: CariPcaModel,
    pub mean: MeanHead,
    pub slots: BTreeMap<String, HeadSlot>,
}

impl Session {
    pub fn new(model: CariPcaModel, mean: MeanHead) -> anyhow::Result<Self> {
        ops::check_model_matches(&model, &mean)?;
        Ok(Self {
            model,
            mean,
            slots: BTreeMap::new(),
        })
    }

    /// Loads the model, the mean head and `NAME=HEAD[,CARICATURE]` slots.
    pub fn load(model: &Path, mean: &Path, slot_specs: &[String]) -> anyhow::Result<Self> {
        let model = load_model(model)?;
        let mean = MeanHead::new(load_mesh(mean)?);
        let mut session = Self::new(model, mean)?;
        for spec in slot_specs {
            let (name, head, cari) = ops::parse_slot_spec(spec)?;
            let head = load_mesh(&head)?;
            let source = cari.map(|c| ops::load_caricature_source(Path::new(&c))).transpose()?;
            session.add_slot(name, head, source.as_ref())?;
        }
        Ok(session)
    }

    pub fn add_slot(
        &mut self,
        name: String,
        head: carimorph_core::mesh::HeadMesh,
        source: Option<&ops::CaricatureSource>,
    ) -> anyhow::Result<()> {
        if name == MEAN_ID {
            bail!("slot name `{MEAN_ID}` is reserved");
        }
        if self.slots.contains_key(&name) {
            bail!("duplicate slot `{name}`");
        }
        let slot = ops::build_slot(&self.model, &self.mean, head, source).with_context(|| format!("slot `{name}`"))?;
        self.slots.insert(name, slot);
        Ok(())
    }
}

/// Shared state: readers take a snapshot, writers swap in a new session.
pub struct AppState {
    session: RwLock<Arc<Session>>,
}

impl AppState {
    pub fn new(session: Session) -> Arc<Self> {
        Arc::new(Self {
            session: RwLock::new(Arc::new(session)),
        })
    }

    pub fn snapshot(&self) -> Arc<Session> {
        self.session.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, session: Session) {
        *self.session.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(session);
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ModelSummary {
    pub n_v: usize,
    pub d: usize,
    pub n_faces: usize,
    pub degenerate: bool,
    pub total_variance: f64,
    pub provenance: String,
    pub variance_ratios: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct HeadEntry {
    pub id: String,
    pub n_v: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExaggerateRequest {
    #[serde(default)]
    pub head_id: Option<String>,
    #[serde(default)]
    pub coeffs: Option<Vec<f64>>,
    pub u1: f64,
    pub u2: f64,
}

#[derive(Debug, Deserialize)]
pub struct FormatQuery {
    #[serde(default)]
    format: Option<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Binary,
    Json,
}

fn parse_format(query: Result<Query<FormatQuery>, QueryRejection>) -> ApiResult<Format> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    match q.format.as_deref() {
        None | Some("binary") => Ok(Format::Binary),
        Some("json") => Ok(Format::Json),
        Some(other) => Err(ApiError::bad_request(format!("unknown format `{other}`"))),
    }
}

fn mesh_response(coords: &[f64], faces: &[[usize; 3]], format: Format) -> ApiResult<Response> {
    match format {
        Format::Json => Ok(Json(JsonMesh::new(coords, faces)).into_response()),
        Format::Binary => {
            let bytes = encode_mesh(coords, faces).map_err(|e| ApiError::bad_request(e.to_string()))?;
            Ok(([(header::CONTENT_TYPE, BINARY_CONTENT_TYPE)], bytes).into_response())
        }
    }
}

async fn model_summary(State(state): State<Arc<AppState>>) -> Json<ModelSummary> {
    let s = state.snapshot();
    let m = &s.model;
    Json(ModelSummary {
        n_v: m.n_vertices(),
        d: m.n_components(),
        n_faces: s.mean.mesh().faces().len(),
        degenerate: m.is_degenerate(),
        total_variance: m.total_variance(),
        provenance: m.provenance().to_string(),
        variance_ratios: m.variance_ratios().iter().take(SUMMARY_RATIOS).copied().collect(),
    })
}

async fn list_heads(State(state): State<Arc<AppState>>) -> Json<Vec<HeadEntry>> {
    let s = state.snapshot();
    Json(
        s.slots
            .iter()
            .map(|(id, slot)| HeadEntry {
                id: id.clone(),
                n_v: slot.head.n_vertices(),
            })
            .collect(),
    )
}

/// The vertex coordinates a request resolves to.
pub fn resolve_exaggeration(session: &Session, req: &ExaggerateRequest) -> ApiResult<Vec<f64>> {
    let slot = match &req.head_id {
        Some(id) => Some(
            session
                .slots
                .get(id)
                .ok_or_else(|| ApiError::not_found(format!("unknown head `{id}`")))?,
        ),
        None => None,
    };
    let coords = match (&req.coeffs, slot) {
        (None, None) => return Err(ApiError::bad_request("request needs `head_id` or `coeffs`")),
        (None, Some(slot)) => ops::slot_control(&session.mean, slot, req.u1, req.u2),
        (Some(c), slot) => {
            let coeffs = PcaCoeffs::from_slice(c).map_err(|e| ApiError::bad_request(e.to_string()))?;
            ops::coeffs_control(&session.model, &session.mean, &coeffs, slot, req.u1, req.u2)
        }
    }
    .map_err(|e| ApiError::bad_request(format!("{e:#}")))?;
    Ok(coords.as_slice().to_vec())
}

async fn exaggerate(
    State(state): State<Arc<AppState>>,
    query: Result<Query<FormatQuery>, QueryRejection>,
    body: Result<Json<ExaggerateRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let format = parse_format(query)?;
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let s = state.snapshot();
    let coords = resolve_exaggeration(&s, &req)?;
    mesh_response(&coords, s.mean.mesh().faces(), format)
}

async fn get_mesh(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    query: Result<Query<FormatQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let format = parse_format(query)?;
    let s = state.snapshot();
    let mesh = if id == MEAN_ID {
        s.mean.mesh()
    } else {
        &s.slots
            .get(&id)
            .ok_or_else(|| ApiError::not_found(format!("unknown head `{id}`")))?
            .head
    };
    mesh_response(mesh.coords().as_slice(), mesh.faces(), format)
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/model", get(model_summary))
        .route("/heads", get(list_heads))
        .route("/exaggerate", post(exaggerate))
        .route("/mesh/{id}", get(get_mesh))
        .with_state(state)
}

pub async fn bind(addr: &str) -> anyhow::Result<TcpListener> {
    TcpListener::bind(addr).await.with_context(|| format!("cannot listen on {addr}"))
}

/// Serves until the process receives Ctrl-C.
pub async fn serve(listener: TcpListener, state: Arc<AppState>) -> anyhow::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .context("server failed")
}
