use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::Response;
use chrono::NaiveDate;
use covradar_core::ingest::CityName;
use covradar_core::{NormalizationMode, TimeWindow};
use serde::{Deserialize, Serialize};

use crate::{ApiError, AppState, ServiceSnapshot, BUILD_ID_HEADER};

type Params = Query<HashMap<String, String>>;

fn current(state: &AppState) -> Result<Arc<ServiceSnapshot>, ApiError> {
    state.snapshot().ok_or_else(ApiError::no_snapshot)
}

fn with_build(mut resp: Response, build_id: u64) -> Response {
    resp.headers_mut()
        .insert(BUILD_ID_HEADER, HeaderValue::from(build_id));
    resp
}

fn json<T: Serialize>(snap: &ServiceSnapshot, body: &T) -> Result<Response, ApiError> {
    let bytes = serde_json::to_vec(body)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    let resp = Response::builder()
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(bytes))
        .expect("static response parts");
    Ok(with_build(resp, snap.build_id))
}

fn date_param(q: &HashMap<String, String>, key: &str) -> Result<Option<NaiveDate>, String> {
    q.get(key)
        .map(|raw| {
            NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                .map_err(|_| format!("'{key}' is not an ISO date: '{raw}'"))
        })
        .transpose()
}

fn window_param(q: &HashMap<String, String>) -> Result<TimeWindow, ApiError> {
    let a = date_param(q, "a").map_err(ApiError::bad_window)?;
    let b = date_param(q, "b").map_err(ApiError::bad_window)?;
    let (Some(a), Some(b)) = (a, b) else {
        return Err(ApiError::bad_window("both 'a' and 'b' are required"));
    };
    TimeWindow::new(a, b).map_err(|e| ApiError::bad_window(e.to_string()))
}

fn mode_param(q: &HashMap<String, String>) -> Result<NormalizationMode, ApiError> {
    match q.get("mode") {
        None => Ok(NormalizationMode::default()),
        Some(raw) => raw
            .parse()
            .map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, "bad_mode", e)),
    }
}

#[derive(Serialize)]
struct Status {
    build_id: u64,
    built_at: String,
    cities: usize,
    k: usize,
    first_date: Option<NaiveDate>,
    last_date: Option<NaiveDate>,
    warnings: usize,
}

pub async fn status(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let snap = current(&state)?;
    let range = snap.analysis.snapshot().date_range();
    json(
        &snap,
        &Status {
            build_id: snap.build_id,
            built_at: snap.built_at.to_rfc3339(),
            cities: snap.analysis.snapshot().city_count(),
            k: snap.analysis.index().k(),
            first_date: range.map(|r| r.first),
            last_date: range.map(|r| r.last),
            warnings: snap.warnings.len(),
        },
    )
}

pub async fn cities(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let snap = current(&state)?;
    json(&snap, &snap.analysis.cities())
}

pub async fn neighborhood(
    State(state): State<Arc<AppState>>,
    Path(city): Path<String>,
    Query(q): Params,
) -> Result<Response, ApiError> {
    let snap = current(&state)?;
    let as_of = date_param(&q, "as_of")
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_date", e))?;
    let view = snap.analysis.neighborhood(&CityName::new(&city), as_of)?;
    json(&snap, &view)
}

pub async fn curves(
    State(state): State<Arc<AppState>>,
    Path(city): Path<String>,
    Query(q): Params,
) -> Result<Response, ApiError> {
    let snap = current(&state)?;
    let window = window_param(&q)?;
    let bundle = snap.analysis.curves(&CityName::new(&city), window)?;
    json(&snap, &bundle)
}

pub async fn glyph(
    State(state): State<Arc<AppState>>,
    Path(city): Path<String>,
    Query(q): Params,
) -> Result<Response, ApiError> {
    let snap = current(&state)?;
    let window = window_param(&q)?;
    let mode = mode_param(&q)?;
    let glyph = snap.analysis.glyph(&CityName::new(&city), window, mode)?;
    json(&snap, &glyph)
}

#[derive(Serialize)]
struct IsolationBody {
    mean: f64,
    std: f64,
    sample_count: usize,
    display: String,
}

pub async fn isolation(
    State(state): State<Arc<AppState>>,
    Path(city): Path<String>,
    Query(q): Params,
) -> Result<Response, ApiError> {
    let snap = current(&state)?;
    let window = window_param(&q)?;
    match snap.analysis.isolation(&CityName::new(&city), window)? {
        Some(st) => json(
            &snap,
            &IsolationBody {
                mean: st.mean,
                std: st.std,
                sample_count: st.sample_count,
                display: st.display(),
            },
        ),
        None => {
            let resp = Response::builder()
                .status(StatusCode::NO_CONTENT)
                .body(Body::empty())
                .expect("static response parts");
            Ok(with_build(resp, snap.build_id))
        }
    }
}

pub async fn map(
    State(state): State<Arc<AppState>>,
    Query(q): Params,
) -> Result<Response, ApiError> {
    let snap = current(&state)?;
    let no_boundaries = || {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "no_boundaries",
            "no boundary file configured",
        )
    };
    let doc = match q.get("city") {
        None => snap.map(None).ok_or_else(no_boundaries)?,
        Some(raw) => {
            let city = CityName::new(raw);
            let view = snap.analysis.neighborhood(&city, None)?;
            snap.map(Some((&city, &view.members)))
                .ok_or_else(no_boundaries)?
        }
    };
    let doc = doc.map_err(|()| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "no_geometry",
            "focus city has no unique feature in the boundary file",
        )
    })?;
    json(&snap, &doc)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReloadRequest {
    data_dir: Option<PathBuf>,
    k: Option<usize>,
}

#[derive(Serialize)]
struct ReloadResponse {
    build_id: u64,
}

pub async fn reload(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: ReloadRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ReloadRequest::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.to_string()))?
    };
    match state.reload(req.data_dir, req.k).await {
        Ok(build_id) => {
            let snap = current(&state)?;
            let bytes =
                serde_json::to_vec(&ReloadResponse { build_id }).expect("plain struct serializes");
            let resp = Response::builder()
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(bytes))
                .expect("static response parts");
            Ok(with_build(resp, snap.build_id))
        }
        Err(failure) => {
            let mut err = ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "ingest_failed",
                failure.errors.first().cloned().unwrap_or_default(),
            );
            err.errors = Some(failure.errors);
            Err(err)
        }
    }
}

pub async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}
