//! HTTP service: `POST /v1/visualize`, `GET /v1/charts`, `GET /v1/health`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde::Deserialize;
use serde_json::json;

use macroviz_core::{Mode, Pipeline, PipelineError, RequestOptions, VisualizeRequest};

/// JSON form of a visualize request.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisualizeBody {
    pub csv_base64: String,
    pub prompt: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub options: RequestOptions,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, message: message.into() }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::CsvTooLarge { .. } | PipelineError::TooManyRows { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            PipelineError::Setup(_) => StatusCode::INTERNAL_SERVER_ERROR,
            PipelineError::EmptyPrompt | PipelineError::BadCsv(_) => StatusCode::BAD_REQUEST,
        };
        Self { status, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    // Base64 inflates by 4/3; leave room for the other fields.
    let body_limit = pipeline.config().limits.max_csv_bytes / 3 * 4 + 64 * 1024;
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/charts", get(charts))
        .route("/v1/visualize", post(visualize))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(pipeline)
}

pub async fn serve(pipeline: Pipeline, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(pipeline)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn charts(State(pipeline): State<Arc<Pipeline>>) -> Json<macroviz_core::Catalog> {
    Json(pipeline.catalog().clone())
}

async fn visualize(State(pipeline): State<Arc<Pipeline>>, req: Request) -> Result<Response, ApiError> {
    let content_type = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_ascii_lowercase();
    let request = if content_type.starts_with("multipart/form-data") {
        let multipart = Multipart::from_request(req, &()).await.map_err(|e| ApiError::bad_request(e.body_text()))?;
        from_multipart(multipart).await?
    } else if content_type.starts_with("application/json") {
        let Json(body) = Json::<VisualizeBody>::from_request(req, &()).await.map_err(|e| ApiError::bad_request(e.body_text()))?;
        from_json(body)?
    } else {
        return Err(ApiError {
            status: StatusCode::UNSUPPORTED_MEDIA_TYPE,
            message: "expected application/json or multipart/form-data".into(),
        });
    };
    let response = tokio::task::spawn_blocking(move || pipeline.run(&request))
        .await
        .map_err(|e| ApiError { status: StatusCode::INTERNAL_SERVER_ERROR, message: e.to_string() })??;
    Ok(([(header::CONTENT_TYPE, "application/json")], response.to_json()).into_response())
}

pub fn from_json(body: VisualizeBody) -> Result<VisualizeRequest, ApiError> {
    let csv = base64::engine::general_purpose::STANDARD
        .decode(body.csv_base64.trim())
        .map_err(|e| ApiError::bad_request(format!("csv_base64: {e}")))?;
    let mut request = VisualizeRequest::new(csv, body.prompt).with_mode(body.mode);
    request.options = body.options;
    Ok(request)
}

/// Fields: `csv` or `file` (the data), `prompt`, optional `mode`, and
/// optional `options` as a JSON object.
async fn from_multipart(mut multipart: Multipart) -> Result<VisualizeRequest, ApiError> {
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::bad_request(e.body_text());
    let (mut csv, mut prompt, mut mode, mut options) = (None, None, Mode::default(), RequestOptions::default());
    while let Some(field) = multipart.next_field().await.map_err(bad)? {
        let name = field.name().unwrap_or_default().to_string();
        match name.as_str() {
            "csv" | "file" => csv = Some(field.bytes().await.map_err(bad)?.to_vec()),
            "prompt" => prompt = Some(field.text().await.map_err(bad)?),
            "mode" => {
                let text = field.text().await.map_err(bad)?;
                mode = serde_json::from_value(json!(text.trim()))
                    .map_err(|_| ApiError::bad_request(format!("unknown mode {text:?}")))?;
            }
            "options" => {
                let text = field.text().await.map_err(bad)?;
                options = serde_json::from_str(&text).map_err(|e| ApiError::bad_request(format!("options: {e}")))?;
            }
            other => return Err(ApiError::bad_request(format!("unknown field {other:?}"))),
        }
    }
    let csv = csv.ok_or_else(|| ApiError::bad_request("missing csv field"))?;
    let prompt = prompt.ok_or_else(|| ApiError::bad_request("missing prompt field"))?;
    let mut request = VisualizeRequest::new(csv, prompt).with_mode(mode);
    request.options = options;
    Ok(request)
}
