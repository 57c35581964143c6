use std::net::SocketAddr;

use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use scefis_core::metrics::io::{encode_gray_png, encode_mask_png};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Result, ServiceError};
use crate::AppState;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub dataset: String,
    pub config: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub image_id: String,
    pub mask_png: String,
}

#[derive(Debug, Serialize)]
pub struct FeedbackResponse {
    pub image_id: String,
    pub t_b: f64,
    pub best_score: f64,
    /// Jaccard of the served proposal against the submitted mask.
    pub score: f64,
    pub rule_count: usize,
    pub m_rows: usize,
    pub remaining: usize,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> Result<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

async fn create(
    State(app): State<AppState>,
    Json(req): Json<CreateRequest>,
) -> Result<(StatusCode, Json<Value>)> {
    let s = blocking(move || app.create_session(&req.dataset, &req.config)).await?;
    let view = s.view();
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "session_id": s.id,
            "dataset": view.state.dataset,
            "config": view.state.config,
            "queue_len": view.state.queue.len(),
            "rule_count": view.state.rule_count(),
        })),
    ))
}

async fn next(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>> {
    let s = app.session(&id)?;
    blocking(move || {
        let view = s.view();
        let Some(head) = view.head(&s.dataset)? else {
            return Ok(Json(json!({
                "status": "complete",
                "session_id": s.id,
                "processed": view.state.history.entries.len(),
                "rule_count": view.state.rule_count(),
            })));
        };
        let idx = s
            .dataset
            .index_of(&head.image_id)
            .expect("head is in the dataset");
        let image = &s.dataset.sample(idx).image;
        let (rows, cols) = image.dims();
        Ok(Json(json!({
            "status": "pending",
            "session_id": s.id,
            "image_id": head.image_id,
            "width": cols,
            "height": rows,
            "image_png": B64.encode(encode_gray_png(image)?),
            "mask_png": B64.encode(encode_mask_png(&head.proposal.mask)?),
            "t_star": head.proposal.t_star,
            "t_o": head.proposal.t_o,
            "rule_count": head.proposal.rule_count,
            "remaining": view.state.queue.len(),
        })))
    })
    .await
}

async fn feedback(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<FeedbackRequest>,
) -> Result<Json<FeedbackResponse>> {
    let s = app.session(&id)?;
    blocking(move || {
        let (e, view) = s.submit(&req.image_id, &req.mask_png)?;
        Ok(Json(FeedbackResponse {
            image_id: e.image_id,
            t_b: e.t_b,
            best_score: e.best_score,
            score: e.score,
            rule_count: e.rule_count,
            m_rows: e.m_rows,
            remaining: view.state.queue.len(),
        }))
    })
    .await
}

async fn log(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>> {
    let view = app.session(&id)?.view();
    let h = &view.state.history;
    let summary = if h.entries.is_empty() {
        None
    } else {
        h.summary().ok()
    };
    Ok(Json(json!({
        "session_id": id,
        "entries": h.entries,
        "skipped": h.skipped,
        "summary": summary,
    })))
}

async fn rule_stats(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>> {
    let view = app.session(&id)?.view();
    let st = &view.state;
    Ok(Json(json!({
        "session_id": id,
        "trajectory": st.trajectory(),
        "rule_count": st.rule_count(),
        "m_rows": st.model.segmenter.rule_base.m_matrix.len(),
        "processed": st.history.entries.len(),
        "remaining": st.queue.len(),
    })))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/next", get(next))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/log", get(log))
        .route("/sessions/{id}/rules/stats", get(rule_stats))
        .layer(DefaultBodyLimit::max(64 << 20))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
