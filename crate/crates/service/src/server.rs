//! HTTP API.
//!
//! | route | body / query | reply |
//! |---|---|---|
//! | `POST /recommend` | `{targetField, context, options?}` | `{recommendations: [...]}` |
//! | `GET /health` | | `{status, rules}` |
//! | `GET /rules` | `?field=&fieldType=` | `{count, rules: [...]}` |
//! | `GET /templates` | | `{templates: [{templateId, trainCount, fields}]}` |
//! | `POST /reload` | | `{status, rules}` |

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use valrec_core::io::RuleDoc;
use valrec_core::model::{FieldSlot, TermRef};

use crate::engine::Engine;
use crate::wire::{parse_recommend_request, RecommendResponse, WireField, WireRecommendation};

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/recommend", post(recommend))
        .route("/health", get(health))
        .route("/rules", get(rules))
        .route("/templates", get(templates))
        .route("/reload", post(reload))
        .with_state(engine)
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn recommend(State(engine): State<Arc<Engine>>, body: Bytes) -> Response {
    let query = match parse_recommend_request(&body) {
        Ok(q) => q,
        Err(e) => return error(StatusCode::BAD_REQUEST, e),
    };
    let state = engine.state();
    match state.recommend(&query.context, &query.target, query.options.as_ref()) {
        Ok(recs) => Json(RecommendResponse { recommendations: recs.iter().map(WireRecommendation::from).collect() })
            .into_response(),
        Err(e @ valrec_core::Error::TargetInContext(_)) => error(StatusCode::BAD_REQUEST, e.to_string()),
        // A store without training counts cannot answer empty contexts.
        Err(e @ valrec_core::Error::MissingTrainCount(_)) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "rules": engine.state().index.len() }))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RulesQuery {
    field: Option<String>,
    field_type: Option<String>,
}

async fn rules(State(engine): State<Arc<Engine>>, Query(q): Query<RulesQuery>) -> Response {
    let state = engine.state();
    let m = state.index.mappings();
    let selected: Vec<RuleDoc> = match (&q.field, &q.field_type) {
        (None, None) => state.index.rules().iter().map(|r| RuleDoc::from_rule(r, m)).collect(),
        _ => {
            let term = match q.field_type.as_deref().filter(|t| !t.is_empty()).map(TermRef::new).transpose() {
                Ok(t) => t,
                Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
            };
            // A bare fieldType still needs a label to form a slot.
            let label = q.field.clone().unwrap_or_else(|| "field".into());
            let slot = match FieldSlot::new(label, term) {
                Ok(s) => s,
                Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string()),
            };
            state.index.select_rules(&slot).into_iter().map(|r| RuleDoc::from_rule(r, m)).collect()
        }
    };
    Json(json!({ "count": selected.len(), "rules": selected })).into_response()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct TemplateInfo {
    template_id: String,
    train_count: Option<u64>,
    fields: Vec<WireField>,
}

async fn templates(State(engine): State<Arc<Engine>>) -> Json<serde_json::Value> {
    let state = engine.state();
    let list: Vec<TemplateInfo> = state
        .index
        .templates()
        .into_iter()
        .map(|(template_id, fields)| TemplateInfo {
            train_count: state.index.train_count(&template_id),
            template_id,
            fields: fields
                .iter()
                .map(|f| WireField {
                    field_label: f.label().to_string(),
                    field_type: f.term().map(|t| t.as_str().to_string()),
                })
                .collect(),
        })
        .collect();
    Json(json!({ "templates": list }))
}

async fn reload(State(engine): State<Arc<Engine>>) -> Response {
    // Loading is blocking file I/O.
    match tokio::task::spawn_blocking(move || engine.reload()).await {
        Ok(Ok(n)) => Json(json!({ "status": "reloaded", "rules": n })).into_response(),
        Ok(Err(e)) => error(StatusCode::CONFLICT, format!("{e:#}")),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

/// Binds and serves until Ctrl-C.
pub async fn serve(engine: Arc<Engine>, bind: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
