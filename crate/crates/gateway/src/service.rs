//! JSON-over-HTTP API. Every request works on a snapshot of the current
//! model; `PUT /api/model` swaps the snapshot atomically.

use std::future::Future;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use morphdes::{json, SystemModel};
use serde::Deserialize;
use serde_json::Value;
use tokio::net::TcpListener;

use crate::api::{self, ApiError, ApiResult, DecisionRef, Failure, RankQuery};

#[derive(Clone)]
pub struct AppState {
    model: Arc<RwLock<Arc<SystemModel>>>,
}

impl AppState {
    pub fn new(model: SystemModel) -> Self {
        AppState {
            model: Arc::new(RwLock::new(Arc::new(model))),
        }
    }

    pub fn snapshot(&self) -> Arc<SystemModel> {
        self.model.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn replace(&self, model: SystemModel) {
        *self.model.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(model);
    }
}

fn json_response(status: u16, body: String) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        format!("{body}\n"),
    )
        .into_response()
}

fn reply(result: ApiResult<String>) -> Response {
    match result {
        Ok(body) => json_response(200, body),
        Err(e) => json_response(e.failure.http_status(), e.body),
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError::new(Failure::BadRequest, "bad-request", message)
}

/// Runs a solver call off the async workers.
async fn blocking(f: impl FnOnce() -> ApiResult<String> + Send + 'static) -> Response {
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => reply(result),
        Err(e) => json_response(500, json::message_error_json("internal", e.to_string())),
    }
}

async fn get_model(State(state): State<AppState>) -> Response {
    json_response(200, json::model_to_json(&state.snapshot()))
}

async fn put_model(State(state): State<AppState>, body: String) -> Response {
    match api::load_model(&body) {
        Ok(model) => {
            let doc = json::model_to_json(&model);
            state.replace(model);
            json_response(200, doc)
        }
        Err(e) => json_response(422, e.body()),
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RankBody {
    p: Option<f64>,
    q: Option<f64>,
    #[serde(default)]
    recompute: bool,
}

async fn post_rank(State(state): State<AppState>, body: String) -> Response {
    let parsed = if body.trim().is_empty() {
        Ok(RankBody::default())
    } else {
        serde_json::from_str::<RankBody>(&body)
            .map_err(|e| bad_request(format!("invalid rank request: {e}")))
    };
    let query = match parsed {
        Ok(b) => RankQuery {
            p: b.p,
            q: b.q,
            recompute: b.recompute,
        },
        Err(e) => return reply(Err(e)),
    };
    let model = state.snapshot();
    blocking(move || api::rank(&model, &query)).await
}

#[derive(Deserialize)]
struct SolveParams {
    node: Option<String>,
    carry_layers: Option<usize>,
    #[serde(default)]
    recompute: bool,
}

fn query_params<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(t)| t).map_err(|e| bad_request(e.body_text()))
}

async fn get_solve(
    State(state): State<AppState>,
    q: Result<Query<SolveParams>, QueryRejection>,
) -> Response {
    let params = match query_params(q) {
        Ok(p) => p,
        Err(e) => return reply(Err(e)),
    };
    let model = state.snapshot();
    blocking(move || {
        let options = api::solve_options(params.carry_layers.unwrap_or(1), params.recompute)?;
        api::solve(&model, params.node.as_deref(), options).map(|s| json::frontier_json(&s))
    })
    .await
}

async fn get_space(State(state): State<AppState>) -> Response {
    json_response(200, api::space(&state.snapshot()))
}

#[derive(Deserialize)]
struct BottleneckParams {
    node: String,
    decision: usize,
    carry_layers: Option<usize>,
}

async fn get_bottlenecks(
    State(state): State<AppState>,
    q: Result<Query<BottleneckParams>, QueryRejection>,
) -> Response {
    let params = match query_params(q) {
        Ok(p) => p,
        Err(e) => return reply(Err(e)),
    };
    let model = state.snapshot();
    blocking(move || {
        let options = api::solve_options(params.carry_layers.unwrap_or(1), false)?;
        api::bottlenecks(&model, &params.node, params.decision, options)
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WhatIfBody {
    node: String,
    decision: Value,
    #[serde(default)]
    actions: Vec<String>,
    carry_layers: Option<usize>,
}

async fn post_whatif(State(state): State<AppState>, body: String) -> Response {
    let req: WhatIfBody = match serde_json::from_str(&body) {
        Ok(r) => r,
        Err(e) => return reply(Err(bad_request(format!("invalid what-if request: {e}")))),
    };
    let decision = match req.decision {
        Value::Number(ref n) => match n.as_u64() {
            Some(i) => DecisionRef::Index(i as usize),
            None => {
                return reply(Err(bad_request(
                    "decision index must be a non-negative integer",
                )))
            }
        },
        Value::Object(_) => DecisionRef::Object(req.decision),
        _ => {
            return reply(Err(bad_request(
                "decision must be an index or a decision object",
            )))
        }
    };
    let model = state.snapshot();
    blocking(move || {
        let options = api::solve_options(req.carry_layers.unwrap_or(1), false)?;
        let specs = api::parse_actions(&req.actions)?;
        api::whatif(&model, &req.node, &decision, &specs, options)
    })
    .await
}

async fn fallback() -> Response {
    json_response(
        404,
        json::message_error_json("not-found", "no such endpoint"),
    )
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/model", get(get_model).put(put_model))
        .route("/api/rank", post(post_rank))
        .route("/api/solve", get(get_solve))
        .route("/api/space", get(get_space))
        .route("/api/bottlenecks", get(get_bottlenecks))
        .route("/api/whatif", post(post_whatif))
        .fallback(fallback)
        .with_state(state)
}

/// Binds 127.0.0.1:`port`; fails when the port is taken.
pub async fn bind(port: u16) -> std::io::Result<TcpListener> {
    TcpListener::bind(("127.0.0.1", port)).await
}

pub async fn serve(
    listener: TcpListener,
    model: SystemModel,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(AppState::new(model)))
        .with_graceful_shutdown(shutdown)
        .await
}
