//! HTTP front end over the signal engine.
//!
//! `POST /v1/threshold`, `POST /v1/signal` and `GET /healthz` take and return
//! JSON. Malformed requests get a 400 listing each bad field. Pipeline faults
//! never produce a 5xx on `/v1/signal`: the body is always a valid signal,
//! falling back to `f_exp = 0`.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Map, Value};

use expiry_core::signal::{
    BreakerSnapshot, BreakerState, CacheStats, ExpirySignal, Provenance, SignalEngine,
};
use expiry_core::TimePoint;

pub struct AppState {
    pub engine: SignalEngine,
    pub test_hooks: bool,
}

impl AppState {
    pub fn new(engine: SignalEngine, test_hooks: bool) -> Arc<Self> {
        Arc::new(Self { engine, test_hooks })
    }
}

#[derive(Debug, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

fn bad_request(errors: Vec<FieldError>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "errors": errors }))).into_response()
}

/// Field-by-field request reader collecting every problem.
struct Fields {
    map: Map<String, Value>,
    errors: Vec<FieldError>,
}

impl Fields {
    fn parse(body: &[u8], allowed: &[&str]) -> Result<Self, Response> {
        let value: Value = serde_json::from_slice(body).map_err(|e| {
            bad_request(vec![FieldError {
                field: "body".into(),
                message: format!("invalid JSON: {e}"),
            }])
        })?;
        let Value::Object(map) = value else {
            return Err(bad_request(vec![FieldError {
                field: "body".into(),
                message: "expected a JSON object".into(),
            }]));
        };
        let errors = map
            .keys()
            .filter(|k| !allowed.contains(&k.as_str()))
            .map(|k| FieldError {
                field: k.clone(),
                message: "unknown field".into(),
            })
            .collect();
        Ok(Self { map, errors })
    }

    fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    fn text(&mut self, field: &str) -> Option<String> {
        match self.map.get(field) {
            Some(Value::String(s)) if !s.trim().is_empty() => Some(s.clone()),
            Some(Value::String(_)) => {
                self.fail(field, "must not be empty");
                None
            }
            Some(_) => {
                self.fail(field, "must be a string");
                None
            }
            None => {
                self.fail(field, "is required");
                None
            }
        }
    }

    fn date(&mut self, field: &str) -> Option<TimePoint> {
        let raw = self.text(field)?;
        match raw.parse::<TimePoint>() {
            Ok(t) if t.depth() == 3 => Some(t),
            Ok(_) => {
                self.fail(field, "must be a full YYYY-MM-DD date");
                None
            }
            Err(e) => {
                self.fail(field, e.to_string());
                None
            }
        }
    }

    fn finish(self) -> Result<(), Response> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(bad_request(self.errors))
        }
    }
}

#[derive(Debug, Serialize)]
struct ThresholdBody {
    t_exp: Option<TimePoint>,
    provenance: Provenance,
    s_self: Option<f64>,
}

async fn threshold(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let mut f = match Fields::parse(&body, &["query", "search_time"]) {
        Ok(f) => f,
        Err(r) => return r,
    };
    let query = f.text("query");
    let search_time = f.date("search_time");
    if let Err(r) = f.finish() {
        return r;
    }
    let (query, search_time) = (query.expect("checked"), search_time.expect("checked"));
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || worker.engine.get_threshold(&query, &search_time)).await;
    let body = match result {
        Ok(r) => ThresholdBody {
            t_exp: r.t_exp,
            provenance: r.provenance,
            s_self: r.s_self,
        },
        Err(_) => ThresholdBody {
            t_exp: None,
            provenance: Provenance::Fallback,
            s_self: None,
        },
    };
    Json(body).into_response()
}

async fn signal(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let mut f = match Fields::parse(&body, &["query", "doc_time", "search_time"]) {
        Ok(f) => f,
        Err(r) => return r,
    };
    let query = f.text("query");
    let doc_time = f.date("doc_time");
    let search_time = f.date("search_time");
    if let Err(r) = f.finish() {
        return r;
    }
    let (query, doc_time, search_time) = (
        query.expect("checked"),
        doc_time.expect("checked"),
        search_time.expect("checked"),
    );
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        worker.engine.make_signal(&query, &doc_time, &search_time)
    })
    .await;
    let signal = result.unwrap_or_else(|_| ExpirySignal {
        f_exp: 0,
        t_exp_used: None,
        provenance: Provenance::Fallback,
        breaker_state: state.engine.breaker().state(),
    });
    Json(signal).into_response()
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    breaker: BreakerSnapshot,
    cache: CacheStats,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    let breaker = state.engine.breaker().snapshot();
    Json(Health {
        status: if breaker.state == BreakerState::Closed { "ok" } else { "degraded" },
        breaker,
        cache: state.engine.cache().stats(),
    })
}

async fn force_breaker(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    if !state.test_hooks {
        return StatusCode::NOT_FOUND.into_response();
    }
    let mut f = match Fields::parse(&body, &["state"]) {
        Ok(f) => f,
        Err(r) => return r,
    };
    let target = f.text("state").and_then(|s| {
        match serde_json::from_value::<BreakerState>(Value::String(s)) {
            Ok(t) => Some(t),
            Err(_) => {
                f.fail("state", "expected closed, open or half_open");
                None
            }
        }
    });
    if let Err(r) = f.finish() {
        return r;
    }
    state.engine.breaker().force(target.expect("checked"));
    Json(state.engine.breaker().snapshot()).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/threshold", post(threshold))
        .route("/v1/signal", post(signal))
        .route("/healthz", get(healthz))
        .route("/test/breaker", post(force_breaker))
        .with_state(state)
}

/// Serves until ctrl-c, then compacts the cache file.
pub async fn serve(state: Arc<AppState>, bind: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| anyhow::anyhow!("binding {bind}: {e}"))?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    let kept = state.engine.cache().compact(state.engine.now())?;
    tracing::info!(kept, "cache compacted");
    Ok(())
}
