//! HTTP front end for live preference sessions.
//!
//! ```text
//! POST /sessions                      create a session
//! GET  /sessions/{id}                 descriptor
//! GET  /sessions/{id}/comparison      pending pair (runs the fit if one is due)
//! POST /sessions/{id}/preference      {query_id, choice: "A" | "B" | "E"}
//! GET  /sessions/{id}/model           fitted hyperparameters and utility curves
//! GET  /sessions/{id}/export          the session document
//! ```
//!
//! Requests to one session are serialized; fits run on the blocking pool so
//! other sessions stay responsive. Descriptor and model reads are served
//! from the last published state and never wait for a fit.

mod api;
mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::sync::{Mutex as AsyncMutex, OwnedMutexGuard};

use prefelicit::acquisition::{DEFAULT_ACQUISITION_SAMPLES, DEFAULT_CANDIDATES};
use prefelicit::model::{DEFAULT_CURVE_GRID, DEFAULT_CURVE_SAMPLES};
use prefelicit::session::init_queries;
use prefelicit::{
    curve_summary, init_session, Direction, FitConfig, MetricSpace, OracleResponse, PolicyKind, QueryPair, QueryPolicy,
    SessionState,
};

pub use api::*;
pub use store::Store;

pub const DEFAULT_PORT: u16 = 8789;
pub const MAX_METRICS: usize = 16;
pub const DEFAULT_MAX_SESSIONS: usize = 1000;
/// Seed of the shape draws behind the model curves.
pub const INTROSPECTION_SEED: u64 = 0x1d7e;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub fit: FitConfig,
    pub n_candidates: usize,
    pub n_shape_samples: usize,
    pub max_sessions: usize,
    pub curve_samples: usize,
    pub curve_grid: usize,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            data_dir: data_dir.into(),
            fit: FitConfig::default(),
            n_candidates: DEFAULT_CANDIDATES,
            n_shape_samples: DEFAULT_ACQUISITION_SAMPLES,
            max_sessions: DEFAULT_MAX_SESSIONS,
            curve_samples: DEFAULT_CURVE_SAMPLES,
            curve_grid: DEFAULT_CURVE_GRID,
        }
    }
}

struct Slot {
    state: Arc<AsyncMutex<SessionState>>,
    published: Mutex<SessionState>,
    fitting: AtomicBool,
}

impl Slot {
    fn new(state: SessionState) -> Self {
        Self {
            published: Mutex::new(state.clone()),
            state: Arc::new(AsyncMutex::new(state)),
            fitting: AtomicBool::new(false),
        }
    }

    fn publish(&self, state: &SessionState) {
        *self.published.lock().unwrap() = state.clone();
    }

    fn snapshot(&self) -> (SessionState, Status) {
        let s = self.published.lock().unwrap().clone();
        (s, self.status())
    }

    fn status(&self) -> Status {
        if self.fitting.load(Ordering::SeqCst) {
            Status::Fitting
        } else {
            Status::Ready
        }
    }
}

pub struct Service {
    config: ServiceConfig,
    store: Store,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

impl Service {
    /// Opens the store and replays every session found in it.
    pub fn open(config: ServiceConfig) -> std::io::Result<Self> {
        let store = Store::open(&config.data_dir)?;
        let (loaded, failed) = store.load_all()?;
        for (path, err) in failed {
            eprintln!("skipping {}: {err}", path.display());
        }
        let sessions = loaded
            .into_iter()
            .map(|s| (s.session_id.clone(), Arc::new(Slot::new(s))))
            .collect();
        Ok(Self {
            config,
            store,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    fn build(&self, req: CreateSessionRequest) -> Result<SessionState, ApiError> {
        let n = req.metric_names.len();
        if n == 0 || n > MAX_METRICS {
            return Err(ApiError::Invalid(format!("need 1 to {MAX_METRICS} metrics, got {n}")));
        }
        if req.metric_names.iter().any(|m| m.trim().is_empty()) {
            return Err(ApiError::Invalid("metric names must be non-empty".into()));
        }
        let directions = req.directions.unwrap_or_else(|| vec![Direction::Maximize; n]);
        if directions.len() != n {
            return Err(ApiError::Invalid(format!(
                "{} directions for {n} metrics",
                directions.len()
            )));
        }
        let kind: PolicyKind = match req.policy.as_deref() {
            Some(p) => p
                .parse()
                .map_err(|e: prefelicit::Error| ApiError::Invalid(e.to_string()))?,
            None => PolicyKind::PairEntropy,
        };
        let budget = req.budget.unwrap_or(10 * n);
        if budget < init_queries(n) {
            return Err(ApiError::Invalid(format!(
                "budget {budget} is below the {} initialization queries",
                init_queries(n)
            )));
        }
        let seed = req.seed.unwrap_or_else(|| rand::random::<u64>() >> 11);
        let policy = QueryPolicy {
            n_candidates: self.config.n_candidates,
            n_shape_samples: self.config.n_shape_samples,
            ..QueryPolicy::new(kind, 0)
        };
        let invalid = |e: prefelicit::Error| ApiError::Invalid(e.to_string());
        let space = MetricSpace::new(directions).map_err(invalid)?;
        init_session(space, policy, budget, self.config.fit.clone(), seed)
            .and_then(|s| s.with_metric_names(req.metric_names))
            .map_err(invalid)
    }

    pub fn create(&self, req: CreateSessionRequest) -> Result<SessionDescriptor, ApiError> {
        let state = self.build(req)?;
        let mut sessions = self.sessions.write().unwrap();
        if sessions.len() >= self.config.max_sessions {
            return Err(ApiError::Full(self.config.max_sessions));
        }
        let mut id = format!("s{:016x}", rand::random::<u64>());
        while sessions.contains_key(&id) {
            id = format!("s{:016x}", rand::random::<u64>());
        }
        let state = state.with_session_id(id.clone());
        self.store
            .put(&id, &state.save())
            .map_err(|e| ApiError::Internal(format!("store: {e}")))?;
        let descriptor = SessionDescriptor::of(&state, Status::Ready);
        sessions.insert(id, Arc::new(Slot::new(state)));
        Ok(descriptor)
    }
}

fn query_id(index: usize) -> String {
    format!("q{index}")
}

fn card(s: &SessionState, pair: &QueryPair) -> ComparisonCard {
    let names = metric_names(s);
    let side = |v: &prefelicit::MetricVector| {
        names
            .iter()
            .zip(s.space.directions())
            .zip(v.values())
            .map(|((name, &direction), &value)| MetricValue {
                name: name.clone(),
                direction,
                value,
            })
            .collect()
    };
    ComparisonCard {
        query_id: query_id(s.answered()),
        index: s.answered(),
        phase: s.phase(),
        queries_answered: s.answered(),
        budget: s.budget,
        a: side(&pair.a),
        b: side(&pair.b),
    }
}

/// Makes sure the session has a pending pair, running the due fit and
/// proposal on the blocking pool.
async fn ensure_pending(
    slot: &Slot,
    mut guard: OwnedMutexGuard<SessionState>,
) -> Result<(OwnedMutexGuard<SessionState>, QueryPair), ApiError> {
    if let Some(p) = guard.pending() {
        let p = p.clone();
        return Ok((guard, p));
    }
    let fits = guard.needs_fit();
    if fits {
        slot.fitting.store(true, Ordering::SeqCst);
    }
    let joined = tokio::task::spawn_blocking(move || {
        let r = guard.next_query();
        (guard, r)
    })
    .await;
    slot.fitting.store(false, Ordering::SeqCst);
    let (guard, result) = joined.map_err(|e| ApiError::Internal(format!("proposal task: {e}")))?;
    let pair = result.map_err(|e| ApiError::Internal(e.to_string()))?;
    if fits {
        slot.publish(&guard);
    }
    Ok((guard, pair))
}

async fn finalize_in_background(slot: Arc<Slot>) {
    let guard = slot.state.clone().lock_owned().await;
    slot.fitting.store(true, Ordering::SeqCst);
    let joined = tokio::task::spawn_blocking(move || {
        let mut guard = guard;
        let r = guard.finalize();
        (guard, r)
    })
    .await;
    if let Ok((guard, result)) = joined {
        match result {
            Ok(()) => slot.publish(&guard),
            Err(e) => eprintln!("final fit of {} failed: {e}", guard.session_id),
        }
    }
    slot.fitting.store(false, Ordering::SeqCst);
}

async fn create_session(
    State(svc): State<Arc<Service>>,
    body: Result<Json<CreateSessionRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::Invalid(e.body_text()))?;
    let descriptor = svc.create(req)?;
    Ok((StatusCode::CREATED, Json(descriptor)))
}

async fn get_session(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<Json<SessionDescriptor>, ApiError> {
    let slot = svc.slot(&id)?;
    let (s, status) = slot.snapshot();
    Ok(Json(SessionDescriptor::of(&s, status)))
}

async fn get_comparison(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<Json<ComparisonCard>, ApiError> {
    let slot = svc.slot(&id)?;
    let guard = slot.state.clone().lock_owned().await;
    if guard.is_complete() {
        return Err(ApiError::Conflict(format!("session {id} is complete")));
    }
    let (guard, pair) = ensure_pending(&slot, guard).await?;
    Ok(Json(card(&guard, &pair)))
}

async fn submit_preference(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
    body: Result<Json<PreferenceRequest>, JsonRejection>,
) -> Result<Json<SessionDescriptor>, ApiError> {
    let slot = svc.slot(&id)?;
    let Json(req) = body.map_err(|e| ApiError::Invalid(e.body_text()))?;
    let choice: OracleResponse = match req.choice.as_str() {
        "A" => OracleResponse::A,
        "B" => OracleResponse::B,
        "E" => OracleResponse::Equal,
        other => {
            return Err(ApiError::Invalid(format!(
                "choice must be \"A\", \"B\" or \"E\", got {other:?}"
            )))
        }
    };
    let guard = slot.state.clone().lock_owned().await;
    if guard.is_complete() {
        return Err(ApiError::Conflict(format!("session {id} is complete")));
    }
    let expected = query_id(guard.answered());
    if req.query_id != expected {
        return Err(ApiError::Conflict(format!(
            "stale query '{}', pending is '{expected}'",
            req.query_id
        )));
    }
    let (mut guard, _) = ensure_pending(&slot, guard).await?;
    let before = guard.clone();
    guard
        .record_response(choice)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    if let Err(e) = svc.store.put(&id, &guard.save()) {
        *guard = before;
        return Err(ApiError::Internal(format!("store: {e}")));
    }
    slot.publish(&guard);
    let complete = guard.is_complete();
    drop(guard);
    if complete {
        slot.fitting.store(true, Ordering::SeqCst);
        tokio::spawn(finalize_in_background(slot.clone()));
    }
    let (s, status) = slot.snapshot();
    Ok(Json(SessionDescriptor::of(&s, status)))
}

async fn get_model(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Result<Json<ModelPayload>, ApiError> {
    let slot = svc.slot(&id)?;
    let (s, status) = slot.snapshot();
    let (samples, grid) = (svc.config.curve_samples, svc.config.curve_grid);
    let curves = tokio::task::spawn_blocking(move || {
        let names = metric_names(&s);
        let curves = (0..s.space.n_metrics())
            .map(|i| {
                curve_summary(&s.theta_mle, &s.space, i, samples, grid, INTROSPECTION_SEED).map(|c| CurvePayload {
                    metric_index: i,
                    name: names[i].clone(),
                    direction: c.direction,
                    grid: c.grid,
                    median: c.median,
                    q25: c.q25,
                    q75: c.q75,
                })
            })
            .collect::<Result<Vec<_>, _>>();
        (s, curves)
    })
    .await
    .map_err(|e| ApiError::Internal(format!("curve task: {e}")))?;
    let (s, curves) = curves;
    let curves = curves.map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(ModelPayload {
        session_id: s.session_id.clone(),
        prior: s.last_fit.is_none(),
        status,
        queries_answered: s.answered(),
        fit_dataset_len: s.last_fit.map(|f| f.dataset_len),
        log_likelihood: s.last_fit.map(|f| f.log_likelihood),
        theta: s.theta_mle.clone(),
        curves,
    }))
}

async fn export_session(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let slot = svc.slot(&id)?;
    let (s, _) = slot.snapshot();
    Ok(([(header::CONTENT_TYPE, "application/json")], s.save()))
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/comparison", get(get_comparison))
        .route("/sessions/{id}/preference", post(submit_preference))
        .route("/sessions/{id}/model", get(get_model))
        .route("/sessions/{id}/export", get(export_session))
        .with_state(service)
}

/// Serves until interrupted.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let service = Arc::new(Service::open(config)?);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!(
        "serving {} sessions from {} on http://{}",
        service.len(),
        service.config.data_dir.display(),
        listener.local_addr()?
    );
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
