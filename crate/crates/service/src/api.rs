//! Request and response bodies.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use prefelicit::{Direction, HyperParams, Phase, PolicyKind, SessionState};

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSessionRequest {
    pub metric_names: Vec<String>,
    /// Defaults to maximizing every metric.
    #[serde(default)]
    pub directions: Option<Vec<Direction>>,
    #[serde(default)]
    pub policy: Option<String>,
    /// Defaults to ten queries per metric.
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ready,
    Fitting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub session_id: String,
    pub n_metrics: usize,
    pub metric_names: Vec<String>,
    pub directions: Vec<Direction>,
    pub policy: PolicyKind,
    pub seed: u64,
    pub budget: usize,
    pub init_queries: usize,
    pub queries_answered: usize,
    pub preferences: usize,
    pub equivalences: usize,
    pub phase: Phase,
    pub status: Status,
}

impl SessionDescriptor {
    pub fn of(s: &SessionState, status: Status) -> Self {
        Self {
            session_id: s.session_id.clone(),
            n_metrics: s.space.n_metrics(),
            metric_names: metric_names(s),
            directions: s.space.directions().to_vec(),
            policy: s.policy.kind,
            seed: s.seeds.base,
            budget: s.budget,
            init_queries: s.init_len(),
            queries_answered: s.answered(),
            preferences: s.dataset.preferences.len(),
            equivalences: s.dataset.equivalences.len(),
            phase: s.phase(),
            status,
        }
    }
}

pub(crate) fn metric_names(s: &SessionState) -> Vec<String> {
    s.metric_names
        .clone()
        .unwrap_or_else(|| (1..=s.space.n_metrics()).map(|i| format!("f{i}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    pub direction: Direction,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCard {
    pub query_id: String,
    pub index: usize,
    pub phase: Phase,
    pub queries_answered: usize,
    pub budget: usize,
    pub a: Vec<MetricValue>,
    pub b: Vec<MetricValue>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PreferenceRequest {
    pub query_id: String,
    pub choice: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePayload {
    pub metric_index: usize,
    pub name: String,
    pub direction: Direction,
    pub grid: Vec<f64>,
    pub median: Vec<f64>,
    pub q25: Vec<f64>,
    pub q75: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPayload {
    pub session_id: String,
    /// No fit has run yet; `theta` is the center of the search box.
    pub prior: bool,
    pub status: Status,
    pub queries_answered: usize,
    /// Answers the fit saw.
    pub fit_dataset_len: Option<usize>,
    pub log_likelihood: Option<f64>,
    pub theta: HyperParams,
    pub curves: Vec<CurvePayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session '{0}'")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error("session store is full ({0} sessions)")]
    Full(usize),
    #[error("{0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Full(_) => StatusCode::SERVICE_UNAVAILABLE,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status(),
            Json(ErrorBody {
                error: self.to_string(),
            }),
        )
            .into_response()
    }
}
