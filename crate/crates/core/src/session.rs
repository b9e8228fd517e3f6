//! The active preference-learning loop.
//!
//! A session first asks `5N` random incomparable pairs, then, before every
//! further query, refits the hyperparameters to all answers so far and asks
//! the pair the query policy proposes under the fit. Strict answers append
//! `loser < winner` to the preference set; "equal" answers go to the
//! equivalence set.
//!
//! Sessions persist as a versioned JSON document holding the configuration
//! and the answered history. Everything else (dataset, incumbent, fitted
//! hyperparameters) is rebuilt by replaying the history.

use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    acquisition_shapes, acquisition_value, incomparable, propose_query, random_incomparable_pair, PolicyKind,
    QueryPair, QueryPolicy, REJECTION_FACTOR,
};
use crate::error::{Error, Result};
use crate::fitting::{fit_mle_warm, FitConfig};
use crate::likelihood::PreferenceDataset;
use crate::model::{Direction, HyperParams, MetricSpace, MetricVector};
use crate::seeds::derive_seed;

pub const SESSION_FORMAT_VERSION: u32 = 1;
/// Random initialization queries per metric.
pub const INIT_QUERIES_PER_METRIC: usize = 5;

const STREAM_POLICY: u64 = 0x01;
const STREAM_FIT: u64 = 0x02;
const STREAM_INIT: u64 = 0x03;
const STREAM_QUERY: u64 = 0x04;
const STREAM_ID: u64 = 0x05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OracleResponse {
    A,
    B,
    #[serde(rename = "E")]
    Equal,
}

impl std::str::FromStr for OracleResponse {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(OracleResponse::A),
            "B" => Ok(OracleResponse::B),
            "E" | "EQUAL" | "=" => Ok(OracleResponse::Equal),
            other => Err(Error::InvalidConfig(format!("unknown response '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub pair: QueryPair,
    pub response: OracleResponse,
    /// UTC milliseconds since the Unix epoch.
    pub timestamp_ms: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSeeds {
    pub base: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    /// Number of answered queries the fit saw.
    pub dataset_len: usize,
    pub log_likelihood: f64,
    pub n_evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initializing,
    Active,
    Complete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    pub session_id: String,
    pub space: MetricSpace,
    pub metric_names: Option<Vec<String>>,
    pub policy: QueryPolicy,
    pub budget: usize,
    pub seeds: SessionSeeds,
    pub fit_config: FitConfig,
    pub dataset: PreferenceDataset,
    pub theta_mle: HyperParams,
    pub last_fit: Option<FitSummary>,
    pub incumbent: Option<MetricVector>,
    pub history: Vec<HistoryEntry>,
    init_queue: Vec<QueryPair>,
    pending: Option<QueryPair>,
}

pub fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

pub fn init_queries(n_metrics: usize) -> usize {
    INIT_QUERIES_PER_METRIC * n_metrics
}

/// Creates a session. The policy and fit seeds are derived from `seed`.
pub fn init_session(
    space: MetricSpace,
    policy: QueryPolicy,
    budget: usize,
    fit_config: FitConfig,
    seed: u64,
) -> Result<SessionState> {
    let policy = policy.with_seed(derive_seed(seed, STREAM_POLICY, 0));
    let fit_config = FitConfig {
        base_seed: derive_seed(seed, STREAM_FIT, 0),
        ..fit_config
    };
    let id = format!("s{:016x}", derive_seed(seed, STREAM_ID, 0));
    SessionState::from_parts(id, space, policy, budget, SessionSeeds { base: seed }, fit_config)
}

impl SessionState {
    fn from_parts(
        session_id: String,
        space: MetricSpace,
        policy: QueryPolicy,
        budget: usize,
        seeds: SessionSeeds,
        fit_config: FitConfig,
    ) -> Result<Self> {
        policy.validate()?;
        fit_config.validate()?;
        let n = space.n_metrics();
        if n < 2 {
            return Err(Error::InvalidConfig(
                "a session needs at least two metrics: no pair over one metric is incomparable".into(),
            ));
        }
        let init_len = init_queries(n);
        if budget < init_len {
            return Err(Error::InvalidConfig(format!(
                "budget {budget} is below the {init_len} initialization queries"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seeds.base, STREAM_INIT, 0));
        let cap = REJECTION_FACTOR * policy.n_candidates.max(1);
        let init_queue = (0..init_len)
            .map(|_| {
                random_incomparable_pair(&mut rng, &space, cap).map(|(a, b)| QueryPair {
                    a,
                    b,
                    acquisition_value: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            session_id,
            theta_mle: fit_config.bounds.center(n),
            space,
            metric_names: None,
            policy,
            budget,
            seeds,
            fit_config,
            dataset: PreferenceDataset::new(),
            last_fit: None,
            incumbent: None,
            history: Vec::new(),
            init_queue,
            pending: None,
        })
    }

    pub fn with_session_id(mut self, id: impl Into<String>) -> Self {
        self.session_id = id.into();
        self
    }

    pub fn with_metric_names(mut self, names: Vec<String>) -> Result<Self> {
        self.space.check_len(names.len())?;
        self.metric_names = Some(names);
        Ok(self)
    }

    pub fn init_len(&self) -> usize {
        self.init_queue.len()
    }

    pub fn init_queue(&self) -> &[QueryPair] {
        &self.init_queue
    }

    pub fn pending(&self) -> Option<&QueryPair> {
        self.pending.as_ref()
    }

    pub fn answered(&self) -> usize {
        self.history.len()
    }

    pub fn is_complete(&self) -> bool {
        self.history.len() >= self.budget
    }

    pub fn phase(&self) -> Phase {
        if self.is_complete() {
            Phase::Complete
        } else if self.history.len() < self.init_len() {
            Phase::Initializing
        } else {
            Phase::Active
        }
    }

    /// Whether the next call to [`next_query`](Self::next_query) would run a fit.
    pub fn needs_fit(&self) -> bool {
        self.pending.is_none()
            && !self.is_complete()
            && self.history.len() >= self.init_len()
            && self.policy.kind.uses_model()
            && !self.fitted_at(self.history.len())
    }

    fn fitted_at(&self, len: usize) -> bool {
        self.last_fit.is_some_and(|f| f.dataset_len == len)
    }

    fn refit(&mut self) -> Result<()> {
        let warm = self.last_fit.is_some().then(|| self.theta_mle.clone());
        let fit = fit_mle_warm(&self.dataset, &self.fit_config, &self.space, warm.as_ref())?;
        self.theta_mle = fit.theta_mle;
        self.last_fit = Some(FitSummary {
            dataset_len: self.dataset.len(),
            log_likelihood: fit.log_likelihood,
            n_evaluations: fit.n_evaluations,
        });
        Ok(())
    }

    fn query_policy(&self, index: usize) -> QueryPolicy {
        self.policy
            .with_seed(derive_seed(self.policy.seed, STREAM_QUERY, index as u64))
    }

    fn anchor(&self) -> Option<&MetricVector> {
        match self.policy.kind {
            PolicyKind::SingleEntropy => self.incumbent.as_ref(),
            _ => None,
        }
    }

    /// The pair to ask next. Repeated calls return the same pair until a
    /// response is recorded.
    pub fn next_query(&mut self) -> Result<QueryPair> {
        if let Some(p) = &self.pending {
            return Ok(p.clone());
        }
        if self.is_complete() {
            return Err(Error::BudgetExhausted { budget: self.budget });
        }
        let index = self.history.len();
        let pair = if index < self.init_len() {
            self.init_queue[index].clone()
        } else {
            if self.policy.kind.uses_model() && !self.fitted_at(index) {
                self.refit()?;
            }
            propose_query(&self.query_policy(index), &self.theta_mle, self.anchor(), &self.space)?
        };
        self.pending = Some(pair.clone());
        Ok(pair)
    }

    pub fn record_response(&mut self, response: OracleResponse) -> Result<()> {
        self.record_response_at(response, now_ms())
    }

    pub fn record_response_at(&mut self, response: OracleResponse, timestamp_ms: i64) -> Result<()> {
        let pair = self.pending.take().ok_or(Error::NoPendingQuery)?;
        match response {
            OracleResponse::A => {
                self.dataset.push_preference(pair.b.clone(), pair.a.clone());
                self.incumbent = Some(pair.a.clone());
            }
            OracleResponse::B => {
                self.dataset.push_preference(pair.a.clone(), pair.b.clone());
                self.incumbent = Some(pair.b.clone());
            }
            OracleResponse::Equal => self.dataset.push_equivalence(pair.a.clone(), pair.b.clone()),
        }
        self.history.push(HistoryEntry {
            pair,
            response,
            timestamp_ms,
        });
        Ok(())
    }

    /// Refits on the full dataset once the budget is spent. Idempotent.
    pub fn finalize(&mut self) -> Result<()> {
        if self.is_complete() && !self.fitted_at(self.history.len()) {
            self.refit()?;
        }
        Ok(())
    }

    /// Drives the loop with `oracle` until the budget is spent, then refits.
    pub fn run_to_completion<F>(&mut self, mut oracle: F) -> Result<()>
    where
        F: FnMut(&QueryPair) -> Result<OracleResponse>,
    {
        while !self.is_complete() {
            let q = self.next_query()?;
            let r = oracle(&q)?;
            self.record_response(r)?;
        }
        self.finalize()
    }

    pub fn save(&self) -> Vec<u8> {
        serde_json::to_vec(&SessionDocument::from_state(self)).expect("session document serializes")
    }

    pub fn save_pretty(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(&SessionDocument::from_state(self)).expect("session document serializes")
    }

    /// Rebuilds a session from its document by replaying every answer
    /// (including the fits the original session ran).
    pub fn load(bytes: &[u8]) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_slice(bytes).map_err(|e| Error::CorruptSession(e.to_string()))?;
        if probe.version != SESSION_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: probe.version,
                expected: SESSION_FORMAT_VERSION,
            });
        }
        let doc: SessionDocument = serde_json::from_slice(bytes).map_err(|e| Error::CorruptSession(e.to_string()))?;
        doc.replay()
    }
}

pub fn save_session(state: &SessionState) -> Vec<u8> {
    state.save()
}

pub fn load_session(bytes: &[u8]) -> Result<SessionState> {
    SessionState::load(bytes)
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub pair: PairRecord,
    pub response: OracleResponse,
    pub t: i64,
}

/// On-disk form of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDocument {
    pub version: u32,
    pub session_id: String,
    pub n_metrics: usize,
    pub directions: Vec<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_names: Option<Vec<String>>,
    pub policy: QueryPolicy,
    pub budget: usize,
    pub seeds: SessionSeeds,
    pub fit_config: FitConfig,
    pub history: Vec<HistoryRecord>,
}

impl SessionDocument {
    pub fn from_state(state: &SessionState) -> Self {
        Self {
            version: SESSION_FORMAT_VERSION,
            session_id: state.session_id.clone(),
            n_metrics: state.space.n_metrics(),
            directions: state.space.directions().to_vec(),
            metric_names: state.metric_names.clone(),
            policy: state.policy,
            budget: state.budget,
            seeds: state.seeds,
            fit_config: state.fit_config.clone(),
            history: state
                .history
                .iter()
                .map(|h| HistoryRecord {
                    pair: PairRecord {
                        a: h.pair.a.values().to_vec(),
                        b: h.pair.b.values().to_vec(),
                    },
                    response: h.response,
                    t: h.timestamp_ms,
                })
                .collect(),
        }
    }

    pub fn replay(self) -> Result<SessionState> {
        if self.directions.len() != self.n_metrics {
            return Err(Error::CorruptSession(format!(
                "{} directions for {} metrics",
                self.directions.len(),
                self.n_metrics
            )));
        }
        if self.history.len() > self.budget {
            return Err(Error::CorruptSession("history longer than budget".into()));
        }
        let space = MetricSpace::new(self.directions)?;
        let mut state = SessionState::from_parts(
            self.session_id,
            space,
            self.policy,
            self.budget,
            self.seeds,
            self.fit_config,
        )?;
        if let Some(names) = self.metric_names {
            state = state.with_metric_names(names)?;
        }
        for (index, record) in self.history.into_iter().enumerate() {
            let a = MetricVector::new(record.pair.a)?;
            let b = MetricVector::new(record.pair.b)?;
            if !incomparable(&a, &b, &state.space)? {
                return Err(Error::ReplayMismatch { index });
            }
            let pair = if index < state.init_len() {
                let queued = &state.init_queue[index];
                if queued.a != a || queued.b != b {
                    return Err(Error::ReplayMismatch { index });
                }
                queued.clone()
            } else if state.policy.kind.uses_model() {
                if !state.fitted_at(index) {
                    state.refit()?;
                }
                let shapes = acquisition_shapes(&state.query_policy(index), &state.theta_mle)?;
                let value = acquisition_value(&a, &b, &shapes, &state.space)?;
                QueryPair {
                    a,
                    b,
                    acquisition_value: value,
                }
            } else {
                QueryPair {
                    a,
                    b,
                    acquisition_value: 0.0,
                }
            };
            state.pending = Some(pair);
            state.record_response_at(record.response, record.t)?;
        }
        state.finalize()?;
        Ok(state)
    }
}
