//! Explicit test utilities that stand in for a stakeholder's latent utility.

use serde::{Deserialize, Serialize};

use crate::acquisition::{PolicyKind, QueryPair};
use crate::error::{Error, Result};
use crate::model::{Direction, MetricSpace, MetricVector};
use crate::session::OracleResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

/// Feasibility requirement `f[metric] > bound` or `f[metric] < bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub metric: usize,
    pub bound: f64,
    pub side: Side,
}

impl Constraint {
    pub fn holds(&self, f: &MetricVector) -> bool {
        let v = f.get(self.metric);
        match self.side {
            Side::Above => v > self.bound,
            Side::Below => v < self.bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// `sum_i w_i f_i`; minimizing a metric is a negative weight.
    Weighted(Vec<f64>),
    /// `(1 + b^2) f1 f2 / (b^2 f1 + f2)` on the first two metrics.
    FScore { beta_sq: f64 },
}

impl Objective {
    pub fn value(&self, f: &MetricVector) -> f64 {
        match self {
            Objective::Weighted(w) => w.iter().zip(f.values()).map(|(w, x)| w * x).sum(),
            Objective::FScore { beta_sq } => {
                let (p, r) = (f.get(0), f.get(1));
                let denom = beta_sq * p + r;
                if denom > 0.0 {
                    (1.0 + beta_sq) * p * r / denom
                } else {
                    0.0
                }
            }
        }
    }
}

/// Mean Kendall tau reported for the three query policies
/// (random, single entropy, pair entropy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedTau {
    pub random: f64,
    pub single_entropy: f64,
    pub pair_entropy: f64,
}

impl ReportedTau {
    pub fn for_policy(&self, kind: PolicyKind) -> f64 {
        match kind {
            PolicyKind::Random => self.random,
            PolicyKind::SingleEntropy => self.single_entropy,
            PolicyKind::PairEntropy => self.pair_entropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestUtility {
    pub id: String,
    pub label: String,
    pub directions: Vec<Direction>,
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
    pub reported: Option<ReportedTau>,
}

/// Score assigned to infeasible points: below every feasible score, tied
/// among themselves.
pub const INFEASIBLE_SCORE: f64 = f64::NEG_INFINITY;

impl TestUtility {
    pub fn n_metrics(&self) -> usize {
        self.directions.len()
    }

    pub fn space(&self) -> MetricSpace {
        MetricSpace::new(self.directions.clone()).expect("test utilities have metrics")
    }

    pub fn feasible(&self, f: &MetricVector) -> bool {
        self.constraints.iter().all(|c| c.holds(f))
    }

    /// Objective value, or `None` when a constraint is violated.
    pub fn value(&self, f: &MetricVector) -> Option<f64> {
        self.feasible(f).then(|| self.objective.value(f))
    }

    /// Value used for ranking hold-out points.
    pub fn score(&self, f: &MetricVector) -> f64 {
        self.value(f).unwrap_or(INFEASIBLE_SCORE)
    }
}

/// Answers a query as a stakeholder with this utility would: two infeasible
/// configurations are reported equal, otherwise the higher score wins and an
/// exact tie is reported equal.
pub fn simulated_oracle(test: &TestUtility, pair: &QueryPair) -> OracleResponse {
    let (a, b) = (test.score(&pair.a), test.score(&pair.b));
    if a > b {
        OracleResponse::A
    } else if b > a {
        OracleResponse::B
    } else {
        OracleResponse::Equal
    }
}

fn entry(
    id: &str,
    label: &str,
    directions: &[Direction],
    objective: Objective,
    constraints: Vec<Constraint>,
    reported: [f64; 3],
) -> TestUtility {
    TestUtility {
        id: id.into(),
        label: label.into(),
        directions: directions.to_vec(),
        objective,
        constraints,
        reported: Some(ReportedTau {
            random: reported[0],
            single_entropy: reported[1],
            pair_entropy: reported[2],
        }),
    }
}

/// The nine benchmark utilities with their reference mean Kendall tau.
pub fn benchmark_suite() -> Vec<TestUtility> {
    use Direction::{Maximize as Max, Minimize as Min};
    let above = |metric, bound| Constraint {
        metric,
        bound,
        side: Side::Above,
    };
    let below = |metric, bound| Constraint {
        metric,
        bound,
        side: Side::Below,
    };
    vec![
        entry(
            "lin-1-2",
            "max f1 + 2 f2",
            &[Max, Max],
            Objective::Weighted(vec![1.0, 2.0]),
            vec![],
            [0.8756, 0.8542, 0.8618],
        ),
        entry(
            "lin-1-10",
            "max f1 + 10 f2",
            &[Max, Max],
            Objective::Weighted(vec![1.0, 10.0]),
            vec![],
            [0.9422, 0.9448, 0.9615],
        ),
        entry(
            "min-f1-st-f2",
            "min f1 s.t. f2 > 0.6",
            &[Min, Max],
            Objective::Weighted(vec![-1.0, 0.0]),
            vec![above(1, 0.6)],
            [0.6507, 0.6805, 0.6893],
        ),
        entry(
            "f1-score",
            "max 2 f1 f2 / (f1 + f2)",
            &[Max, Max],
            Objective::FScore { beta_sq: 1.0 },
            vec![],
            [0.8844, 0.9028, 0.9039],
        ),
        entry(
            "f2-score",
            "max 5 f1 f2 / (4 f1 + f2)",
            &[Max, Max],
            Objective::FScore { beta_sq: 4.0 },
            vec![],
            [0.8949, 0.8950, 0.9120],
        ),
        entry(
            "lin-1-2-1",
            "max f1 + 2 f2 + f3",
            &[Max, Max, Max],
            Objective::Weighted(vec![1.0, 2.0, 1.0]),
            vec![],
            [0.8490, 0.8018, 0.7805],
        ),
        entry(
            "lin-5-2-1",
            "max 5 f1 + 2 f2 + f3",
            &[Max, Max, Max],
            Objective::Weighted(vec![5.0, 2.0, 1.0]),
            vec![],
            [0.8738, 0.8516, 0.8311],
        ),
        entry(
            "min-f1-st-f2-f3",
            "min f1 s.t. f2 > 0.6, f3 < 0.2",
            &[Min, Max, Min],
            Objective::Weighted(vec![-1.0, 0.0, 0.0]),
            vec![above(1, 0.6), below(2, 0.2)],
            [0.2949, 0.3154, 0.3257],
        ),
        entry(
            "f1-score-st-f3",
            "max 2 f1 f2 / (f1 + f2) s.t. f3 > 0.95",
            &[Max, Max, Max],
            Objective::FScore { beta_sq: 1.0 },
            vec![above(2, 0.95)],
            [0.2309, 0.2088, 0.2648],
        ),
    ]
}

pub fn utility_by_id(id: &str) -> Result<TestUtility> {
    benchmark_suite()
        .into_iter()
        .find(|u| u.id == id)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown test utility '{id}'")))
}
