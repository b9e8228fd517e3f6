//! Benchmark harness: simulated sessions scored by Kendall tau on a hold-out set.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kendall::{kendall_tau_with, TauVariant};
use super::utilities::{simulated_oracle, TestUtility};
use crate::acquisition::{PolicyKind, QueryPolicy, DEFAULT_ACQUISITION_SAMPLES, DEFAULT_CANDIDATES};
use crate::error::{Error, Result};
use crate::fitting::FitConfig;
use crate::model::{sample_shapes, HyperParams, MetricSpace, MetricVector, PreparedPoint};
use crate::scalar::Scalar;
use crate::seeds::{derive_seed, name_hash};
use crate::session::{init_queries, init_session, SessionState};
use crate::special::BetaCdf;

pub const DEFAULT_HOLDOUT_SIZE: usize = 10_000;
pub const DEFAULT_EVAL_SAMPLES: usize = 1024;
pub const DEFAULT_RUNS: usize = 5;
/// Total queries per metric.
pub const BUDGET_PER_METRIC: usize = 10;

const STREAM_HOLDOUT: u64 = 0x10;
const STREAM_SESSION: u64 = 0x11;
const STREAM_EVAL: u64 = 0x12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetMode {
    /// The `5N` initialization queries count toward the `10N` budget.
    #[default]
    Inclusive,
    /// `10N` queries on top of the initialization.
    Additive,
}

impl BudgetMode {
    pub fn budget(self, n_metrics: usize) -> usize {
        match self {
            BudgetMode::Inclusive => BUDGET_PER_METRIC * n_metrics,
            BudgetMode::Additive => BUDGET_PER_METRIC * n_metrics + init_queries(n_metrics),
        }
    }
}

impl std::str::FromStr for BudgetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "inclusive" => Ok(BudgetMode::Inclusive),
            "additive" => Ok(BudgetMode::Additive),
            other => Err(Error::InvalidConfig(format!("unknown budget mode '{other}'"))),
        }
    }
}

/// Uniform hold-out points, reproducible from the utility id and seed.
pub fn holdout_set(test: &TestUtility, size: usize, seed: u64) -> Vec<MetricVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_HOLDOUT, name_hash(&test.id)));
    let n = test.n_metrics();
    (0..size)
        .map(|_| MetricVector::new((0..n).map(|_| rng.random::<f64>()).collect()).expect("uniform draws in [0, 1)"))
        .collect()
}

/// Mean joint utility of each point over `n_shape_samples` draws from `theta`.
pub fn model_scores<T: Scalar>(
    theta: &HyperParams<T>,
    space: &MetricSpace,
    points: &[MetricVector<T>],
    n_shape_samples: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let shapes = sample_shapes(theta, n_shape_samples, seed)?;
    let n = space.n_metrics();
    let cdfs: Vec<BetaCdf<T>> = shapes
        .iter()
        .flat_map(|s| s.alpha.iter().zip(&s.beta).map(|(&a, &b)| BetaCdf::new(a, b)))
        .collect();
    let denom = T::lit(n_shape_samples as f64);
    points
        .par_iter()
        .map(|f| {
            space.check_len(f.len())?;
            let p = PreparedPoint::new(f);
            let sum = cdfs
                .chunks_exact(n)
                .fold(T::zero(), |acc, c| acc + p.utility(c, space.directions()));
            Ok(sum / denom)
        })
        .collect()
}

/// Kendall tau-b between the model's posterior-mean utility and the test
/// utility over `holdout`.
pub fn evaluate_model(
    theta: &HyperParams,
    test: &TestUtility,
    holdout: &[MetricVector],
    n_shape_samples: usize,
    seed: u64,
) -> Result<f64> {
    evaluate_model_with(TauVariant::B, theta, test, holdout, n_shape_samples, seed)
}

pub fn evaluate_model_with(
    variant: TauVariant,
    theta: &HyperParams,
    test: &TestUtility,
    holdout: &[MetricVector],
    n_shape_samples: usize,
    seed: u64,
) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::InvalidConfig("empty hold-out set".into()));
    }
    let model = model_scores(theta, &test.space(), holdout, n_shape_samples, seed)?;
    let truth: Vec<f64> = holdout.iter().map(|f| test.score(f)).collect();
    kendall_tau_with(variant, &model, &truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub runs: usize,
    pub base_seed: u64,
    pub budget_mode: BudgetMode,
    pub holdout_size: usize,
    pub eval_samples: usize,
    pub n_candidates: usize,
    pub n_shape_samples: usize,
    pub fit: FitConfig,
    pub tau_variant: TauVariant,
    /// Run independent cells on the rayon pool.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            runs: DEFAULT_RUNS,
            base_seed: 0,
            budget_mode: BudgetMode::Inclusive,
            holdout_size: DEFAULT_HOLDOUT_SIZE,
            eval_samples: DEFAULT_EVAL_SAMPLES,
            n_candidates: DEFAULT_CANDIDATES,
            n_shape_samples: DEFAULT_ACQUISITION_SAMPLES,
            fit: FitConfig::default(),
            tau_variant: TauVariant::B,
            parallel: true,
        }
    }
}

impl BenchConfig {
    pub fn policy(&self, kind: PolicyKind) -> QueryPolicy {
        QueryPolicy {
            kind,
            n_candidates: self.n_candidates,
            n_shape_samples: self.n_shape_samples,
            seed: 0,
        }
    }

    /// Session seed of one run; shared by every policy so that they start from
    /// the same initialization queries.
    pub fn session_seed(&self, test: &TestUtility, run: usize) -> u64 {
        derive_seed(self.base_seed, STREAM_SESSION ^ name_hash(&test.id), run as u64)
    }

    pub fn eval_seed(&self, test: &TestUtility, run: usize) -> u64 {
        derive_seed(self.base_seed, STREAM_EVAL ^ name_hash(&test.id), run as u64)
    }
}

/// One simulated session and its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub utility: String,
    pub policy: PolicyKind,
    pub run: usize,
    pub seed: u64,
    pub tau: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub utility: String,
    pub policy: PolicyKind,
    pub taus: Vec<f64>,
    pub mean_tau: f64,
    pub seeds: Vec<u64>,
    pub wall_ms: Vec<u64>,
}

impl BenchResult {
    pub fn runs(&self) -> impl Iterator<Item = RunRecord> + '_ {
        (0..self.taus.len()).map(move |run| RunRecord {
            utility: self.utility.clone(),
            policy: self.policy,
            run,
            seed: self.seeds[run],
            tau: self.taus[run],
            wall_ms: self.wall_ms[run],
        })
    }
}

/// Runs a full simulated session for one (utility, policy, run) cell and
/// returns the final session.
pub fn run_session(test: &TestUtility, kind: PolicyKind, run: usize, config: &BenchConfig) -> Result<SessionState> {
    let space = test.space();
    let budget = config.budget_mode.budget(space.n_metrics());
    let mut session = init_session(
        space,
        config.policy(kind),
        budget,
        config.fit.clone(),
        config.session_seed(test, run),
    )?;
    session.run_to_completion(|q| Ok(simulated_oracle(test, q)))?;
    Ok(session)
}

pub fn run_cell(
    test: &TestUtility,
    kind: PolicyKind,
    run: usize,
    holdout: &[MetricVector],
    config: &BenchConfig,
) -> Result<RunRecord> {
    let started = Instant::now();
    let session = run_session(test, kind, run, config)?;
    let tau = evaluate_model_with(
        config.tau_variant,
        &session.theta_mle,
        test,
        holdout,
        config.eval_samples,
        config.eval_seed(test, run),
    )?;
    Ok(RunRecord {
        utility: test.id.clone(),
        policy: kind,
        run,
        seed: session.seeds.base,
        tau,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

/// Every (utility, policy, run) cell, aggregated per (utility, policy) in
/// suite order.
pub fn run_benchmark(suite: &[TestUtility], policies: &[PolicyKind], config: &BenchConfig) -> Result<Vec<BenchResult>> {
    run_benchmark_with_progress(suite, policies, config, |_| {})
}

pub fn run_benchmark_with_progress<P>(
    suite: &[TestUtility],
    policies: &[PolicyKind],
    config: &BenchConfig,
    progress: P,
) -> Result<Vec<BenchResult>>
where
    P: Fn(&RunRecord) + Sync,
{
    if config.runs == 0 {
        return Err(Error::InvalidConfig("runs must be at least 1".into()));
    }
    let holdouts: Vec<Vec<MetricVector>> = suite
        .iter()
        .map(|t| holdout_set(t, config.holdout_size, config.base_seed))
        .collect();
    let cells: Vec<(usize, PolicyKind, usize)> = (0..suite.len())
        .flat_map(|u| {
            policies
                .iter()
                .flat_map(move |&p| (0..config.runs).map(move |r| (u, p, r)))
        })
        .collect();
    let run = |&(u, p, r): &(usize, PolicyKind, usize)| -> Result<RunRecord> {
        let record = run_cell(&suite[u], p, r, &holdouts[u], config)?;
        progress(&record);
        Ok(record)
    };
    let records: Vec<RunRecord> = if config.parallel {
        cells.par_iter().map(run).collect::<Result<_>>()?
    } else {
        cells.iter().map(run).collect::<Result<_>>()?
    };

    Ok(records
        .chunks(config.runs)
        .map(|chunk| {
            let taus: Vec<f64> = chunk.iter().map(|r| r.tau).collect();
            BenchResult {
                utility: chunk[0].utility.clone(),
                policy: chunk[0].policy,
                mean_tau: taus.iter().sum::<f64>() / taus.len() as f64,
                taus,
                seeds: chunk.iter().map(|r| r.seed).collect(),
                wall_ms: chunk.iter().map(|r| r.wall_ms).collect(),
            }
        })
        .collect())
}

/// Writes one CSV row per run: `utility,policy,run,seed,tau,wall_ms`.
pub fn write_csv<W: Write>(results: &[BenchResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidConfig(format!("csv output failed: {e}"));
    w.write_record(["utility", "policy", "run", "seed", "tau", "wall_ms"])
        .map_err(io)?;
    for r in results.iter().flat_map(|b| b.runs()) {
        w.write_record([
            r.utility,
            r.policy.name().to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            format!("{:.6}", r.tau),
            r.wall_ms.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidConfig(format!("csv output failed: {e}")))?;
    Ok(())
}
