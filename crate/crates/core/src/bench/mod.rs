//! Simulated-oracle benchmark: test utilities, Kendall tau, and the harness
//! that runs full sessions against them.

pub mod harness;
pub mod kendall;
pub mod utilities;

pub use harness::{
    evaluate_model, evaluate_model_with, holdout_set, model_scores, run_benchmark, run_benchmark_with_progress,
    run_cell, run_session, write_csv, BenchConfig, BenchResult, BudgetMode, RunRecord, BUDGET_PER_METRIC,
    DEFAULT_EVAL_SAMPLES, DEFAULT_HOLDOUT_SIZE, DEFAULT_RUNS,
};
pub use kendall::{kendall_tau, kendall_tau_a, kendall_tau_with, TauVariant};
pub use utilities::{
    benchmark_suite, simulated_oracle, utility_by_id, Constraint, Objective, ReportedTau, Side, TestUtility,
    INFEASIBLE_SCORE,
};
