//! Learns a stakeholder's utility over several competing metrics from
//! pairwise preference queries.
//!
//! The utility is a product of per-metric beta CDFs whose shape parameters
//! carry log-normal priors. The prior hyperparameters are fitted by maximum
//! Monte-Carlo marginal likelihood, and queries are chosen where the model is
//! least certain about which configuration wins.
//!
//! The numerical core (model, likelihood, fitting, acquisition) is generic
//! over [`Scalar`] (`f32` or `f64`); sessions and the benchmark work in
//! [`Real`].

pub mod acquisition;
pub mod bench;
pub mod error;
pub mod fitting;
pub mod likelihood;
pub mod model;
pub mod optim;
pub mod scalar;
pub mod seeds;
pub mod session;
pub mod special;

pub use acquisition::{acquisition_value, incomparable, propose_query, PolicyKind, QueryPair, QueryPolicy};
pub use error::{Error, Result};
pub use fitting::{fit_mle, fit_mle_warm, FitConfig, FitResult, Interval, ThetaBounds};
pub use likelihood::{
    equivalence_pair_probability, log_marginal_likelihood, preference_pair_probability, EquivalencePair,
    LikelihoodEstimate, LikelihoodEvaluator, PreferenceDataset, PreferencePair,
};
pub use model::{
    curve_summary, individual_utility, joint_utility, sample_shapes, utility_difference, Direction, HyperParams,
    MetricPrior, MetricSpace, MetricVector, ShapeSample, UtilityCurveSummary,
};
pub use scalar::Scalar;
pub use session::{
    init_session, load_session, save_session, HistoryEntry, OracleResponse, Phase, SessionDocument, SessionState,
};

/// Scalar type of sessions, the benchmark and the service.
pub type Real = f64;

pub type MetricVector32 = MetricVector<f32>;
pub type ShapeSample32 = ShapeSample<f32>;
pub type HyperParams32 = HyperParams<f32>;
pub type PreferenceDataset32 = PreferenceDataset<f32>;
pub type FitConfig32 = FitConfig<f32>;
