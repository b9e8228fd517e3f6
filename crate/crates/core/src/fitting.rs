//! Maximum marginal-likelihood estimation of the hyperparameters.
//!
//! The likelihood is evaluated on a fixed set of standard-normal draws, which
//! makes it a deterministic (if piecewise-constant in the preference terms)
//! function of the hyperparameters. It is maximized by multi-start
//! Nelder-Mead over the unit cube, mapped affinely onto the location bounds
//! and log-affinely onto the scale bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodEvaluator, PreferenceDataset, DEFAULT_FIT_SAMPLES};
use crate::model::{HyperParams, MetricSpace};
use crate::optim::{latin_hypercube, NelderMead};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T: Scalar = f64> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }
}

/// Box constraints on the hyperparameters, shared by every metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaBounds<T: Scalar = f64> {
    pub mu_alpha: Interval<T>,
    pub sigma_alpha: Interval<T>,
    pub mu_beta: Interval<T>,
    pub sigma_beta: Interval<T>,
    pub sigma_e: Interval<T>,
}

impl<T: Scalar> Default for ThetaBounds<T> {
    fn default() -> Self {
        let mu = Interval::new(T::lit(0.1).ln(), T::lit(20.0).ln());
        let sigma = Interval::new(T::lit(0.01), T::lit(2.0));
        Self {
            mu_alpha: mu,
            sigma_alpha: sigma,
            mu_beta: mu,
            sigma_beta: sigma,
            sigma_e: Interval::new(T::lit(1e-4), T::lit(0.5)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Axis<T> {
    Linear(T, T),
    Log(T, T),
}

impl<T: Scalar> Axis<T> {
    fn decode(self, u: T) -> T {
        match self {
            Axis::Linear(lo, hi) => lo + u * (hi - lo),
            Axis::Log(lo, hi) => (lo + u * (hi - lo)).exp(),
        }
    }

    fn encode(self, v: T) -> T {
        let u = match self {
            Axis::Linear(lo, hi) => (v - lo) / (hi - lo),
            Axis::Log(lo, hi) => (v.max(T::min_positive_value()).ln() - lo) / (hi - lo),
        };
        u.max(T::zero()).min(T::one())
    }
}

impl<T: Scalar> ThetaBounds<T> {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, iv: &Interval<T>, positive: bool| -> Result<()> {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
                return Err(Error::InvalidConfig(format!(
                    "bound {name}: need lo < hi, got [{}, {}]",
                    iv.lo, iv.hi
                )));
            }
            if positive && iv.lo <= T::zero() {
                return Err(Error::InvalidConfig(format!(
                    "bound {name}: scales need a positive lower bound"
                )));
            }
            Ok(())
        };
        check("mu_alpha", &self.mu_alpha, false)?;
        check("sigma_alpha", &self.sigma_alpha, true)?;
        check("mu_beta", &self.mu_beta, false)?;
        check("sigma_beta", &self.sigma_beta, true)?;
        check("sigma_e", &self.sigma_e, true)
    }

    fn axes(&self, n_metrics: usize) -> Vec<Axis<T>> {
        let lin = |iv: Interval<T>| Axis::Linear(iv.lo, iv.hi);
        let log = |iv: Interval<T>| Axis::Log(iv.lo.ln(), iv.hi.ln());
        let mut axes = Vec::with_capacity(4 * n_metrics + 1);
        for _ in 0..n_metrics {
            axes.extend([
                lin(self.mu_alpha),
                log(self.sigma_alpha),
                lin(self.mu_beta),
                log(self.sigma_beta),
            ]);
        }
        axes.push(log(self.sigma_e));
        axes
    }

    /// Per-coordinate `[lo, hi]` box in the flattened hyperparameter order.
    pub fn coordinate_bounds(&self, n_metrics: usize) -> Vec<Interval<T>> {
        let mut out = Vec::with_capacity(4 * n_metrics + 1);
        for _ in 0..n_metrics {
            out.extend([self.mu_alpha, self.sigma_alpha, self.mu_beta, self.sigma_beta]);
        }
        out.push(self.sigma_e);
        out
    }

    pub fn decode(&self, n_metrics: usize, unit: &[T]) -> Result<HyperParams<T>> {
        let values: Vec<T> = self
            .axes(n_metrics)
            .iter()
            .zip(unit)
            .map(|(a, &u)| a.decode(u))
            .collect();
        HyperParams::from_slice(&values)
    }

    pub fn encode(&self, theta: &HyperParams<T>) -> Vec<T> {
        self.axes(theta.n_metrics())
            .iter()
            .zip(theta.to_vec())
            .map(|(a, v)| a.encode(v))
            .collect()
    }

    /// Center of the transformed box: locations at the midpoint of their
    /// range, scales at the geometric midpoint.
    pub fn center(&self, n_metrics: usize) -> HyperParams<T> {
        let half = vec![T::lit(0.5); 4 * n_metrics + 1];
        self.decode(n_metrics, &half)
            .expect("bounds produce valid hyperparameters")
    }

    pub fn contains(&self, theta: &HyperParams<T>) -> bool {
        let tol = T::lit(1e-9);
        self.coordinate_bounds(theta.n_metrics())
            .iter()
            .zip(theta.to_vec())
            .all(|(iv, v)| {
                let slack = tol * (iv.hi - iv.lo).abs().max(T::one());
                v >= iv.lo - slack && v <= iv.hi + slack
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig<T: Scalar = f64> {
    pub bounds: ThetaBounds<T>,
    /// Latin-hypercube starts in addition to the box center (and warm start).
    pub n_starts: usize,
    pub max_evals_per_start: usize,
    pub mc_samples: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub record_trace: bool,
}

impl<T: Scalar> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            bounds: ThetaBounds::default(),
            n_starts: 16,
            max_evals_per_start: 200,
            mc_samples: DEFAULT_FIT_SAMPLES,
            base_seed: 0,
            record_trace: false,
        }
    }
}

impl<T: Scalar> FitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        if self.mc_samples == 0 || self.max_evals_per_start == 0 {
            return Err(Error::InvalidConfig(
                "fit needs samples and an evaluation budget".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T: Scalar = f64> {
    pub theta_mle: HyperParams<T>,
    pub log_likelihood: T,
    pub n_evaluations: usize,
    /// Successive incumbents `(theta, log-likelihood)` over the starts.
    pub trace: Option<Vec<(HyperParams<T>, T)>>,
}

pub fn fit_mle<T: Scalar>(
    data: &PreferenceDataset<T>,
    config: &FitConfig<T>,
    space: &MetricSpace,
) -> Result<FitResult<T>> {
    fit_mle_warm(data, config, space, None)
}

/// As [`fit_mle`], with one extra start at `warm` (typically the previous
/// estimate of an ongoing session).
pub fn fit_mle_warm<T: Scalar>(
    data: &PreferenceDataset<T>,
    config: &FitConfig<T>,
    space: &MetricSpace,
    warm: Option<&HyperParams<T>>,
) -> Result<FitResult<T>> {
    config.validate()?;
    let n = space.n_metrics();
    let center = config.bounds.center(n);
    if data.is_empty() {
        return Ok(FitResult {
            trace: config.record_trace.then(|| vec![(center.clone(), T::zero())]),
            theta_mle: center,
            log_likelihood: T::zero(),
            n_evaluations: 0,
        });
    }
    if let Some(w) = warm {
        space.check_len(w.n_metrics())?;
    }

    let evaluator = LikelihoodEvaluator::new(data, space, config.mc_samples, config.base_seed)?;
    let dim = 4 * n + 1;

    let mut starts: Vec<Vec<T>> = vec![vec![T::lit(0.5); dim]];
    if let Some(w) = warm {
        starts.push(config.bounds.encode(w));
    }
    starts.extend(
        latin_hypercube(config.n_starts, dim, config.base_seed ^ 0x5eed_1a7e)
            .into_iter()
            .map(|p| p.into_iter().map(T::lit).collect()),
    );

    let nm = NelderMead {
        max_evals: config.max_evals_per_start,
        ..NelderMead::default()
    };
    let objective = |u: &[T]| -> T {
        match config
            .bounds
            .decode(n, u)
            .and_then(|theta| evaluator.log_likelihood(&theta))
        {
            Ok(ll) => -ll,
            Err(_) => T::infinity(),
        }
    };

    let results: Vec<_> = starts.par_iter().map(|s| nm.minimize(objective, s)).collect();

    let mut n_evaluations = 0;
    let mut best: Option<(usize, T)> = None;
    let mut trace = Vec::new();
    for (k, r) in results.iter().enumerate() {
        n_evaluations += r.evals;
        let ll = -r.value;
        // strict improvement keeps the lowest start index on ties
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((k, ll));
            if config.record_trace {
                trace.push((config.bounds.decode(n, &r.x)?, ll));
            }
        }
    }
    let (k, log_likelihood) = best.expect("at least the center start");
    Ok(FitResult {
        theta_mle: config.bounds.decode(n, &results[k].x)?,
        log_likelihood,
        n_evaluations,
        trace: config.record_trace.then_some(trace),
    })
}
