//! Monte-Carlo marginal likelihood of preference data under the hyperparameters.
//!
//! A strict preference `worse < better` contributes the probability that a
//! shape sample drawn from the priors ranks `better` above `worse`; a
//! perceived-equal pair contributes the two-tailed probability that a
//! `N(0, sigma_e)` margin exceeds the utility gap. Both are averaged over one
//! common set of shape samples per evaluation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    utility_difference, Direction, HyperParams, MetricSpace, MetricVector, PreparedPoint, ShapeSample, StandardDraws,
};
use crate::scalar::Scalar;
use crate::special::BetaCdf;

pub const DEFAULT_FIT_SAMPLES: usize = 256;
pub const DEFAULT_REPORT_SAMPLES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair<T: Scalar = f64> {
    pub worse: MetricVector<T>,
    pub better: MetricVector<T>,
}

impl<T: Scalar> PreferencePair<T> {
    pub fn new(worse: MetricVector<T>, better: MetricVector<T>) -> Self {
        Self { worse, better }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalencePair<T: Scalar = f64> {
    pub a: MetricVector<T>,
    pub b: MetricVector<T>,
}

impl<T: Scalar> EquivalencePair<T> {
    pub fn new(a: MetricVector<T>, b: MetricVector<T>) -> Self {
        Self { a, b }
    }

    /// Both sides are the same configuration.
    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PreferenceDataset<T: Scalar = f64> {
    pub preferences: Vec<PreferencePair<T>>,
    pub equivalences: Vec<EquivalencePair<T>>,
}

impl<T: Scalar> PreferenceDataset<T> {
    pub fn new() -> Self {
        Self {
            preferences: Vec::new(),
            equivalences: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.preferences.len() + self.equivalences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push_preference(&mut self, worse: MetricVector<T>, better: MetricVector<T>) {
        self.preferences.push(PreferencePair { worse, better });
    }

    pub fn push_equivalence(&mut self, a: MetricVector<T>, b: MetricVector<T>) {
        self.equivalences.push(EquivalencePair { a, b });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodEstimate<T: Scalar = f64> {
    pub log_value: T,
    pub n_samples: usize,
    pub seed: u64,
}

/// Laplace-smoothed share of samples with `u(better) > u(worse)`; exact ties
/// count one half.
pub fn preference_pair_probability<T: Scalar>(
    pair: &PreferencePair<T>,
    shapes: &[ShapeSample<T>],
    space: &MetricSpace,
) -> Result<T> {
    if shapes.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut halves = 0u64;
    for s in shapes {
        halves += heaviside_halves(utility_difference(&pair.worse, &pair.better, s, space)?);
    }
    Ok(smoothed_preference(halves, shapes.len()))
}

/// Mean over samples of `2 * Phi(-|u_d| / sigma_e)`.
pub fn equivalence_pair_probability<T: Scalar>(
    pair: &EquivalencePair<T>,
    shapes: &[ShapeSample<T>],
    sigma_e: T,
    space: &MetricSpace,
) -> Result<T> {
    if shapes.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if !(sigma_e > T::zero() && sigma_e.is_finite()) {
        return Err(Error::InvalidHyperParams(format!(
            "sigma_e must be positive, got {sigma_e}"
        )));
    }
    let scale = (sigma_e * T::SQRT_2()).recip();
    let mut sum = T::zero();
    for s in shapes {
        sum = sum + two_tailed(utility_difference(&pair.a, &pair.b, s, space)?, scale);
    }
    Ok(mean_equivalence(sum, shapes.len()))
}

/// Log marginal likelihood of the whole dataset on one common sample set.
pub fn log_marginal_likelihood<T: Scalar>(
    data: &PreferenceDataset<T>,
    theta: &HyperParams<T>,
    space: &MetricSpace,
    n_samples: usize,
    seed: u64,
) -> Result<LikelihoodEstimate<T>> {
    theta.validate()?;
    let eval = LikelihoodEvaluator::new(data, space, n_samples, seed)?;
    Ok(LikelihoodEstimate {
        log_value: eval.log_likelihood(theta)?,
        n_samples,
        seed,
    })
}

#[inline]
fn heaviside_halves<T: Scalar>(d: T) -> u64 {
    if d > T::zero() {
        2
    } else if d == T::zero() {
        1
    } else {
        0
    }
}

#[inline]
fn smoothed_preference<T: Scalar>(halves: u64, n: usize) -> T {
    (T::lit(halves as f64) * T::lit(0.5) + T::one()) / T::lit(n as f64 + 2.0)
}

#[inline]
fn two_tailed<T: Scalar>(d: T, scale: T) -> T {
    (d.abs() * scale).erfc()
}

#[inline]
fn mean_equivalence<T: Scalar>(sum: T, n: usize) -> T {
    // erfc underflows to zero for gaps beyond ~37 sigma_e; the floor keeps the
    // log finite and roughly continues the -gap^2 decay of the true value.
    (sum / T::lit(n as f64)).max(T::min_positive_value())
}

/// The dataset prepared for repeated likelihood evaluation at many
/// hyperparameter vectors with a fixed set of standard-normal draws.
#[derive(Debug, Clone)]
pub struct LikelihoodEvaluator<T: Scalar = f64> {
    directions: Vec<Direction>,
    draws: StandardDraws<T>,
    points: Vec<PreparedPoint<T>>,
    preferences: Vec<(usize, usize)>,
    equivalences: Vec<(usize, usize)>,
}

impl<T: Scalar> LikelihoodEvaluator<T> {
    pub fn new(data: &PreferenceDataset<T>, space: &MetricSpace, n_samples: usize, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let mut points = Vec::new();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut intern = |f: &MetricVector<T>| -> Result<usize> {
            space.check_len(f.len())?;
            let key: Vec<u64> = f.values().iter().map(|v| v.to_f64_lossy().to_bits()).collect();
            Ok(*index.entry(key).or_insert_with(|| {
                points.push(PreparedPoint::new(f));
                points.len() - 1
            }))
        };
        let mut preferences = Vec::with_capacity(data.preferences.len());
        for p in &data.preferences {
            preferences.push((intern(&p.worse)?, intern(&p.better)?));
        }
        let mut equivalences = Vec::with_capacity(data.equivalences.len());
        for e in &data.equivalences {
            equivalences.push((intern(&e.a)?, intern(&e.b)?));
        }
        Ok(Self {
            directions: space.directions().to_vec(),
            draws: StandardDraws::generate(n_samples, space.n_metrics(), seed),
            points,
            preferences,
            equivalences,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.draws.count()
    }

    pub fn n_pairs(&self) -> usize {
        self.preferences.len() + self.equivalences.len()
    }

    /// Per-pair probabilities: preferences first, then equivalences, each in
    /// dataset order.
    pub fn pair_probabilities(&self, theta: &HyperParams<T>) -> Result<Vec<T>> {
        if theta.n_metrics() != self.directions.len() {
            return Err(Error::DimensionMismatch {
                expected: self.directions.len(),
                got: theta.n_metrics(),
            });
        }
        if theta.sigma_e.is_nan() || theta.sigma_e <= T::zero() {
            return Err(Error::InvalidHyperParams("sigma_e must be positive".into()));
        }
        let n = self.draws.count();
        let n_metrics = self.directions.len();
        let scale = (theta.sigma_e * T::SQRT_2()).recip();

        let mut halves = vec![0u64; self.preferences.len()];
        let mut sums = vec![T::zero(); self.equivalences.len()];
        let mut utils = vec![T::zero(); self.points.len()];
        let mut cdfs = vec![BetaCdf::new(T::one(), T::one()); n_metrics];

        for s in 0..n {
            for (i, slot) in cdfs.iter_mut().enumerate() {
                let (a, b) = self.draws.shape(theta, s, i);
                *slot = BetaCdf::new(a, b);
            }
            for (u, p) in utils.iter_mut().zip(&self.points) {
                *u = p.utility(&cdfs, &self.directions);
            }
            for (h, &(w, b)) in halves.iter_mut().zip(&self.preferences) {
                *h += heaviside_halves(utils[b] - utils[w]);
            }
            for (sum, &(a, b)) in sums.iter_mut().zip(&self.equivalences) {
                *sum = *sum + two_tailed(utils[b] - utils[a], scale);
            }
        }

        Ok(halves
            .into_iter()
            .map(|h| smoothed_preference(h, n))
            .chain(sums.into_iter().map(|s| mean_equivalence(s, n)))
            .collect())
    }

    pub fn log_likelihood(&self, theta: &HyperParams<T>) -> Result<T> {
        if self.n_pairs() == 0 {
            return Ok(T::zero());
        }
        Ok(self
            .pair_probabilities(theta)?
            .into_iter()
            .fold(T::zero(), |acc, p| acc + p.ln()))
    }
}
