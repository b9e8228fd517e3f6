//! The product-of-beta-CDF utility model.
//!
//! Each metric `i` gets an individual utility `u_i(f_i) = I_{f_i}(alpha_i, beta_i)`
//! (or its survival function for metrics that are minimized) and the joint
//! utility is the product of the individual ones. Shape parameters are drawn
//! from log-normal priors whose locations and scales form the hyperparameter
//! vector that the fitting module estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::BetaCdf;

/// Sampled shape parameters are clamped into this range so the CDF evaluator
/// stays well conditioned in the log-normal tails.
pub const SHAPE_MIN: f64 = 1e-3;
pub const SHAPE_MAX: f64 = 1e3;

pub const DEFAULT_CURVE_SAMPLES: usize = 1000;
pub const DEFAULT_CURVE_GRID: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// Maps a raw metric value to its "larger is better" orientation.
    #[inline]
    pub fn orient<T: Scalar>(self, x: T) -> T {
        match self {
            Direction::Maximize => x,
            Direction::Minimize => T::one() - x,
        }
    }
}

/// The metric space `[0, 1]^N` with a per-metric optimization direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpace {
    directions: Vec<Direction>,
}

impl MetricSpace {
    pub fn new(directions: Vec<Direction>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidConfig("metric space needs at least one metric".into()));
        }
        Ok(Self { directions })
    }

    pub fn all_maximize(n_metrics: usize) -> Result<Self> {
        Self::new(vec![Direction::Maximize; n_metrics])
    }

    pub fn n_metrics(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn direction(&self, index: usize) -> Direction {
        self.directions[index]
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_metrics() {
            return Err(Error::DimensionMismatch {
                expected: self.n_metrics(),
                got: len,
            });
        }
        Ok(())
    }
}

/// A point of the metric space, every component in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
pub struct MetricVector<T: Scalar = f64> {
    values: Vec<T>,
}

impl<T: Scalar> MetricVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("metric vector is empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::Domain(format!("metric value {bad} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, index: usize) -> T {
        self.values[index]
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for MetricVector<T> {
    type Error = Error;

    fn try_from(values: Vec<T>) -> Result<Self> {
        Self::new(values)
    }
}

impl<T: Scalar> From<MetricVector<T>> for Vec<T> {
    fn from(v: MetricVector<T>) -> Self {
        v.values
    }
}

/// Weak dominance after direction adjustment: `a` is at least as good as `b`
/// on every metric.
pub fn dominates<T: Scalar>(a: &MetricVector<T>, b: &MetricVector<T>, space: &MetricSpace) -> Result<bool> {
    space.check_len(a.len())?;
    space.check_len(b.len())?;
    Ok(space
        .directions()
        .iter()
        .zip(a.values().iter().zip(b.values()))
        .all(|(d, (&x, &y))| d.orient(x) >= d.orient(y)))
}

/// One draw of the beta shape parameters for every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSample<T: Scalar = f64> {
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Scalar> ShapeSample<T> {
    pub fn new(alpha: Vec<T>, beta: Vec<T>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                got: beta.len(),
            });
        }
        let ok = |v: &T| *v > T::zero() && v.is_finite();
        if !alpha.iter().all(ok) || !beta.iter().all(ok) {
            return Err(Error::Domain("shape parameters must be positive and finite".into()));
        }
        Ok(Self { alpha, beta })
    }

    /// All shapes equal to one: every individual utility is the identity.
    pub fn uniform(n_metrics: usize) -> Self {
        Self {
            alpha: vec![T::one(); n_metrics],
            beta: vec![T::one(); n_metrics],
        }
    }

    pub fn n_metrics(&self) -> usize {
        self.alpha.len()
    }
}

/// Log-normal prior for one metric's `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPrior<T: Scalar = f64> {
    pub mu_alpha: T,
    pub sigma_alpha: T,
    pub mu_beta: T,
    pub sigma_beta: T,
}

/// The `4N + 1` hyperparameters: a log-normal prior per metric plus the
/// scale of the equivalence margin.
///
/// Scales are standard deviations of `ln alpha`, `ln beta`. A scale of exactly
/// zero is accepted and means the prior is a point mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams<T: Scalar = f64> {
    pub metrics: Vec<MetricPrior<T>>,
    pub sigma_e: T,
}

impl<T: Scalar> HyperParams<T> {
    pub fn new(metrics: Vec<MetricPrior<T>>, sigma_e: T) -> Result<Self> {
        let theta = Self { metrics, sigma_e };
        theta.validate()?;
        Ok(theta)
    }

    /// Every metric shares the same prior.
    pub fn uniform_prior(n_metrics: usize, prior: MetricPrior<T>, sigma_e: T) -> Result<Self> {
        Self::new(vec![prior; n_metrics], sigma_e)
    }

    /// Point mass at `alpha = beta = 1`: the identity individual utility.
    pub fn degenerate_uniform(n_metrics: usize, sigma_e: T) -> Result<Self> {
        let zero = T::zero();
        Self::uniform_prior(
            n_metrics,
            MetricPrior {
                mu_alpha: zero,
                sigma_alpha: zero,
                mu_beta: zero,
                sigma_beta: zero,
            },
            sigma_e,
        )
    }

    pub fn n_metrics(&self) -> usize {
        self.metrics.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::InvalidHyperParams("no metrics".into()));
        }
        for (i, m) in self.metrics.iter().enumerate() {
            if !m.mu_alpha.is_finite() || !m.mu_beta.is_finite() {
                return Err(Error::InvalidHyperParams(format!("metric {i}: non-finite location")));
            }
            let scale_ok = |s: T| s >= T::zero() && s.is_finite();
            if !scale_ok(m.sigma_alpha) || !scale_ok(m.sigma_beta) {
                return Err(Error::InvalidHyperParams(format!(
                    "metric {i}: scales must be finite and non-negative"
                )));
            }
        }
        if !(self.sigma_e > T::zero() && self.sigma_e.is_finite()) {
            return Err(Error::InvalidHyperParams(format!(
                "sigma_e must be positive, got {}",
                self.sigma_e
            )));
        }
        Ok(())
    }

    /// Flattens to `(mu_a1, sigma_a1, mu_b1, sigma_b1, mu_a2, ..., sigma_e)`.
    pub fn to_vec(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(4 * self.metrics.len() + 1);
        for m in &self.metrics {
            out.extend([m.mu_alpha, m.sigma_alpha, m.mu_beta, m.sigma_beta]);
        }
        out.push(self.sigma_e);
        out
    }

    pub fn from_slice(values: &[T]) -> Result<Self> {
        if values.len() < 5 || !(values.len() - 1).is_multiple_of(4) {
            return Err(Error::InvalidHyperParams(format!(
                "expected 4N+1 values, got {}",
                values.len()
            )));
        }
        let metrics = values[..values.len() - 1]
            .chunks_exact(4)
            .map(|c| MetricPrior {
                mu_alpha: c[0],
                sigma_alpha: c[1],
                mu_beta: c[2],
                sigma_beta: c[3],
            })
            .collect();
        Self::new(metrics, values[values.len() - 1])
    }
}

#[inline]
pub(crate) fn clamp_shape<T: Scalar>(v: T) -> T {
    v.max(T::lit(SHAPE_MIN)).min(T::lit(SHAPE_MAX))
}

/// Standard-normal draws behind a set of shape samples.
///
/// The draws depend only on the seed, so the same set can be pushed through
/// many hyperparameter vectors (common random numbers).
#[derive(Debug, Clone, PartialEq)]
pub struct StandardDraws<T: Scalar = f64> {
    count: usize,
    n_metrics: usize,
    // [sample][metric][alpha, beta]
    z: Vec<T>,
}

impl<T: Scalar> StandardDraws<T> {
    pub fn generate(count: usize, n_metrics: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = (0..count * n_metrics * 2)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                T::lit(v)
            })
            .collect();
        Self { count, n_metrics, z }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn n_metrics(&self) -> usize {
        self.n_metrics
    }

    /// Clamped `(alpha, beta)` of sample `s`, metric `i`.
    #[inline]
    pub fn shape(&self, theta: &HyperParams<T>, s: usize, i: usize) -> (T, T) {
        let k = (s * self.n_metrics + i) * 2;
        let p = &theta.metrics[i];
        let a = (p.mu_alpha + p.sigma_alpha * self.z[k]).exp();
        let b = (p.mu_beta + p.sigma_beta * self.z[k + 1]).exp();
        (clamp_shape(a), clamp_shape(b))
    }

    pub fn shapes(&self, theta: &HyperParams<T>) -> Result<Vec<ShapeSample<T>>> {
        if theta.n_metrics() != self.n_metrics {
            return Err(Error::DimensionMismatch {
                expected: self.n_metrics,
                got: theta.n_metrics(),
            });
        }
        Ok((0..self.count)
            .map(|s| {
                let (alpha, beta) = (0..self.n_metrics).map(|i| self.shape(theta, s, i)).unzip();
                ShapeSample { alpha, beta }
            })
            .collect())
    }
}

/// Draws `count` shape samples from the log-normal priors in `theta`.
pub fn sample_shapes<T: Scalar>(theta: &HyperParams<T>, count: usize, seed: u64) -> Result<Vec<ShapeSample<T>>> {
    theta.validate()?;
    StandardDraws::generate(count, theta.n_metrics(), seed).shapes(theta)
}

/// Beta CDF (maximized metric) or survival function (minimized metric).
pub fn individual_utility<T: Scalar>(x: T, alpha: T, beta: T, direction: Direction) -> Result<T> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::Domain(format!("x={x} outside [0, 1]")));
    }
    if !(alpha > T::zero() && alpha.is_finite() && beta > T::zero() && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "shape parameters must be positive (alpha={alpha}, beta={beta})"
        )));
    }
    let dist = BetaCdf::new(alpha, beta);
    Ok(match direction {
        Direction::Maximize => dist.cdf(x),
        Direction::Minimize => dist.survival(x),
    })
}

pub fn joint_utility<T: Scalar>(f: &MetricVector<T>, s: &ShapeSample<T>, space: &MetricSpace) -> Result<T> {
    space.check_len(f.len())?;
    space.check_len(s.n_metrics())?;
    let mut u = T::one();
    for (i, &d) in space.directions().iter().enumerate() {
        u = u * individual_utility(f.get(i), s.alpha[i], s.beta[i], d)?;
    }
    Ok(u)
}

/// `u(f2) - u(f1)`.
pub fn utility_difference<T: Scalar>(
    f1: &MetricVector<T>,
    f2: &MetricVector<T>,
    s: &ShapeSample<T>,
    space: &MetricSpace,
) -> Result<T> {
    Ok(joint_utility(f2, s, space)? - joint_utility(f1, s, space)?)
}

/// A metric vector with its logarithms precomputed for repeated CDF calls.
#[derive(Debug, Clone)]
pub(crate) struct PreparedPoint<T> {
    x: Vec<T>,
    ln_x: Vec<T>,
    ln_1mx: Vec<T>,
}

impl<T: Scalar> PreparedPoint<T> {
    pub(crate) fn new(f: &MetricVector<T>) -> Self {
        Self {
            x: f.values().to_vec(),
            ln_x: f.values().iter().map(|v| v.ln()).collect(),
            ln_1mx: f.values().iter().map(|v| (T::one() - *v).ln()).collect(),
        }
    }

    /// Joint utility against one sample's per-metric distributions.
    #[inline]
    pub(crate) fn utility(&self, cdfs: &[BetaCdf<T>], directions: &[Direction]) -> T {
        let mut u = T::one();
        for (i, dist) in cdfs.iter().enumerate() {
            let v = match directions[i] {
                Direction::Maximize => dist.cdf_with_logs(self.x[i], self.ln_x[i], self.ln_1mx[i]),
                Direction::Minimize => dist.survival_with_logs(self.x[i], self.ln_x[i], self.ln_1mx[i]),
            };
            u = u * v;
        }
        u
    }
}

/// Pointwise quantiles of one individual utility over the prior on its shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityCurveSummary<T: Scalar = f64> {
    pub metric_index: usize,
    pub direction: Direction,
    pub grid: Vec<T>,
    pub median: Vec<T>,
    pub q25: Vec<T>,
    pub q75: Vec<T>,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn sorted_quantile<T: Scalar>(sorted: &[T], q: f64) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = T::lit(h - lo as f64);
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

pub fn curve_summary<T: Scalar>(
    theta: &HyperParams<T>,
    space: &MetricSpace,
    metric_index: usize,
    n_samples: usize,
    grid_size: usize,
    seed: u64,
) -> Result<UtilityCurveSummary<T>> {
    theta.validate()?;
    space.check_len(theta.n_metrics())?;
    if metric_index >= space.n_metrics() {
        return Err(Error::IndexOutOfRange {
            index: metric_index,
            len: space.n_metrics(),
        });
    }
    if n_samples == 0 || grid_size < 2 {
        return Err(Error::InvalidConfig(
            "curve summary needs samples and a grid of at least 2".into(),
        ));
    }
    let draws = StandardDraws::generate(n_samples, space.n_metrics(), seed);
    let dists: Vec<BetaCdf<T>> = (0..n_samples)
        .map(|s| {
            let (a, b) = draws.shape(theta, s, metric_index);
            BetaCdf::new(a, b)
        })
        .collect();
    let direction = space.direction(metric_index);
    let last = T::lit((grid_size - 1) as f64);
    let grid: Vec<T> = (0..grid_size).map(|g| T::lit(g as f64) / last).collect();

    let mut median = Vec::with_capacity(grid_size);
    let mut q25 = Vec::with_capacity(grid_size);
    let mut q75 = Vec::with_capacity(grid_size);
    let mut column = vec![T::zero(); n_samples];
    for &x in &grid {
        for (slot, dist) in column.iter_mut().zip(&dists) {
            *slot = match direction {
                Direction::Maximize => dist.cdf(x),
                Direction::Minimize => dist.survival(x),
            };
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        q25.push(sorted_quantile(&column, 0.25));
        median.push(sorted_quantile(&column, 0.5));
        q75.push(sorted_quantile(&column, 0.75));
    }
    Ok(UtilityCurveSummary {
        metric_index,
        direction,
        grid,
        median,
        q25,
        q75,
    })
}
