//! Query selection: which two configurations to show the user next.
//!
//! The entropy-style policies score a candidate pair by the sample variance
//! of its utility difference over shape draws from the current
//! hyperparameters, and keep the best of `K` random candidates. Every pair
//! returned is incomparable, i.e. neither side dominates the other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    sample_shapes, utility_difference, HyperParams, MetricSpace, MetricVector, PreparedPoint, ShapeSample,
};
use crate::scalar::Scalar;
use crate::seeds::derive_seed;
use crate::special::BetaCdf;

pub const DEFAULT_CANDIDATES: usize = 2048;
pub const DEFAULT_ACQUISITION_SAMPLES: usize = 512;
/// Rejection-sampling cap, as a multiple of the candidate count.
pub const REJECTION_FACTOR: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    SingleEntropy,
    PairEntropy,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Random, PolicyKind::SingleEntropy, PolicyKind::PairEntropy];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::SingleEntropy => "single_entropy",
            PolicyKind::PairEntropy => "pair_entropy",
        }
    }

    /// Whether proposals depend on the fitted model.
    pub fn uses_model(self) -> bool {
        !matches!(self, PolicyKind::Random)
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random" | "rnd" => Ok(PolicyKind::Random),
            "single_entropy" | "single" => Ok(PolicyKind::SingleEntropy),
            "pair_entropy" | "pair" => Ok(PolicyKind::PairEntropy),
            other => Err(Error::InvalidConfig(format!("unknown policy '{other}'"))),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPolicy {
    pub kind: PolicyKind,
    pub n_candidates: usize,
    pub n_shape_samples: usize,
    pub seed: u64,
}

impl QueryPolicy {
    pub fn new(kind: PolicyKind, seed: u64) -> Self {
        Self {
            kind,
            n_candidates: DEFAULT_CANDIDATES,
            n_shape_samples: DEFAULT_ACQUISITION_SAMPLES,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 {
            return Err(Error::InvalidConfig("policy needs at least one candidate".into()));
        }
        if self.kind.uses_model() && self.n_shape_samples < 2 {
            return Err(Error::InvalidConfig(
                "entropy policies need at least two shape samples".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPair<T: Scalar = f64> {
    pub a: MetricVector<T>,
    pub b: MetricVector<T>,
    pub acquisition_value: T,
}

/// True iff each vector is strictly better than the other on at least one
/// metric, after direction adjustment.
pub fn incomparable<T: Scalar>(f1: &MetricVector<T>, f2: &MetricVector<T>, space: &MetricSpace) -> Result<bool> {
    space.check_len(f1.len())?;
    space.check_len(f2.len())?;
    let (mut first_wins, mut second_wins) = (false, false);
    for (d, (&x, &y)) in space.directions().iter().zip(f1.values().iter().zip(f2.values())) {
        let (x, y) = (d.orient(x), d.orient(y));
        first_wins |= x > y;
        second_wins |= y > x;
    }
    Ok(first_wins && second_wins)
}

pub(crate) fn unbiased_variance<T: Scalar>(xs: &[T]) -> T {
    // shifted by the first value so identical inputs give exactly zero
    let n = T::lit(xs.len() as f64);
    let k = xs[0];
    let (s, ss) = xs.iter().fold((T::zero(), T::zero()), |(s, ss), &x| {
        (s + (x - k), ss + (x - k) * (x - k))
    });
    ((ss - s * s / n) / (n - T::one())).max(T::zero())
}

/// Sample variance of `u(f2) - u(f1)` over the shape samples.
pub fn acquisition_value<T: Scalar>(
    f1: &MetricVector<T>,
    f2: &MetricVector<T>,
    shapes: &[ShapeSample<T>],
    space: &MetricSpace,
) -> Result<T> {
    if shapes.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: shapes.len(),
        });
    }
    let diffs = shapes
        .iter()
        .map(|s| utility_difference(f1, f2, s, space))
        .collect::<Result<Vec<_>>>()?;
    Ok(unbiased_variance(&diffs))
}

fn uniform_point<T: Scalar>(rng: &mut ChaCha8Rng, n: usize) -> MetricVector<T> {
    let values = (0..n).map(|_| T::lit(rng.random::<f64>())).collect();
    MetricVector::new(values).expect("uniform draws lie in [0, 1)")
}

/// Uniform pair redrawn until incomparable, at most `cap` draws.
pub fn random_incomparable_pair<T: Scalar>(
    rng: &mut ChaCha8Rng,
    space: &MetricSpace,
    cap: usize,
) -> Result<(MetricVector<T>, MetricVector<T>)> {
    let n = space.n_metrics();
    for _ in 0..cap {
        let a = uniform_point(rng, n);
        let b = uniform_point(rng, n);
        if incomparable(&a, &b, space)? {
            return Ok((a, b));
        }
    }
    Err(Error::NoIncomparablePair { attempts: cap })
}

/// Per-sample beta distributions, laid out `[sample][metric]`.
fn sample_cdfs<T: Scalar>(shapes: &[ShapeSample<T>]) -> Vec<BetaCdf<T>> {
    shapes
        .iter()
        .flat_map(|s| s.alpha.iter().zip(&s.beta).map(|(&a, &b)| BetaCdf::new(a, b)))
        .collect()
}

struct Scorer<'a, T: Scalar> {
    cdfs: Vec<BetaCdf<T>>,
    space: &'a MetricSpace,
    diffs: Vec<T>,
}

impl<'a, T: Scalar> Scorer<'a, T> {
    fn new(shapes: &[ShapeSample<T>], space: &'a MetricSpace) -> Self {
        Self {
            cdfs: sample_cdfs(shapes),
            space,
            diffs: vec![T::zero(); shapes.len()],
        }
    }

    fn utilities(&self, f: &MetricVector<T>) -> Vec<T> {
        let p = PreparedPoint::new(f);
        let n = self.space.n_metrics();
        self.cdfs
            .chunks_exact(n)
            .map(|c| p.utility(c, self.space.directions()))
            .collect()
    }

    fn score(&mut self, ua: &[T], b: &MetricVector<T>) -> T {
        let p = PreparedPoint::new(b);
        let n = self.space.n_metrics();
        for ((d, c), &a) in self.diffs.iter_mut().zip(self.cdfs.chunks_exact(n)).zip(ua) {
            *d = p.utility(c, self.space.directions()) - a;
        }
        unbiased_variance(&self.diffs)
    }
}

/// Proposes the next pair under `policy`. Deterministic in `policy.seed`.
///
/// `SingleEntropy` keeps `incumbent` as the first configuration and searches
/// only for its partner; without an incumbent it behaves like `PairEntropy`.
pub fn propose_query<T: Scalar>(
    policy: &QueryPolicy,
    theta: &HyperParams<T>,
    incumbent: Option<&MetricVector<T>>,
    space: &MetricSpace,
) -> Result<QueryPair<T>> {
    policy.validate()?;
    space.check_len(theta.n_metrics())?;
    let cap = REJECTION_FACTOR * policy.n_candidates;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);

    if policy.kind == PolicyKind::Random {
        let (a, b) = random_incomparable_pair(&mut rng, space, cap)?;
        return Ok(QueryPair {
            a,
            b,
            acquisition_value: T::zero(),
        });
    }

    let shapes = sample_shapes(theta, policy.n_shape_samples, derive_seed(policy.seed, 0x5a3e, 0))?;
    let mut scorer = Scorer::new(&shapes, space);
    let n = space.n_metrics();

    if let (PolicyKind::SingleEntropy, Some(anchor)) = (policy.kind, incumbent) {
        space.check_len(anchor.len())?;
        let ua = scorer.utilities(anchor);
        let mut best: Option<(MetricVector<T>, T)> = None;
        let mut found = 0;
        for _ in 0..cap {
            if found == policy.n_candidates {
                break;
            }
            let b = uniform_point(&mut rng, n);
            if !incomparable(anchor, &b, space)? {
                continue;
            }
            found += 1;
            let v = scorer.score(&ua, &b);
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((b, v));
            }
        }
        if let Some((b, acquisition_value)) = best {
            return Ok(QueryPair {
                a: anchor.clone(),
                b,
                acquisition_value,
            });
        }
        // anchor leaves no incomparable partner reachable; search pairs instead
        rng = ChaCha8Rng::seed_from_u64(policy.seed);
    }

    let mut best: Option<QueryPair<T>> = None;
    let mut draws = 0;
    let mut found = 0;
    while found < policy.n_candidates && draws < cap {
        draws += 1;
        let a = uniform_point(&mut rng, n);
        let b = uniform_point(&mut rng, n);
        if !incomparable(&a, &b, space)? {
            continue;
        }
        found += 1;
        let ua = scorer.utilities(&a);
        let v = scorer.score(&ua, &b);
        if best.as_ref().is_none_or(|q| v > q.acquisition_value) {
            best = Some(QueryPair {
                a,
                b,
                acquisition_value: v,
            });
        }
    }
    best.ok_or(Error::NoIncomparablePair { attempts: draws })
}

/// Candidate pairs `propose_query` scores for a `PairEntropy` policy, in
/// generation order. Exposed for verification of the argmax.
pub fn pair_candidates<T: Scalar>(
    policy: &QueryPolicy,
    space: &MetricSpace,
) -> Result<Vec<(MetricVector<T>, MetricVector<T>)>> {
    let cap = REJECTION_FACTOR * policy.n_candidates;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let n = space.n_metrics();
    let mut out = Vec::with_capacity(policy.n_candidates);
    let mut draws = 0;
    while out.len() < policy.n_candidates && draws < cap {
        draws += 1;
        let a = uniform_point(&mut rng, n);
        let b = uniform_point(&mut rng, n);
        if incomparable(&a, &b, space)? {
            out.push((a, b));
        }
    }
    Ok(out)
}

/// The shape samples `propose_query` scores candidates with.
pub fn acquisition_shapes<T: Scalar>(policy: &QueryPolicy, theta: &HyperParams<T>) -> Result<Vec<ShapeSample<T>>> {
    sample_shapes(theta, policy.n_shape_samples, derive_seed(policy.seed, 0x5a3e, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, MetricPrior};

    fn mv(v: &[f64]) -> MetricVector {
        MetricVector::new(v.to_vec()).unwrap()
    }

    fn generic_theta(n: usize) -> HyperParams {
        let prior = MetricPrior {
            mu_alpha: 0.4,
            sigma_alpha: 0.9,
            mu_beta: 0.2,
            sigma_beta: 0.7,
        };
        HyperParams::uniform_prior(n, prior, 0.05).unwrap()
    }

    #[test]
    fn incomparable_examples() {
        let space = MetricSpace::all_maximize(2).unwrap();
        assert!(incomparable(&mv(&[0.9, 0.1]), &mv(&[0.1, 0.9]), &space).unwrap());
        assert!(!incomparable(&mv(&[0.9, 0.9]), &mv(&[0.1, 0.9]), &space).unwrap());
        assert!(!incomparable(&mv(&[0.3, 0.3]), &mv(&[0.3, 0.3]), &space).unwrap());
        let mixed = MetricSpace::new(vec![Direction::Maximize, Direction::Minimize]).unwrap();
        assert!(!incomparable(&mv(&[0.9, 0.1]), &mv(&[0.1, 0.9]), &mixed).unwrap());
        assert!(incomparable(&mv(&[0.9, 0.9]), &mv(&[0.1, 0.1]), &mixed).unwrap());
        assert!(incomparable(&mv(&[0.9]), &mv(&[0.1, 0.1]), &space).is_err());
    }

    #[test]
    fn acquisition_value_examples() {
        let space = MetricSpace::all_maximize(2).unwrap();
        let shapes = sample_shapes(&generic_theta(2), 128, 3).unwrap();
        let a = mv(&[0.8, 0.2]);
        let b = mv(&[0.3, 0.6]);
        assert_eq!(acquisition_value(&a, &a, &shapes, &space).unwrap(), 0.0);
        let v = acquisition_value(&a, &b, &shapes, &space).unwrap();
        assert!(v > 0.0);
        assert_eq!(v, acquisition_value(&b, &a, &shapes, &space).unwrap());
        let degenerate = sample_shapes(&HyperParams::degenerate_uniform(2, 0.1).unwrap(), 64, 3).unwrap();
        assert_eq!(acquisition_value(&a, &b, &degenerate, &space).unwrap(), 0.0);
        assert!(acquisition_value(&a, &b, &shapes[..1], &space).is_err());
    }

    #[test]
    fn random_policy_returns_incomparable_pair() {
        let space = MetricSpace::all_maximize(2).unwrap();
        let policy = QueryPolicy::new(PolicyKind::Random, 77);
        let q = propose_query(&policy, &generic_theta(2), None, &space).unwrap();
        assert!(incomparable(&q.a, &q.b, &space).unwrap());
        assert_eq!(q, propose_query(&policy, &generic_theta(2), None, &space).unwrap());
    }

    #[test]
    fn degenerate_theta_picks_first_candidate() {
        let space = MetricSpace::all_maximize(2).unwrap();
        let policy = QueryPolicy {
            n_candidates: 32,
            ..QueryPolicy::new(PolicyKind::PairEntropy, 5)
        };
        let theta = HyperParams::degenerate_uniform(2, 0.1).unwrap();
        let q = propose_query(&policy, &theta, None, &space).unwrap();
        let first = &pair_candidates::<f64>(&policy, &space).unwrap()[0];
        assert_eq!(q.acquisition_value, 0.0);
        assert_eq!((&q.a, &q.b), (&first.0, &first.1));
    }

    #[test]
    fn pair_entropy_with_one_candidate_matches_random() {
        let space = MetricSpace::all_maximize(3).unwrap();
        for seed in 0..10 {
            let random = propose_query(
                &QueryPolicy::new(PolicyKind::Random, seed),
                &generic_theta(3),
                None,
                &space,
            )
            .unwrap();
            let pair = QueryPolicy {
                n_candidates: 1,
                ..QueryPolicy::new(PolicyKind::PairEntropy, seed)
            };
            let q = propose_query(&pair, &generic_theta(3), None, &space).unwrap();
            assert_eq!((q.a, q.b), (random.a, random.b));
        }
    }

    #[test]
    fn single_entropy_keeps_incumbent() {
        let space = MetricSpace::all_maximize(2).unwrap();
        let policy = QueryPolicy {
            n_candidates: 64,
            ..QueryPolicy::new(PolicyKind::SingleEntropy, 9)
        };
        let anchor = mv(&[0.7, 0.4]);
        let q = propose_query(&policy, &generic_theta(2), Some(&anchor), &space).unwrap();
        assert_eq!(q.a, anchor);
        assert!(incomparable(&q.a, &q.b, &space).unwrap());
        let shapes = acquisition_shapes(&policy, &generic_theta(2)).unwrap();
        assert_eq!(
            q.acquisition_value,
            acquisition_value(&q.a, &q.b, &shapes, &space).unwrap()
        );
    }

    #[test]
    fn single_entropy_falls_back_without_partner() {
        let space = MetricSpace::all_maximize(2).unwrap();
        let policy = QueryPolicy {
            n_candidates: 16,
            ..QueryPolicy::new(PolicyKind::SingleEntropy, 9)
        };
        // the all-ones corner dominates every other point
        let corner = mv(&[1.0, 1.0]);
        let q = propose_query(&policy, &generic_theta(2), Some(&corner), &space).unwrap();
        assert_ne!(q.a, corner);
        assert!(incomparable(&q.a, &q.b, &space).unwrap());
        let fallback = QueryPolicy {
            kind: PolicyKind::PairEntropy,
            ..policy
        };
        assert_eq!(q, propose_query(&fallback, &generic_theta(2), None, &space).unwrap());
    }

    #[test]
    fn single_metric_space_has_no_incomparable_pairs() {
        let space = MetricSpace::all_maximize(1).unwrap();
        let policy = QueryPolicy {
            n_candidates: 4,
            ..QueryPolicy::new(PolicyKind::Random, 1)
        };
        let err = propose_query(&policy, &generic_theta(1), None, &space).unwrap_err();
        assert!(matches!(err, Error::NoIncomparablePair { .. }));
    }

    #[test]
    fn policy_kind_parsing() {
        assert_eq!("pair".parse::<PolicyKind>().unwrap(), PolicyKind::PairEntropy);
        assert_eq!(
            "single-entropy".parse::<PolicyKind>().unwrap(),
            PolicyKind::SingleEntropy
        );
        assert_eq!("Random".parse::<PolicyKind>().unwrap(), PolicyKind::Random);
        assert!("greedy".parse::<PolicyKind>().is_err());
    }
}
