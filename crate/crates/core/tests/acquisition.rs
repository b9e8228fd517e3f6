use prefelicit::acquisition::{acquisition_shapes, pair_candidates};
use prefelicit::*;

fn generic_theta(n: usize) -> HyperParams {
    let metrics = (0..n)
        .map(|i| MetricPrior {
            mu_alpha: 0.2 + 0.3 * i as f64,
            sigma_alpha: 0.8,
            mu_beta: 0.5 - 0.2 * i as f64,
            sigma_beta: 0.6,
        })
        .collect();
    HyperParams::new(metrics, 0.05).unwrap()
}

#[test]
fn pair_entropy_returns_the_best_of_every_candidate() {
    let space = MetricSpace::new(vec![Direction::Maximize, Direction::Minimize]).unwrap();
    let policy = QueryPolicy::new(PolicyKind::PairEntropy, 2024);
    let theta = generic_theta(2);
    let q = propose_query(&policy, &theta, None, &space).unwrap();

    let candidates = pair_candidates::<f64>(&policy, &space).unwrap();
    assert_eq!(candidates.len(), 2048);
    let shapes = acquisition_shapes(&policy, &theta).unwrap();
    let scores: Vec<f64> = candidates
        .iter()
        .map(|(a, b)| acquisition_value(a, b, &shapes, &space).unwrap())
        .collect();
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(scores.iter().all(|&s| q.acquisition_value >= s));
    assert_eq!(q.acquisition_value, best);
    let first = scores.iter().position(|&s| s == best).unwrap();
    assert_eq!((&q.a, &q.b), (&candidates[first].0, &candidates[first].1));
}

#[test]
fn every_proposal_is_incomparable() {
    for n in 2..=4 {
        let space = MetricSpace::new(
            (0..n)
                .map(|i| {
                    if i % 2 == 0 {
                        Direction::Maximize
                    } else {
                        Direction::Minimize
                    }
                })
                .collect(),
        )
        .unwrap();
        let theta = generic_theta(n);
        let anchor = MetricVector::new(vec![0.5; n]).unwrap();
        for kind in PolicyKind::ALL {
            for seed in 0..8 {
                let policy = QueryPolicy {
                    n_candidates: 64,
                    n_shape_samples: 64,
                    ..QueryPolicy::new(kind, seed)
                };
                let q = propose_query(&policy, &theta, Some(&anchor), &space).unwrap();
                assert!(incomparable(&q.a, &q.b, &space).unwrap(), "{kind} n={n} seed={seed}");
            }
        }
    }
}

#[test]
fn returned_value_is_the_recomputed_variance() {
    let space = MetricSpace::all_maximize(3).unwrap();
    let theta = generic_theta(3);
    for kind in [PolicyKind::SingleEntropy, PolicyKind::PairEntropy] {
        let policy = QueryPolicy {
            n_candidates: 128,
            ..QueryPolicy::new(kind, 31)
        };
        let anchor = MetricVector::new(vec![0.3, 0.8, 0.5]).unwrap();
        let q = propose_query(&policy, &theta, Some(&anchor), &space).unwrap();
        let shapes = acquisition_shapes(&policy, &theta).unwrap();
        let recomputed = acquisition_value(&q.a, &q.b, &shapes, &space).unwrap();
        assert_eq!(q.acquisition_value, recomputed);
    }
}

#[test]
fn one_candidate_pair_entropy_is_random_search() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let theta = generic_theta(2);
    for seed in 100..140 {
        let random = propose_query(&QueryPolicy::new(PolicyKind::Random, seed), &theta, None, &space).unwrap();
        let single = QueryPolicy {
            n_candidates: 1,
            ..QueryPolicy::new(PolicyKind::PairEntropy, seed)
        };
        let q = propose_query(&single, &theta, None, &space).unwrap();
        assert_eq!((q.a, q.b), (random.a, random.b));
    }
}

#[test]
fn proposals_are_seed_deterministic() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let theta = generic_theta(2);
    let policy = QueryPolicy {
        n_candidates: 256,
        ..QueryPolicy::new(PolicyKind::PairEntropy, 8)
    };
    let a = propose_query(&policy, &theta, None, &space).unwrap();
    assert_eq!(a, propose_query(&policy, &theta, None, &space).unwrap());
    let b = propose_query(&policy.with_seed(9), &theta, None, &space).unwrap();
    assert_ne!(a, b);
}

#[test]
fn f32_proposals_work() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let theta = HyperParams32::degenerate_uniform(2, 0.1).unwrap();
    let policy = QueryPolicy {
        n_candidates: 16,
        n_shape_samples: 16,
        ..QueryPolicy::new(PolicyKind::PairEntropy, 1)
    };
    let q = propose_query(&policy, &theta, None, &space).unwrap();
    assert!(incomparable(&q.a, &q.b, &space).unwrap());
    assert_eq!(q.acquisition_value, 0.0f32);
}
