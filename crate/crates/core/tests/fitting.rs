use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prefelicit::bench::{kendall_tau, model_scores};
use prefelicit::*;

fn quick(seed: u64) -> FitConfig {
    FitConfig {
        n_starts: 4,
        max_evals_per_start: 120,
        base_seed: seed,
        ..FitConfig::default()
    }
}

fn mv(v: &[f64]) -> MetricVector {
    MetricVector::new(v.to_vec()).unwrap()
}

fn true_sample() -> ShapeSample {
    ShapeSample::new(vec![3.0, 0.6], vec![0.8, 2.5]).unwrap()
}

/// Random incomparable pairs labelled by a fixed two-metric utility.
fn labelled_data(n_pairs: usize, seed: u64) -> PreferenceDataset {
    let space = MetricSpace::all_maximize(2).unwrap();
    let truth = true_sample();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = PreferenceDataset::new();
    while d.len() < n_pairs {
        let a = mv(&[rng.random(), rng.random()]);
        let b = mv(&[rng.random(), rng.random()]);
        if !incomparable(&a, &b, &space).unwrap() {
            continue;
        }
        let (ua, ub) = (
            joint_utility(&a, &truth, &space).unwrap(),
            joint_utility(&b, &truth, &space).unwrap(),
        );
        if (ua - ub).abs() < 0.01 {
            d.push_equivalence(a, b);
        } else if ua > ub {
            d.push_preference(b, a);
        } else {
            d.push_preference(a, b);
        }
    }
    d
}

#[test]
fn fit_is_never_worse_than_box_center() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let data = labelled_data(12, 1);
    let config = quick(9);
    let fit = fit_mle(&data, &config, &space).unwrap();
    let center = config.bounds.center(2);
    let at_center = log_marginal_likelihood(&data, &center, &space, config.mc_samples, config.base_seed).unwrap();
    assert!(fit.log_likelihood >= at_center.log_value);
    assert!(config.bounds.contains(&fit.theta_mle));
}

#[test]
fn reported_likelihood_matches_reevaluation() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let data = labelled_data(10, 2);
    let config = quick(4);
    let fit = fit_mle(&data, &config, &space).unwrap();
    let again = log_marginal_likelihood(&data, &fit.theta_mle, &space, config.mc_samples, config.base_seed).unwrap();
    assert_eq!(fit.log_likelihood.to_bits(), again.log_value.to_bits());
}

#[test]
fn reruns_are_bit_identical() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let data = labelled_data(10, 3);
    let config = quick(5);
    let a = fit_mle(&data, &config, &space).unwrap();
    let b = fit_mle(&data, &config, &space).unwrap();
    assert_eq!(a, b);
    let bits = |t: &HyperParams| t.to_vec().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.theta_mle), bits(&b.theta_mle));
}

#[test]
fn warm_start_is_never_worse_than_its_seed() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let data = labelled_data(14, 4);
    let config = quick(6);
    let first = fit_mle(&data, &config, &space).unwrap();
    let warm = fit_mle_warm(&data, &config, &space, Some(&first.theta_mle)).unwrap();
    assert!(warm.log_likelihood >= first.log_likelihood);
}

#[test]
fn trace_is_increasing() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let data = labelled_data(8, 5);
    let config = FitConfig {
        record_trace: true,
        ..quick(1)
    };
    let fit = fit_mle(&data, &config, &space).unwrap();
    let trace = fit.trace.unwrap();
    assert!(!trace.is_empty());
    assert!(trace.windows(2).all(|w| w[1].1 > w[0].1));
    assert_eq!(trace.last().unwrap().1, fit.log_likelihood);
}

#[test]
fn single_metric_preferences_leave_likelihood_flat() {
    // with one metric every strict answer is forced by dominance, so the
    // data cannot move the fit away from the first start
    let space = MetricSpace::all_maximize(1).unwrap();
    let mut data = PreferenceDataset::new();
    for k in 0..30 {
        let x = 0.02 + 0.03 * k as f64;
        data.push_preference(mv(&[x]), mv(&[x + 0.01]));
    }
    let config = quick(2);
    let fit = fit_mle(&data, &config, &space).unwrap();
    let center = config.bounds.center(1);
    assert_eq!(fit.theta_mle, center);
    let s = config.mc_samples as f64;
    let ceiling = 30.0 * ((s + 1.0) / (s + 2.0)).ln();
    assert!(
        (fit.log_likelihood - ceiling).abs() < 1e-9,
        "{} vs {ceiling}",
        fit.log_likelihood
    );
}

#[test]
fn empty_dataset_returns_center() {
    let space = MetricSpace::all_maximize(3).unwrap();
    let config = quick(0);
    let fit = fit_mle(&PreferenceDataset::new(), &config, &space).unwrap();
    assert_eq!(fit.theta_mle, config.bounds.center(3));
    assert_eq!(fit.log_likelihood, 0.0);
}

#[test]
fn fitted_model_ranks_like_the_generating_utility() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let data = labelled_data(40, 6);
    let fit = fit_mle(
        &data,
        &FitConfig {
            n_starts: 6,
            ..quick(3)
        },
        &space,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let points: Vec<MetricVector> = (0..2000).map(|_| mv(&[rng.random(), rng.random()])).collect();
    let model = model_scores(&fit.theta_mle, &space, &points, 512, 8).unwrap();
    let truth: Vec<f64> = points
        .iter()
        .map(|p| joint_utility(p, &true_sample(), &space).unwrap())
        .collect();
    let tau = kendall_tau(&model, &truth).unwrap();
    assert!(tau > 0.8, "tau = {tau}");
}

#[test]
fn f32_fit_runs_and_stays_in_bounds() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let mut data = PreferenceDataset32::new();
    data.push_preference(
        MetricVector32::new(vec![0.9, 0.1]).unwrap(),
        MetricVector32::new(vec![0.2, 0.7]).unwrap(),
    );
    data.push_equivalence(
        MetricVector32::new(vec![0.6, 0.3]).unwrap(),
        MetricVector32::new(vec![0.3, 0.6]).unwrap(),
    );
    let config = FitConfig32 {
        n_starts: 2,
        max_evals_per_start: 60,
        ..FitConfig32::default()
    };
    let fit = fit_mle(&data, &config, &space).unwrap();
    assert!(fit.log_likelihood.is_finite() && fit.log_likelihood < 0.0);
    assert!(config.bounds.contains(&fit.theta_mle));
}

#[test]
fn rejects_mismatched_dimensions() {
    let space = MetricSpace::all_maximize(2).unwrap();
    let mut data = PreferenceDataset::new();
    data.push_preference(mv(&[0.1, 0.2, 0.3]), mv(&[0.3, 0.2, 0.1]));
    assert!(fit_mle(&data, &quick(0), &space).is_err());
}
