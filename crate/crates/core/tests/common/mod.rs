//! Independent reference implementations used as test oracles.

#![allow(dead_code, clippy::excessive_precision)]

use prefelicit::{individual_utility, Direction, HyperParams};

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const K15_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = K15_WEIGHTS[7] * fc;
    let mut gauss = G7_WEIGHTS[3] * fc;
    for j in 0..7 {
        let dx = h * GK_NODES[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += K15_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += G7_WEIGHTS[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) with a relative tolerance on the total.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let panels = 16;
    let width = (b - a) / panels as f64;
    let mut intervals: Vec<_> = (0..panels)
        .map(|k| {
            let (lo, hi) = (
                a + width * k as f64,
                if k + 1 == panels { b } else { a + width * (k + 1) as f64 },
            );
            (lo, hi, gk15(&f, lo, hi))
        })
        .collect();
    for _ in 0..5000 {
        let total: f64 = intervals.iter().map(|iv| iv.2 .0).sum();
        let err: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            break;
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .unwrap();
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(&f, lo, mid)));
        intervals.push((mid, hi, gk15(&f, mid, hi)));
    }
    intervals.iter().map(|iv| iv.2 .0).sum()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)
}

/// Lower tail of the beta integral for `x <= 1/2`, after the substitution
/// `t = x w^(1/a)` that removes the endpoint singularity.
fn lower(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let inner = integrate(|w| ((b - 1.0) * (-x * w.powf(1.0 / a)).ln_1p()).exp(), 0.0, 1.0, 1e-13);
    (a * x.ln() - a.ln() - ln_beta(a, b)).exp() * inner
}

/// `I_x(a, b)` by quadrature of the beta density.
pub fn beta_cdf_quadrature(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.5 {
        lower(x, a, b)
    } else {
        1.0 - lower(1.0 - x, b, a)
    }
}

/// Tau-b by direct enumeration of all pairs.
pub fn kendall_brute(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i].partial_cmp(&x[j]).unwrap();
            let dy = y[i].partial_cmp(&y[j]).unwrap();
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {
                    tie_x += 1;
                    tie_y += 1;
                }
                (Equal, _) => tie_x += 1,
                (_, Equal) => tie_y += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - tie_x) as f64) * ((n0 - tie_y) as f64)).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}

/// Expectation and variance of `g(alpha, beta)` for a single metric under
/// the log-normal prior, by a tensor trapezoid rule over the standard
/// normal coordinates.
pub fn lognormal_moments<G: Fn(f64, f64) -> f64>(
    theta: &HyperParams,
    g: G,
    half_width: f64,
    nodes: usize,
) -> (f64, f64) {
    let p = theta.metrics[0];
    let h = 2.0 * half_width / (nodes - 1) as f64;
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let clamp = |v: f64| v.clamp(1e-3, 1e3);
    let (mut m1, mut m2, mut mass) = (0.0, 0.0, 0.0);
    for i in 0..nodes {
        let za = -half_width + h * i as f64;
        let wa = phi(za) * if i == 0 || i == nodes - 1 { 0.5 } else { 1.0 };
        let a = clamp((p.mu_alpha + p.sigma_alpha * za).exp());
        for j in 0..nodes {
            let zb = -half_width + h * j as f64;
            let wb = phi(zb) * if j == 0 || j == nodes - 1 { 0.5 } else { 1.0 };
            let b = clamp((p.mu_beta + p.sigma_beta * zb).exp());
            let v = g(a, b);
            let w = wa * wb;
            m1 += w * v;
            m2 += w * v * v;
            mass += w;
        }
    }
    let mean = m1 / mass;
    (mean, (m2 / mass - mean * mean).max(0.0))
}

pub fn beta_utility(x: f64, a: f64, b: f64, direction: Direction) -> f64 {
    individual_utility(x, a, b, direction).unwrap()
}

/// Worst absolute error of `individual_utility` against quadrature over
/// `cases` random `(x, alpha, beta)` with shapes log-uniform on `[lo, hi]`.
pub fn utility_quadrature_check(cases: usize, lo: f64, hi: f64, seed: u64) -> (f64, (f64, f64, f64)) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut worst = (0.0, (0.0, 0.0, 0.0));
    for k in 0..cases {
        let x: f64 = match k % 10 {
            0 => rng.random_range(0.0..1e-3),
            1 => 1.0 - rng.random_range(0.0..1e-3),
            _ => rng.random(),
        };
        let a = rng.random_range(llo..lhi).exp();
        let b = rng.random_range(llo..lhi).exp();
        let direction = if k % 2 == 0 {
            Direction::Maximize
        } else {
            Direction::Minimize
        };
        let exact = match direction {
            Direction::Maximize => beta_cdf_quadrature(x, a, b),
            Direction::Minimize => 1.0 - beta_cdf_quadrature(x, a, b),
        };
        let err = (beta_utility(x, a, b, direction) - exact).abs();
        if err > worst.0 {
            worst = (err, (x, a, b));
        }
    }
    worst
}

/// Worst absolute difference between the fast and the quadratic tau-b over
/// `cases` random vectors, half of them heavily tied. Constant inputs must be
/// rejected by both.
pub fn kendall_brute_check(cases: usize, max_len: usize, seed: u64) -> Result<f64, String> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..cases {
        let n = rng.random_range(2..=max_len);
        let levels = if k % 2 == 0 { rng.random_range(1..6) } else { 1_000_000 };
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            rng.random_range(0..levels) as f64 + if levels > 100 { rng.random::<f64>() } else { 0.0 }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        match (prefelicit::bench::kendall_tau(&x, &y), kendall_brute(&x, &y)) {
            (Ok(fast), Some(slow)) => worst = worst.max((fast - slow).abs()),
            (Err(_), None) => {}
            (fast, slow) => return Err(format!("case {k}: fast {fast:?} vs brute {slow:?}")),
        }
    }
    Ok(worst)
}

/// One single-metric likelihood comparison: Monte-Carlo pair probability,
/// the quadrature value it should estimate, and its standard error.
#[derive(Debug, Clone)]
pub struct LikelihoodCase {
    pub monte_carlo: f64,
    pub expected: f64,
    pub std_error: f64,
    pub equivalence: bool,
}

impl LikelihoodCase {
    pub fn z(&self) -> f64 {
        let diff = (self.monte_carlo - self.expected).abs();
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

pub fn single_metric_likelihood_cases(cases: usize, n_samples: usize, seed: u64) -> Vec<LikelihoodCase> {
    use prefelicit::{LikelihoodEvaluator, MetricPrior, MetricSpace, MetricVector, PreferenceDataset};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cases);
    for k in 0..cases {
        let direction = if rng.random::<bool>() {
            Direction::Maximize
        } else {
            Direction::Minimize
        };
        let space = MetricSpace::new(vec![direction]).unwrap();
        let prior = MetricPrior {
            mu_alpha: rng.random_range((0.1f64).ln()..(20.0f64).ln()),
            sigma_alpha: rng.random_range(0.05..1.0),
            mu_beta: rng.random_range((0.1f64).ln()..(20.0f64).ln()),
            sigma_beta: rng.random_range(0.05..1.0),
        };
        let sigma_e = rng.random_range(0.02..0.5);
        let theta = HyperParams::new(vec![prior], sigma_e).unwrap();
        let (x1, x2): (f64, f64) = (rng.random(), rng.random());
        let equivalence = k % 4 != 0;
        let mut data = PreferenceDataset::new();
        let (p1, p2) = (
            MetricVector::new(vec![x1]).unwrap(),
            MetricVector::new(vec![x2]).unwrap(),
        );
        if equivalence {
            data.push_equivalence(p1, p2);
        } else {
            data.push_preference(p1, p2);
        }
        let eval = LikelihoodEvaluator::new(&data, &space, n_samples, rng.random()).unwrap();
        let monte_carlo = eval.pair_probabilities(&theta).unwrap()[0];
        let s = n_samples as f64;
        let case = if equivalence {
            let g = |a, b| {
                let d = beta_utility(x2, a, b, direction) - beta_utility(x1, a, b, direction);
                libm::erfc(d.abs() / (sigma_e * std::f64::consts::SQRT_2))
            };
            let (mean, var) = lognormal_moments(&theta, g, 8.5, 401);
            LikelihoodCase {
                monte_carlo,
                expected: mean,
                std_error: (var / s).sqrt(),
                equivalence,
            }
        } else {
            let g = |a, b| {
                let d = beta_utility(x2, a, b, direction) - beta_utility(x1, a, b, direction);
                if d > 0.0 {
                    1.0
                } else if d == 0.0 {
                    0.5
                } else {
                    0.0
                }
            };
            let (mean, _) = lognormal_moments(&theta, g, 8.5, 401);
            let smoothed = (s * mean + 1.0) / (s + 2.0);
            LikelihoodCase {
                monte_carlo,
                expected: smoothed,
                std_error: (smoothed * (1.0 - smoothed) / s).sqrt(),
                equivalence,
            }
        };
        out.push(case);
    }
    out
}
