//! Derivative-free minimization on the unit box.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Edge length of the initial simplex in unit coordinates.
    pub initial_step: f64,
    /// Relative spread of simplex values at which the search stops.
    pub f_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 200,
            initial_step: 0.1,
            f_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evals: usize,
}

fn clamp_unit<T: Scalar>(x: &mut [T]) {
    for v in x.iter_mut() {
        *v = v.max(T::zero()).min(T::one());
    }
}

impl NelderMead {
    /// Minimizes `f` over `[0, 1]^d` starting at `x0`. Trial points are
    /// projected onto the box. The returned point is the best one evaluated.
    pub fn minimize<T, F>(&self, mut f: F, x0: &[T]) -> Minimum<T>
    where
        T: Scalar,
        F: FnMut(&[T]) -> T,
    {
        let d = x0.len();
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let step = T::lit(self.initial_step);
        let mut evals = 0usize;
        let mut eval = |x: &[T], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                T::infinity()
            } else {
                v
            }
        };

        let mut start = x0.to_vec();
        clamp_unit(&mut start);
        let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(d + 1);
        let f0 = eval(&start, &mut evals);
        simplex.push((start.clone(), f0));
        for i in 0..d {
            if evals >= self.max_evals {
                break;
            }
            let mut v = start.clone();
            v[i] = if v[i] + step <= T::one() {
                v[i] + step
            } else {
                v[i] - step
            };
            let fv = eval(&v, &mut evals);
            simplex.push((v, fv));
        }

        let by_value = |a: &(Vec<T>, T), b: &(Vec<T>, T)| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal);

        while simplex.len() == d + 1 && evals < self.max_evals {
            // stable sort keeps earlier vertices first on ties
            simplex.sort_by(by_value);
            let best = simplex[0].1;
            let worst = simplex[d].1;
            let spread = (worst - best).abs();
            let scale = best.abs() + worst.abs() + T::lit(1e-300);
            if two * spread <= T::lit(self.f_tol) * scale {
                break;
            }

            let mut centroid = vec![T::zero(); d];
            for (v, _) in &simplex[..d] {
                for (c, &x) in centroid.iter_mut().zip(v) {
                    *c = *c + x;
                }
            }
            let n = T::lit(d as f64);
            for c in centroid.iter_mut() {
                *c = *c / n;
            }
            let along = |t: T| -> Vec<T> {
                let mut p: Vec<T> = centroid
                    .iter()
                    .zip(&simplex[d].0)
                    .map(|(&c, &w)| c + t * (c - w))
                    .collect();
                clamp_unit(&mut p);
                p
            };

            let reflected = along(T::one());
            let fr = eval(&reflected, &mut evals);
            if fr < simplex[0].1 {
                if evals >= self.max_evals {
                    simplex[d] = (reflected, fr);
                    break;
                }
                let expanded = along(two);
                let fe = eval(&expanded, &mut evals);
                simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < simplex[d - 1].1 {
                simplex[d] = (reflected, fr);
                continue;
            }
            if evals >= self.max_evals {
                break;
            }
            let (contracted, fc) = if fr < simplex[d].1 {
                let c = along(half);
                let fc = eval(&c, &mut evals);
                (c, fc)
            } else {
                let c = along(-half);
                let fc = eval(&c, &mut evals);
                (c, fc)
            };
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (contracted, fc);
                continue;
            }
            // shrink toward the best vertex
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                if evals >= self.max_evals {
                    break;
                }
                for (x, &a) in vertex.0.iter_mut().zip(&anchor) {
                    *x = a + half * (*x - a);
                }
                vertex.1 = eval(&vertex.0, &mut evals);
            }
        }

        let (x, value) = simplex
            .into_iter()
            .fold(None::<(Vec<T>, T)>, |acc, v| match acc {
                Some(a) if a.1 <= v.1 => Some(a),
                _ => Some(v),
            })
            .expect("simplex has at least the start vertex");
        Minimum { x, value, evals }
    }
}

/// Latin-hypercube design of `n` points in `[0, 1]^d`.
pub fn latin_hypercube(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(&mut rng);
        for (point, &k) in points.iter_mut().zip(&strata) {
            point[j] = (k as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}
