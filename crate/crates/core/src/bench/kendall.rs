//! Kendall rank correlation in `O(n log n)` (Knight's algorithm).
//!
//! Pairs are sorted by `x` (ties broken by `y`), then a merge sort over the
//! `y` sequence counts the exchanges needed, which equals the number of
//! discordant pairs. Tie counts in `x`, in `y` and in both give the
//! tie-corrected tau-b; tau-a divides by the raw pair count instead.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauVariant {
    A,
    #[default]
    B,
}

/// Tie-corrected Kendall tau-b.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    kendall_tau_with(TauVariant::B, x, y)
}

pub fn kendall_tau_a(x: &[f64], y: &[f64]) -> Result<f64> {
    kendall_tau_with(TauVariant::A, x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PairCounts {
    total: u64,
    tied_x: u64,
    tied_y: u64,
    tied_xy: u64,
    discordant: u64,
}

fn tie_pairs(run: u64) -> u64 {
    run * (run - 1) / 2
}

fn count_pairs(x: &[f64], y: &[f64]) -> PairCounts {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then_with(|| y[i].total_cmp(&y[j])));

    let mut tied_x = 0;
    let mut tied_xy = 0;
    let mut run_x = 1u64;
    let mut run_xy = 1u64;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        if x[i] == x[j] {
            run_x += 1;
            if y[i] == y[j] {
                run_xy += 1;
            } else {
                tied_xy += tie_pairs(run_xy);
                run_xy = 1;
            }
        } else {
            tied_x += tie_pairs(run_x);
            tied_xy += tie_pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += tie_pairs(run_x);
    tied_xy += tie_pairs(run_xy);

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut ys, &mut buf);

    let mut tied_y = 0;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            tied_y += tie_pairs(run_y);
            run_y = 1;
        }
    }
    tied_y += tie_pairs(run_y);

    PairCounts {
        total: tie_pairs(n as u64),
        tied_x,
        tied_y,
        tied_xy,
        discordant,
    }
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j].total_cmp(&v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + (n - j)].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

pub fn kendall_tau_with(variant: TauVariant, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::DegenerateRanking("need at least two observations".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::DegenerateRanking("NaN in input".into()));
    }
    let c = count_pairs(x, y);
    if c.tied_x == c.total || c.tied_y == c.total {
        return Err(Error::DegenerateRanking("one ranking is constant".into()));
    }
    // concordant - discordant
    let score = c.total as f64 - c.tied_x as f64 - c.tied_y as f64 + c.tied_xy as f64 - 2.0 * c.discordant as f64;
    let tau = match variant {
        TauVariant::A => score / c.total as f64,
        TauVariant::B => score / (((c.total - c.tied_x) as f64) * ((c.total - c.tied_y) as f64)).sqrt(),
    };
    Ok(tau.clamp(-1.0, 1.0))
}
