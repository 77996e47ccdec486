#![allow(dead_code)]

use tfqss_core::{evaluate, ChannelParams, SecurityParams, SourceParams};

/// Exhaustive search over an `n x n` grid of `(mu_a, mu_b)` spanning `[lo, hi]`.
pub fn grid_best(
    ch: &ChannelParams,
    sp: &SecurityParams,
    n: usize,
    lo: f64,
    hi: f64,
) -> (f64, f64, f64) {
    let pts: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let mut best = (0.0, f64::NAN, f64::NAN);
    for &a in &pts {
        for &b in &pts {
            let r = evaluate(ch, &SourceParams { mu_a: a, mu_b: b }, sp).map_or(0.0, |rb| rb.rate);
            if r > best.0 {
                best = (r, a, b);
            }
        }
    }
    best
}

/// Exhaustive search over `mu_a = mu_b` only.
pub fn grid_best_symmetric(
    ch: &ChannelParams,
    sp: &SecurityParams,
    n: usize,
    lo: f64,
    hi: f64,
) -> (f64, f64) {
    let mut best = (0.0, f64::NAN);
    for i in 0..n {
        let mu = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let r = evaluate(ch, &SourceParams { mu_a: mu, mu_b: mu }, sp).map_or(0.0, |rb| rb.rate);
        if r > best.0 {
            best = (r, mu);
        }
    }
    best
}
