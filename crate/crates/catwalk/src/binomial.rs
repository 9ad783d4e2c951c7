//! Binomial pmf evaluation shared by the kernel and the pmf engine.
//!
//! Rows are generated from the mode outward by the multiplicative recurrence
//! `pmf(j+1)/pmf(j) = (n-j)/(j+1) * q/(1-q)`, anchored at the mode through
//! `ln_gamma`. This never underflows at the anchor (the mode carries mass at
//! least `1/(n+1)`) and entries are only dropped once they fall below
//! `REL_CLIP` relative to the mode, far beneath every tolerance used here.

use statrs::function::gamma::ln_gamma;

/// Relative clip threshold for row tails.
pub const REL_CLIP: f64 = 1e-24;

pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `P(Bin(n, q) = k)` for a single entry.
pub fn pmf(n: u64, k: u64, q: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if q <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    if n == 0 {
        return 1.0;
    }
    (ln_choose(n, k) + k as f64 * q.ln() + (n - k) as f64 * (1.0 - q).ln()).exp()
}

/// Adds `weight * P(Bin(n, q) = j)` to `out[j]` for every j, walking outward
/// from the mode and clipping relative tails below `REL_CLIP`.
///
/// `out` must have length at least `n + 1`.
pub fn accumulate_row(n: u64, q: f64, weight: f64, out: &mut [f64]) {
    debug_assert!(out.len() as u64 > n);
    if weight == 0.0 {
        return;
    }
    if q <= 0.0 {
        out[0] += weight;
        return;
    }
    if q >= 1.0 {
        out[n as usize] += weight;
        return;
    }
    if n == 0 {
        out[0] += weight;
        return;
    }
    let mode = (((n + 1) as f64) * q).floor().min(n as f64) as usize;
    let at_mode = pmf(n, mode as u64, q);
    let floor = at_mode * REL_CLIP;
    let ratio_up = |j: usize| ((n as usize - j) as f64 / (j + 1) as f64) * (q / (1.0 - q));

    let mut v = at_mode;
    out[mode] += weight * v;
    let mut j = mode;
    while j < n as usize {
        v *= ratio_up(j);
        j += 1;
        if v < floor || v == 0.0 {
            break;
        }
        out[j] += weight * v;
    }
    v = at_mode;
    j = mode;
    while j > 0 {
        v /= ratio_up(j - 1);
        j -= 1;
        if v < floor || v == 0.0 {
            break;
        }
        out[j] += weight * v;
    }
}
