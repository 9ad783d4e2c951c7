//! The stationary law and its summary quantities.
//!
//! The stationary distribution is the law of an independent sum of binomially
//! thinned shifted geometrics, one per age class: thinning `Geom^-(1-p)` by
//! `(1-c)^k` is again shifted geometric, with parameter `1 - r_k` where
//!
//! ```text
//! r_k = p (1-c)^k / (1 - p (1 - (1-c)^k)),
//! ```
//!
//! so the pmf is built as a finite convolution of geometric factors. The
//! factor means are `r_k/(1-r_k) = p(1-c)^k/(1-p)`, which sum to the
//! stationary mean `p/(c(1-p))`; cutting the product at `J` leaves a residual
//! mean that bounds the total-variation error of the truncation, and the
//! retained entries are scaled by one minus that residual so they stay
//! pointwise lower bounds of the true law.

use crate::pmf::Pmf;
use crate::series::SeriesResult;
use crate::{Error, ModelParams, Result};

/// Stationary mean `p / (c(1-p))`.
pub fn stationary_mean(params: ModelParams) -> f64 {
    params.mean()
}

/// Factor parameter `r_k` of the k-th thinned geometric.
fn factor_r(params: ModelParams, k: u32) -> f64 {
    let w = (1.0 - params.c()).powi(k as i32);
    params.p() * w / (1.0 - params.p() * (1.0 - w))
}

/// Convolution of the geometric factors for `k >= first_factor`, cut off once
/// the residual factor means drop below `eps_trunc / 10`.
///
/// `first_factor = 0` yields the stationary law of the chain; `1` yields the
/// stationary law of the catastrophe-sampled chain.
pub(crate) fn geometric_factor_convolution(
    params: ModelParams,
    eps_trunc: f64,
    first_factor: u32,
) -> Pmf {
    let p = params.p();
    let c = params.c();
    let factor_tail = (eps_trunc / 1e4).min(1e-16);
    let mut out = Pmf::delta(0);
    let mut k = first_factor;
    loop {
        // mean of everything still ahead: sum_{j >= k} p(1-c)^j/(1-p)
        let residual_mean = if c < 1.0 {
            p * (1.0 - c).powi(k as i32) / ((1.0 - p) * c)
        } else if k == first_factor {
            p / (1.0 - p) // only the first factor is non-trivial
        } else {
            0.0
        };
        if k > first_factor && residual_mean < eps_trunc / 10.0 {
            // P(residual sum > 0) <= residual mean: scale retained entries so
            // they stay lower bounds of the untruncated law.
            return out.scaled_down(1.0 - residual_mean);
        }
        let r = factor_r(params, k);
        let factor = Pmf::geometric(1.0 - r, factor_tail)
            .expect("factor parameter in (0,1] by construction");
        out = out.convolve(&factor);
        k += 1;
        if c == 1.0 && k > first_factor {
            // all remaining factors are point masses at zero
            return out;
        }
    }
}

/// Stationary pmf as the convolution of geometric factors, truncated with
/// total error below `eps_trunc` and accounted in the tail.
pub fn stationary_pmf(params: ModelParams, eps_trunc: f64) -> Pmf {
    geometric_factor_convolution(params, eps_trunc, 0)
}

/// Stationary pmf of the tilted chain `(p/alpha, c)`; rejects `c = 1` where
/// the tilt is improper.
pub fn tilted_stationary_pmf(params: ModelParams, eps_trunc: f64) -> Result<Pmf> {
    Ok(stationary_pmf(params.tilted()?, eps_trunc))
}

/// Stationary mass at zero, as the infinite product
/// `prod_j (1-p) / (1 - p(1 - (1-c)^j))`, i.e. `exp(-sum_j ln(1 + x_j))` with
/// `x_j = (p/(1-p))(1-c)^j`. Stops when the remaining log-factors are below
/// `tol`; the error bound covers the dropped remainder.
pub fn pi_zero(params: ModelParams, tol: f64) -> SeriesResult {
    let ln_sum = ln_persistence_sum(params, tol);
    let value = (-ln_sum.value).exp();
    // |e^{-(S+r)} - e^{-S}| <= e^{-S} r for small r
    SeriesResult::new(value, ln_sum.terms_used, value * ln_sum.error_bound)
}

/// Compensated sum of `ln(1 + (p/(1-p))(1-c)^j)`, which is `ln E_0[tau]`.
fn ln_persistence_sum(params: ModelParams, tol: f64) -> SeriesResult {
    let ratio = params.p() / (1.0 - params.p());
    let w = 1.0 - params.c();
    let mut sum = 0.0;
    let mut comp = 0.0; // Kahan correction
    let mut x = ratio;
    let mut terms = 0usize;
    loop {
        let term = x.ln_1p();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        terms += 1;
        x *= w;
        // remaining sum <= sum of x_j <= x / c
        let remainder = if params.c() < 1.0 { x / params.c() } else { 0.0 };
        if remainder < tol {
            return SeriesResult::new(sum, terms, remainder);
        }
    }
}

/// Expected return time to zero with the closed log-scale bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceTime {
    /// `ln E_0[tau]` with truncation error bound.
    pub ln_mean: SeriesResult,
    /// `E_0[tau]` itself when it fits in an f64.
    pub mean: Option<f64>,
    /// `[p/(c(1-p)) - p^2/(2(1-p)^2(1-(1-c)^2)), p/(c(1-p))]`, available for
    /// `p < 1/2`.
    pub ln_bounds: Option<(f64, f64)>,
}

/// Persistence time `E_0[tau] = 1/pi(0)`, reported on the log scale with the
/// two-sided bracket from `x - x^2/2 <= ln(1+x) <= x` when `p < 1/2`.
pub fn persistence_time(params: ModelParams) -> PersistenceTime {
    let ln_mean = ln_persistence_sum(params, 1e-15);
    let mean = if ln_mean.value < 700.0 { Some(ln_mean.value.exp()) } else { None };
    let ln_bounds = if params.p() < 0.5 {
        let p = params.p();
        let c = params.c();
        let upper = p / (c * (1.0 - p));
        let lower = upper
            - 0.5 * p * p / ((1.0 - p) * (1.0 - p) * (1.0 - (1.0 - c) * (1.0 - c)));
        Some((lower, upper))
    } else {
        None
    };
    PersistenceTime { ln_mean, mean, ln_bounds }
}

/// Independent route to the stationary law: iterate the kernel from
/// `delta(0)` until successive iterates are within `tol` in total variation
/// (or `max_steps`). Returns the fixed point and the number of steps taken.
pub fn stationary_by_power_iteration(
    params: ModelParams,
    tol: f64,
    max_steps: u64,
) -> Result<(Pmf, u64)> {
    let mut cur = Pmf::delta(0);
    for step in 1..=max_steps {
        let next = cur.evolve(params);
        let tv = cur.tv_distance(&next);
        cur = next;
        if tv.value < tol {
            return Ok((cur, step));
        }
    }
    Err(Error::Numerical(format!(
        "power iteration did not reach tolerance {tol} in {max_steps} steps"
    )))
}

impl Pmf {
    /// Scales all entries by `factor <= 1`, moving the difference to the
    /// tail.
    pub(crate) fn scaled_down(&self, factor: f64) -> Pmf {
        let probs = self.probs().iter().map(|&v| v * factor).collect();
        Pmf::from_raw(probs)
    }
}
