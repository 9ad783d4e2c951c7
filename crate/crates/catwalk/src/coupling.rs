//! Coupling of two copies of the chain and two-sided total-variation bounds.
//!
//! Two copies started at `x < y` share birth events; in a catastrophe the
//! lower copy and the gap are thinned independently. The gap `H_t` is then
//! non-increasing, the upper copy is always `X_t + H_t`, and the coupling
//! time `xi` (first time the gap vanishes) controls the distance between the
//! time-t laws from the two starts:
//!
//! - exactly, `P(xi > t) = 1 - E[(1 - (1-c)^{N_t})^{y-x}]` with `N_t` the
//!   binomial number of catastrophes up to `t` ([`coupling_tail_exact`]);
//! - from above, `d_t(x,y) <= |y-x| alpha^t` ([`tv_upper`]);
//! - from below, `d_t(x,y) >= alpha^t max_j sum_k P_k^(tilted)(X_t = j)`
//!   ([`tv_lower`]), the chain conditioned on staying uncoupled being the
//!   tilted chain.

use rand::Rng;
use rayon::prelude::*;

use crate::binomial::ln_choose;
use crate::chain::sample_binomial;
use crate::pmf::{Pmf, TvEstimate};
use crate::rng::{shards, task_rng};
use crate::{Error, ModelParams, Result};

/// Lower copy and gap; the upper copy is implicitly `x + h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledState {
    pub x: u64,
    pub h: u64,
}

impl CoupledState {
    pub fn new(x: u64, h: u64) -> Self {
        CoupledState { x, h }
    }

    /// The upper copy `x + h`.
    pub fn upper(&self) -> u64 {
        self.x + self.h
    }
}

/// One coupled step: shared birth with probability `p`, otherwise independent
/// thinning of copy and gap. Each marginal is a copy of the chain and the gap
/// never increases.
pub fn coupled_step<R: Rng + ?Sized>(
    state: CoupledState,
    params: ModelParams,
    rng: &mut R,
) -> CoupledState {
    if rng.random::<f64>() < params.p() {
        CoupledState::new(state.x + 1, state.h)
    } else {
        let keep = 1.0 - params.c();
        CoupledState::new(sample_binomial(state.x, keep, rng), sample_binomial(state.h, keep, rng))
    }
}

/// Exact tail of the coupling time for two starts `gap` apart:
/// `P(xi > t) = sum_k C(t,k)(1-p)^k p^{t-k} [1 - (1 - (1-c)^k)^gap]`.
///
/// Binomial weights are evaluated in log space so large `t` does not
/// underflow.
pub fn coupling_tail_exact(gap: u64, t: u64, params: ModelParams) -> f64 {
    if gap == 0 {
        return 0.0;
    }
    if t == 0 {
        return 1.0;
    }
    let p = params.p();
    let q = 1.0 - p;
    let keep = 1.0 - params.c();
    let (ln_p, ln_q) = (p.ln(), q.ln());
    let mut total = 0.0;
    for k in 0..=t {
        let ln_w = ln_choose(t, k) + k as f64 * ln_q + (t - k) as f64 * ln_p;
        // 1 - (1 - keep^k)^gap, evaluated stably
        let keep_k = keep.powi(k.min(i32::MAX as u64) as i32);
        let uncoupled = -f64::exp_m1(gap as f64 * f64::ln_1p(-keep_k));
        total += ln_w.exp() * uncoupled;
    }
    total.clamp(0.0, 1.0)
}

/// Bernoulli-inequality upper bound `gap * alpha^t`, returned raw together
/// with its clamp to `[0,1]`.
pub fn coupling_tail_upper(gap: u64, t: u64, params: ModelParams) -> (f64, f64) {
    let raw = gap as f64 * params.alpha().powi(t as i32);
    (raw, raw.min(1.0))
}

/// Monte Carlo estimate of `P(xi > t)` over `n_paths` coupled simulations.
pub fn coupling_tail_mc(gap: u64, t: u64, params: ModelParams, n_paths: u64, seed: u64) -> f64 {
    let uncoupled: u64 = shards(n_paths)
        .into_par_iter()
        .map(|(stream, count)| {
            let mut rng = task_rng(seed, stream);
            let mut hits = 0u64;
            for _ in 0..count {
                let mut s = CoupledState::new(0, gap);
                for _ in 0..t {
                    s = coupled_step(s, params, &mut rng);
                    if s.h == 0 {
                        break;
                    }
                }
                if s.h > 0 {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    uncoupled as f64 / n_paths as f64
}

/// Coupling upper bound on the distance between the two starts:
/// `|y - x| alpha^t`.
pub fn tv_upper(x: u64, y: u64, t: u64, params: ModelParams) -> f64 {
    x.abs_diff(y) as f64 * params.alpha().powi(t as i32)
}

/// Upper bound on the distance to stationarity from start `x`, computed from
/// a supplied stationary pmf:
/// `(x - mu + 2 sum_{y>x} (y-x) pi(y)) alpha^t`; for `x = 0` this is
/// `mu alpha^t`.
pub fn tv_upper_stationary(x: u64, t: u64, params: ModelParams, pi: &Pmf) -> f64 {
    let xf = x as f64;
    let above: f64 = pi
        .probs()
        .iter()
        .enumerate()
        .skip(x as usize + 1)
        .map(|(y, &w)| (y as f64 - xf) * w)
        .sum();
    (xf - pi.mean() + 2.0 * above) * params.alpha().powi(t as i32)
}

/// Exact `d_t(x, y)` by evolving both point masses `t` steps.
pub fn tv_exact(x: u64, y: u64, t: u64, params: ModelParams) -> TvEstimate {
    tv_exact_curve(x, y, &[t], params).pop().expect("one requested time").1
}

/// Exact `d_t(x, y)` at each requested time, sharing the evolution work.
/// `times` must be sorted ascending.
pub fn tv_exact_curve(
    x: u64,
    y: u64,
    times: &[u64],
    params: ModelParams,
) -> Vec<(u64, TvEstimate)> {
    debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    let mut a = Pmf::delta(x);
    let mut b = Pmf::delta(y);
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0u64;
    for &target in times {
        while t < target {
            a = a.evolve(params);
            b = b.evolve(params);
            t += 1;
        }
        out.push((target, a.tv_distance(&b)));
    }
    out
}

/// Tilted-chain lower bound `alpha^t max_j sum_{k=x}^{y-1} P_k^(tilted)(X_t = j)`.
///
/// The tilted pmfs are computed on truncated supports, whose entries are
/// pointwise lower bounds; the reported value is therefore a valid (slightly
/// conservative) lower bound on the true distance. Rejects `c = 1`, where the
/// tilted chain is improper.
pub fn tv_lower(x: u64, y: u64, t: u64, params: ModelParams) -> Result<f64> {
    Ok(tv_lower_curve(x, y, &[t], params)?.pop().expect("one requested time").1)
}

/// [`tv_lower`] at each requested (sorted) time, sharing one evolution sweep
/// over the starting states `x..y`.
pub fn tv_lower_curve(
    x: u64,
    y: u64,
    times: &[u64],
    params: ModelParams,
) -> Result<Vec<(u64, f64)>> {
    if x >= y {
        return Err(Error::InvalidParameter(format!(
            "lower bound needs x < y, got x={x} y={y}"
        )));
    }
    debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    let tilted = params.tilted()?;
    let alpha = params.alpha();
    let mut laws: Vec<Pmf> = (x..y).map(Pmf::delta).collect();
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0u64;
    for &target in times {
        while t < target {
            for law in laws.iter_mut() {
                *law = law.evolve(tilted);
            }
            t += 1;
        }
        let max_len = laws.iter().map(|l| l.probs().len()).max().unwrap();
        let best = (0..max_len)
            .map(|j| laws.iter().map(|l| l.prob(j as u64)).sum::<f64>())
            .fold(0.0f64, f64::max);
        out.push((target, alpha.powi(target as i32) * best));
    }
    Ok(out)
}

/// Spectral gap `1 - alpha = c(1-p)` of the chain.
pub fn spectral_gap(params: ModelParams) -> f64 {
    params.c() * (1.0 - params.p())
}

/// Empirical law of the lower copy at time `t` among paths still uncoupled.
#[derive(Debug, Clone)]
pub struct ConditionalLaw {
    pub law: Pmf,
    /// Paths that satisfied the conditioning `xi > t`.
    pub retained: u64,
    /// False when fewer than 100 paths survived; the estimate is then
    /// unreliable.
    pub reliable: bool,
}

/// Law of `X_t` conditioned on the copies started at `x < y` being uncoupled
/// at time `t`, estimated by simple rejection over `n_paths` coupled paths.
pub fn conditional_law_given_uncoupled(
    x: u64,
    y: u64,
    t: u64,
    params: ModelParams,
    n_paths: u64,
    seed: u64,
) -> Result<ConditionalLaw> {
    if x >= y {
        return Err(Error::InvalidParameter(format!(
            "conditioning needs x < y, got x={x} y={y}"
        )));
    }
    if n_paths == 0 {
        return Err(Error::InvalidParameter("n_paths must be positive".into()));
    }
    let gap = y - x;
    let counts: Vec<u64> = shards(n_paths)
        .into_par_iter()
        .map(|(stream, count)| {
            let mut rng = task_rng(seed, stream);
            let mut local: Vec<u64> = Vec::new();
            for _ in 0..count {
                let mut s = CoupledState::new(x, gap);
                let mut coupled = false;
                for _ in 0..t {
                    s = coupled_step(s, params, &mut rng);
                    if s.h == 0 {
                        coupled = true;
                        break;
                    }
                }
                if !coupled {
                    if local.len() <= s.x as usize {
                        local.resize(s.x as usize + 1, 0);
                    }
                    local[s.x as usize] += 1;
                }
            }
            local
        })
        .reduce(Vec::new, |mut a, b| {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            for (slot, v) in a.iter_mut().zip(b.iter()) {
                *slot += v;
            }
            a
        });
    let retained: u64 = counts.iter().sum();
    if retained == 0 {
        return Err(Error::Numerical(format!(
            "no path stayed uncoupled to t={t}; cannot form a conditional law"
        )));
    }
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / retained as f64).collect();
    Ok(ConditionalLaw { law: Pmf::from_raw(probs), retained, reliable: retained >= 100 })
}
