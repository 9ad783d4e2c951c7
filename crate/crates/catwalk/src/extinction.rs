//! Extinction times: sampling, the generating-function series for
//! `E_n[s^tau]`, an absorbing-chain linear-solve oracle, and the
//! large-population scaling experiment.
//!
//! The generating function from start 1 comes from iterating the functional
//! equation for `psi(s,z) = sum_n E_n[s^tau] z^n` down the orbit of
//! `h(z) = z(1-c)/(1-cz)` and evaluating at the removable singularity
//! `z = ps`, which forces
//!
//! ```text
//! E_1[s^tau] = 1 + (1-s)/(ps) - (sum_{n>=0} eta_n) / (sum_{n>=0} eta_n h_n(ps))
//! ```
//!
//! with `h_n(ps) = ps(1-c)^n / (1 - ps + ps(1-c)^n)` (so the n = 0 term of
//! the denominator is `ps`) and super-geometrically decaying coefficients
//!
//! ```text
//! eta_n = (-1)^n (1-c)^{n(n-1)/2} ((1-p)s/(1-ps))^n prod_{k<=n} 1/(1-(1-c)^k).
//! ```
//!
//! Both sums must start at n = 0; starting them at n = 1 does not satisfy
//! the fixed-point identity (the residual test in this module's suite is the
//! arbiter). Higher starts are lifted through the first-step recursion
//! `a_{m+1} = (a_m - (1-p)s sum_k C(m,k) c^{m-k}(1-c)^k a_k)/(ps)`, which
//! amplifies seed error by `(ps)^{-m}` and therefore runs in double-double
//! precision with a tracked error bound; once that bound stops resolving the
//! value the lift refuses to continue and the linear-solve route is the way
//! to go.

use rand::Rng;
use rayon::prelude::*;

use crate::binomial;
use crate::chain::step_sample;
use crate::coupling::{coupled_step, CoupledState};
use crate::dd::Dd;
use crate::pmf::Pmf;
use crate::rng::{shards, task_rng};
use crate::series::SeriesResult;
use crate::{Error, ModelParams, Result};

/// Outcome of one extinction-time draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtinctionSample {
    /// First `t >= 1` with `X_t = 0`.
    Extinct(u64),
    /// Still alive at the cap; censoring is data, not an error.
    Censored(u64),
}

/// Samples the first extinction time from `x0`, censored at `t_cap`.
pub fn extinction_time_sample<R: Rng + ?Sized>(
    x0: u64,
    params: ModelParams,
    rng: &mut R,
    t_cap: u64,
) -> ExtinctionSample {
    let mut x = x0;
    for t in 1..=t_cap {
        x = step_sample(x, params, rng);
        if x == 0 {
            return ExtinctionSample::Extinct(t);
        }
    }
    ExtinctionSample::Censored(t_cap)
}

/// Walks the eta coefficients by their term ratio
/// `eta_{n+1}/eta_n = base (1-c)^n / (1 - (1-c)^{n+1})` with
/// `base = -(1-p)s/(1-ps)`.
struct EtaIter {
    term: Dd,
    base: Dd,
    keep: Dd,
    /// `(1-c)^n` for the current index.
    keep_pow: Dd,
}

impl EtaIter {
    fn new(s: f64, params: ModelParams) -> EtaIter {
        EtaIter {
            term: Dd::ONE,
            base: Dd::from(-(1.0 - params.p()) * s).div(Dd::from(1.0 - params.p() * s)),
            keep: Dd::from(1.0 - params.c()),
            keep_pow: Dd::ONE,
        }
    }

    /// Advances to the next coefficient and returns it.
    fn advance(&mut self) -> Dd {
        let next_pow = self.keep_pow.mul(self.keep);
        self.term = self.term.mul(self.base).mul(self.keep_pow).div(Dd::ONE.sub(next_pow));
        self.keep_pow = next_pow;
        self.term
    }

    /// `|eta_{n+1}/eta_n|` if we were to advance now.
    fn next_ratio(&self) -> f64 {
        let denom = Dd::ONE.sub(self.keep_pow.mul(self.keep)).to_f64();
        (self.base.abs().to_f64() * self.keep_pow.to_f64() / denom).abs()
    }
}

/// Series coefficient `eta_n(s)`.
pub fn eta_n(n: u32, s: f64, params: ModelParams) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut it = EtaIter::new(s, params);
    let mut v = Dd::ONE;
    for _ in 0..n {
        v = it.advance();
    }
    v.to_f64()
}

/// Double-double numerator/denominator sums of the fixed-point identity,
/// with a bound on the dropped remainder of either sum.
fn eta_series_sums(s: f64, params: ModelParams, tol: f64) -> Result<(Dd, Dd, usize, f64)> {
    let ps = params.p() * s;
    let mut it = EtaIter::new(s, params);
    let mut numer = Dd::ONE; // eta_0
    let mut denom = Dd::from(ps); // eta_0 h_0(ps)
    let mut terms = 1usize;
    loop {
        let term = it.advance();
        let h = Dd::from(ps)
            .mul(it.keep_pow)
            .div(Dd::from(1.0 - ps).add(Dd::from(ps).mul(it.keep_pow)));
        numer = numer.add(term);
        denom = denom.add(term.mul(h));
        terms += 1;
        let t_abs = term.abs().to_f64();
        let ratio = it.next_ratio();
        if ratio < 0.5
            && t_abs <= tol * numer.abs().to_f64().max(f64::MIN_POSITIVE)
            && t_abs <= tol * denom.abs().to_f64().max(f64::MIN_POSITIVE)
        {
            // remaining terms are dominated by a geometric series at `ratio`
            let tail = t_abs * ratio / (1.0 - ratio);
            return Ok((numer, denom, terms, tail));
        }
        if terms > 100_000 || !term.is_finite() {
            return Err(Error::Numerical("eta series did not converge".into()));
        }
    }
}

fn a1_dd(s: f64, params: ModelParams, tol: f64) -> Result<(Dd, f64, usize)> {
    let ps = params.p() * s;
    let (numer, denom, terms, tail) = eta_series_sums(s, params, tol)?;
    let d_f = denom.abs().to_f64();
    if d_f < 1e-290 {
        return Err(Error::Numerical("eta denominator series vanished".into()));
    }
    let value = Dd::ONE
        .add(Dd::from(1.0 - s).div(Dd::from(ps)))
        .sub(numer.div(denom));
    // both truncation tails propagated through the quotient, plus roundoff
    let err = tail / d_f + numer.abs().to_f64() * tail / (d_f * d_f)
        + 1e-28 * (1.0 + value.abs().to_f64());
    Ok((value, err, terms))
}

/// `E_1[s^tau]` by the eta series, with both truncations propagated through
/// the quotient into the error bound.
pub fn pgf_tau_from_one(s: f64, params: ModelParams, tol: f64) -> Result<SeriesResult> {
    check_s_tol(s, tol)?;
    let (value, err, terms) = a1_dd(s, params, tol)?;
    Ok(SeriesResult::new(value.to_f64(), terms, err))
}

fn check_s_tol(s: f64, tol: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0,1), got {s}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    Ok(())
}

/// `E_n[s^tau]` for `n = n_start`, lifting the seed `a_1` through the
/// first-step recursion in double-double precision.
///
/// Signals instability when an intermediate value leaves `[0, 1]` by more
/// than the tracked error bound, or once that bound grows past the point of
/// resolving anything (use [`pgf_tau_linear_solve`] for such starts).
pub fn pgf_tau_from_n(
    n_start: u32,
    s: f64,
    params: ModelParams,
    tol: f64,
) -> Result<SeriesResult> {
    if n_start == 0 {
        return Err(Error::InvalidParameter("start population must be at least 1".into()));
    }
    if n_start == 1 {
        return pgf_tau_from_one(s, params, tol);
    }
    check_s_tol(s, tol)?;
    let (seed, seed_err, _) = a1_dd(s, params, tol.min(1e-25))?;
    let p = params.p();
    let c = params.c();
    let ps = Dd::from(p * s);
    let qs = Dd::from((1.0 - p) * s);
    let keep = Dd::from(1.0 - c);
    let cc = Dd::from(c);

    let mut a: Vec<Dd> = vec![Dd::ONE, seed];
    let mut err = seed_err;
    for m in 1..n_start as usize {
        // T = sum_{k=0}^m C(m,k) c^{m-k} (1-c)^k a_k; the weights sum to one
        let mut t_sum = Dd::ZERO;
        let mut w = pow_dd(cc, m as u32);
        for k in 0..=m {
            t_sum = t_sum.add(w.mul(a[k]));
            if k < m {
                let ratio = Dd::from((m - k) as f64).div(Dd::from((k + 1) as f64));
                w = w.mul(ratio).mul(keep).div(cc);
            }
        }
        let next = a[m].sub(qs.mul(t_sum)).div(ps);
        err = (err * (1.0 + qs.to_f64()) + 1e-30) / ps.to_f64();
        let v = next.to_f64();
        if !next.is_finite() || err > 0.5 || v < -err || v > 1.0 + err {
            return Err(Error::Numerical(format!(
                "recursion unstable at m={}: value {v} with error bound {err:.3e}",
                m + 1
            )));
        }
        a.push(next);
    }
    Ok(SeriesResult::new(a[n_start as usize].to_f64(), n_start as usize, err))
}

fn pow_dd(base: Dd, e: u32) -> Dd {
    let mut acc = Dd::ONE;
    for _ in 0..e {
        acc = acc.mul(base);
    }
    acc
}

/// `a_0..=a_{n_max}` from the truncated first-step linear system, solved
/// under the two boundary closures `a_{K+1} = 0` and `a_{K+1} = a_K`; the
/// half-width of the bracket is the error bound. Signals when the bracket at
/// `n_max` is wider than 1e-6 (K too small).
pub fn pgf_tau_linear_solve(
    n_max: u32,
    s: f64,
    params: ModelParams,
    k_dim: u32,
) -> Result<Vec<SeriesResult>> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0,1), got {s}")));
    }
    if k_dim < n_max + 10 {
        return Err(Error::InvalidParameter(format!(
            "system dimension {k_dim} too small for n_max {n_max}"
        )));
    }
    let low = solve_with_closure(s, params, k_dim as usize, false)?;
    let high = solve_with_closure(s, params, k_dim as usize, true)?;
    let mut out = vec![SeriesResult::new(1.0, 0, 0.0)];
    for i in 0..n_max as usize {
        let mid = 0.5 * (low[i] + high[i]);
        let half = 0.5 * (high[i] - low[i]).abs();
        out.push(SeriesResult::new(mid, k_dim as usize, half + 1e-13));
    }
    let worst = out[n_max as usize].error_bound;
    if worst > 1e-6 {
        return Err(Error::Numerical(format!(
            "closure bracket at n={n_max} is {worst:.3e}; increase the system dimension"
        )));
    }
    Ok(out)
}

/// Solves for `a_1..a_K` with `a_0 = 1` and the chosen closure for `a_{K+1}`.
fn solve_with_closure(s: f64, params: ModelParams, k: usize, equal: bool) -> Result<Vec<f64>> {
    let p = params.p();
    let c = params.c();
    let ps = p * s;
    let qs = (1.0 - p) * s;
    let mut mat = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    for m in 1..=k {
        let row = m - 1;
        mat[(row, row)] += 1.0;
        if m < k {
            mat[(row, m)] -= ps;
        } else if equal {
            mat[(row, k - 1)] -= ps;
        }
        for j in 0..=m {
            let w = qs * binomial::pmf(m as u64, j as u64, 1.0 - c);
            if j == 0 {
                rhs[row] += w;
            } else {
                mat[(row, j - 1)] -= w;
            }
        }
    }
    mat.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Numerical("extinction system is singular".into()))
}

/// Diverging time scale `d_n = -ln(n) / ((1-p) ln(1-c))` of the coupling
/// time from gap `n`. Undefined at `c = 1`.
pub fn dn_scale(n: u64, params: ModelParams) -> Result<f64> {
    if params.c() >= 1.0 {
        return Err(Error::InvalidParameter(
            "d_n is undefined at c = 1 (ln(1-c) diverges)".into(),
        ));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("population index must be at least 1".into()));
    }
    Ok(-(n as f64).ln() / ((1.0 - params.p()) * (1.0 - params.c()).ln()))
}

/// Empirical quantiles (deciles and quartiles) of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub q10: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q90: f64,
}

impl Quantiles {
    fn from_sorted(sorted: &[f64]) -> Quantiles {
        let at = |q: f64| {
            let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
            sorted[idx]
        };
        Quantiles { q10: at(0.10), q25: at(0.25), q50: at(0.50), q75: at(0.75), q90: at(0.90) }
    }
}

/// One population size of the scaling experiment.
#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub n: u64,
    pub dn: f64,
    /// Quantiles of the gap-vanishing time over `d_n`.
    pub xi_over_dn: Quantiles,
    /// Quantiles of the extinction time over `d_n`.
    pub tau_over_dn: Quantiles,
    /// Empirical law of `rho = tau - xi`.
    pub rho_law: Pmf,
}

/// Couples starts `0` and `n`, recording the gap-vanishing time `xi`, the
/// extinction time `tau` of the upper copy (the first visit of the lower
/// copy to zero at or after `xi`), and their difference `rho`.
pub fn tau_scaling_experiment(
    params: ModelParams,
    ns: &[u64],
    reps: u64,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be positive".into()));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for (idx, &n) in ns.iter().enumerate() {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("population {n} below 2")));
        }
        let dn = dn_scale(n, params)?;
        let samples: Vec<(u64, u64)> = shards(reps)
            .into_par_iter()
            .map(|(stream, count)| {
                // one stream namespace per population size
                let mut rng = task_rng(seed.wrapping_add(idx as u64), stream);
                let mut local = Vec::with_capacity(count as usize);
                for _ in 0..count {
                    local.push(run_coupled_extinction(n, params, &mut rng));
                }
                local
            })
            .reduce(Vec::new, |mut a, mut b| {
                a.append(&mut b);
                a
            });
        let mut xi: Vec<f64> = samples.iter().map(|&(x, _)| x as f64 / dn).collect();
        let mut tau: Vec<f64> = samples.iter().map(|&(_, t)| t as f64 / dn).collect();
        xi.sort_by(f64::total_cmp);
        tau.sort_by(f64::total_cmp);
        let max_rho = samples.iter().map(|&(x, t)| t - x).max().unwrap() as usize;
        let mut rho_counts = vec![0.0; max_rho + 1];
        for &(x, t) in &samples {
            rho_counts[(t - x) as usize] += 1.0 / reps as f64;
        }
        rows.push(ScalingRow {
            n,
            dn,
            xi_over_dn: Quantiles::from_sorted(&xi),
            tau_over_dn: Quantiles::from_sorted(&tau),
            rho_law: Pmf::from_raw(rho_counts),
        });
    }
    Ok(rows)
}

/// Runs one coupled path from `(0, n)`: returns `(xi, tau)`.
fn run_coupled_extinction<R: Rng + ?Sized>(
    n: u64,
    params: ModelParams,
    rng: &mut R,
) -> (u64, u64) {
    let mut s = CoupledState::new(0, n);
    let mut t = 0u64;
    let mut xi = None;
    loop {
        t += 1;
        s = coupled_step(s, params, rng);
        if xi.is_none() && s.h == 0 {
            xi = Some(t);
        }
        if let Some(x) = xi {
            if s.x == 0 {
                return (x, t);
            }
        }
    }
}
