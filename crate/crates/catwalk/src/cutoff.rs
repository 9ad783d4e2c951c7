//! Cutoff experiments for parameter families `p_n, c_n -> 0` with
//! `p_n/c_n -> beta`.
//!
//! On such a family the stationary laws converge to `Pois(beta)` while the
//! mixing time from the growing start `y_n` is `t_n = ln(y_n)/c_n`; the
//! distance to stationarity collapses from one to zero inside a window
//! `b_n = (1+eps)(ln(y_n)/2 + ln ln(y_n)/c_n)` that is vanishingly small
//! relative to `t_n`. This module evaluates exact distance curves on integer
//! time grids around `t_n` and the threshold quantities used to bracket the
//! drop.

use crate::pmf::Pmf;
use crate::stationary::stationary_pmf;
use crate::{Error, ModelParams, Result};

/// How parameters scale with the family index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `c_n = n^{-1/2}`, `p_n = beta n^{-1/2}`, `y_n = n`. Keeps supports
    /// small enough for exact evolution at desk scale.
    Sqrt,
}

/// A parameter family under the cutoff assumptions, with window parameter
/// `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFamily {
    beta: f64,
    epsilon: f64,
    schedule: Schedule,
}

impl CutoffFamily {
    pub fn new(beta: f64, epsilon: f64, schedule: Schedule) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "limit ratio beta must be positive, got {beta}"
            )));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "window parameter epsilon must be non-negative, got {epsilon}"
            )));
        }
        Ok(CutoffFamily { beta, epsilon, schedule })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Raw schedule values `(p_n, c_n, y_n)`.
    pub fn schedule_at(&self, n: u64) -> (f64, f64, f64) {
        match self.schedule {
            Schedule::Sqrt => {
                let c = 1.0 / (n as f64).sqrt();
                (self.beta * c, c, n as f64)
            }
        }
    }

    /// Validated model parameters and start state for index `n`.
    ///
    /// Enforces the family sanity gate: `p_n, c_n` in `(0,1)`, `y_n >= 1`,
    /// and `p_n/c_n` within 10% of `beta`.
    pub fn params_at(&self, n: u64) -> Result<(ModelParams, u64)> {
        let (p, c, y) = self.schedule_at(n);
        if !(c < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule index n={n} gives c_n={c} outside (0,1)"
            )));
        }
        if y < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "schedule index n={n} gives y_n={y} below 1"
            )));
        }
        let ratio = p / c;
        if (ratio - self.beta).abs() > 0.1 * self.beta {
            return Err(Error::InvalidParameter(format!(
                "schedule index n={n} has p_n/c_n={ratio}, more than 10% from beta={}",
                self.beta
            )));
        }
        Ok((ModelParams::new(p, c)?, y as u64))
    }
}

/// Cutoff location `t_n = ln(y_n)/c_n`.
pub fn cutoff_time(n: u64, family: &CutoffFamily) -> f64 {
    let (_, c, y) = family.schedule_at(n);
    y.ln() / c
}

/// Window width `b_n = (1+eps)(ln(y_n)/2 + ln ln(y_n)/c_n)`.
pub fn window(n: u64, family: &CutoffFamily) -> f64 {
    let (_, c, y) = family.schedule_at(n);
    (1.0 + family.epsilon()) * (0.5 * y.ln() + y.ln().ln() / c)
}

/// The threshold times bracketing the distance drop for margin `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// `(ln y_n + theta)/c_n`: beyond this the two-start distance is below
    /// `e^{-theta}`.
    pub lambda: f64,
    /// `(ln y_n - ln ln y_n - ln(p_n/c_n) - theta (ln y_n)^{-1/4}) / (-ln(1-c_n))`:
    /// before this the distance is still near one.
    pub nu: f64,
    /// Concentration level `(1 + theta/(2 (ln y_n)^{1/4})) p_n nu_n`.
    pub gamma: f64,
}

/// Computes `lambda_n`, `nu_n`, `gamma_n` for margin `theta > 0`.
///
/// Requires `ln y_n > 1` (so `ln ln y_n` is defined); signals when the index
/// is too small for the asymptotic regime (`nu_n <= 0`).
pub fn lemma_thresholds(n: u64, theta: f64, family: &CutoffFamily) -> Result<Thresholds> {
    if theta <= 0.0 {
        return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
    }
    let (p, c, y) = family.schedule_at(n);
    let lny = y.ln();
    if lny <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "n={n} gives ln y_n = {lny} <= 1; thresholds undefined"
        )));
    }
    let lambda = (lny + theta) / c;
    let nu = (lny - lny.ln() - (p / c).ln() - theta / lny.powf(0.25)) / (-f64::ln_1p(-c));
    if nu <= 0.0 {
        return Err(Error::Numerical(format!(
            "n={n} too small for the asymptotic regime: nu_n({theta}) = {nu} <= 0"
        )));
    }
    let gamma = (1.0 + theta / (2.0 * lny.powf(0.25))) * p * nu;
    Ok(Thresholds { lambda, nu, gamma })
}

/// Chernoff-Hoeffding binomial tail bounds for `X ~ Bin(m, q)`:
/// `P(X > (1+delta)qm) <= exp(-delta^2 qm/2)` and
/// `P(X < (1-delta)qm) <= exp(-delta^2 qm/3)`.
pub fn chernoff_bounds(m: u64, q: f64, delta: f64) -> (f64, f64) {
    let qm = q * m as f64;
    ((-delta * delta * qm / 2.0).exp(), (-delta * delta * qm / 3.0).exp())
}

/// What the distance curve is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceTarget {
    /// `d_t(y_n, pi^{(n)})`: distance to stationarity.
    Stationary,
    /// `d_t(y_n, 0)`: distance between the two starts `y_n` and `0`.
    FromZero,
}

/// One point of a distance curve, with the truncation error bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistancePoint {
    pub t: u64,
    pub d: f64,
    pub err: f64,
}

/// Exact distance at each requested (sorted) time for family index `n`,
/// evolving `delta(y_n)` incrementally across the grid.
pub fn distance_curve(
    n: u64,
    family: &CutoffFamily,
    times: &[u64],
    target: DistanceTarget,
    eps_trunc: f64,
) -> Result<Vec<DistancePoint>> {
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("times must be sorted ascending".into()));
    }
    let (params, y) = family.params_at(n)?;
    let pi = match target {
        DistanceTarget::Stationary => Some(stationary_pmf(params, eps_trunc)),
        DistanceTarget::FromZero => None,
    };
    let mut law = Pmf::delta(y);
    let mut from_zero = Pmf::delta(0);
    let mut t = 0u64;
    let mut out = Vec::with_capacity(times.len());
    for &target_t in times {
        while t < target_t {
            law = law.evolve(params);
            if pi.is_none() {
                from_zero = from_zero.evolve(params);
            }
            t += 1;
        }
        let tv = match &pi {
            Some(pi) => law.tv_distance(pi),
            None => law.tv_distance(&from_zero),
        };
        out.push(DistancePoint { t: target_t, d: tv.value, err: tv.error_bound });
    }
    Ok(out)
}

/// One profile entry: distance at `t = round(t_n + u b_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub n: u64,
    pub u: f64,
    pub t: u64,
    pub d: f64,
    pub err: f64,
}

/// Rounds half-up to an integer time, clamped at zero.
pub fn profile_time(n: u64, u: f64, family: &CutoffFamily) -> u64 {
    let t = cutoff_time(n, family) + u * window(n, family);
    (t + 0.5).floor().max(0.0) as u64
}

/// Distance-to-stationarity profile on the scaled grid, for each family
/// index. Rows are ordered by `(n, t)`.
pub fn cutoff_profile(
    family: &CutoffFamily,
    ns: &[u64],
    scaled_grid: &[f64],
    eps_trunc: f64,
) -> Result<Vec<ProfileRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        let mut grid: Vec<(u64, f64)> =
            scaled_grid.iter().map(|&u| (profile_time(n, u, family), u)).collect();
        grid.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let times: Vec<u64> = grid.iter().map(|&(t, _)| t).collect();
        let curve = distance_curve(n, family, &times, DistanceTarget::Stationary, eps_trunc)?;
        for (&(t, u), point) in grid.iter().zip(curve.iter()) {
            debug_assert_eq!(t, point.t);
            rows.push(ProfileRow { n, u, t, d: point.d, err: point.err });
        }
    }
    Ok(rows)
}

/// Distance between the family's stationary law and its Poisson limit.
pub fn poisson_limit_check(n: u64, family: &CutoffFamily, eps_trunc: f64) -> Result<f64> {
    let (params, _) = family.params_at(n)?;
    let pi = stationary_pmf(params, eps_trunc);
    let limit = Pmf::poisson(family.beta(), eps_trunc)?;
    Ok(pi.tv_distance(&limit).value)
}
