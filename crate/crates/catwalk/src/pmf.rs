//! Exact finite-precision arithmetic on probability mass functions over the
//! non-negative integers.
//!
//! A [`Pmf`] stores entries on `0..=K` plus an explicit `tail_mass`: the mass
//! the representation does not locate. Entries are always pointwise lower
//! bounds of the true law, so for any operation chain the reported
//! total-variation distance between two pmfs is correct up to
//! `(tail_a + tail_b)/2`, which [`Pmf::tv_distance`] reports alongside the
//! value. Operations fold trailing entries into the tail only while the total
//! stays below the truncation budget [`EPS_TRUNC`].

use crate::binomial;
use crate::{Error, ModelParams, Result};
use serde::{Deserialize, Serialize};

/// Absolute truncation budget: `tail_mass` stays at or below this after every
/// engine operation (it can only be exceeded by mass that was already
/// unlocated in the inputs, as in long convolution chains).
pub const EPS_TRUNC: f64 = 1e-12;

/// Tolerance for mass-conservation checks.
pub const MASS_TOL: f64 = 1e-12;

/// A truncated pmf on `{0..K}` with tracked tail mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    probs: Vec<f64>,
    tail_mass: f64,
}

/// Total-variation distance together with its truncation error bar: the true
/// distance lies within `value ± error_bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvEstimate {
    pub value: f64,
    pub error_bound: f64,
}

impl Pmf {
    /// Unit mass at `x`.
    pub fn delta(x: u64) -> Pmf {
        let mut probs = vec![0.0; x as usize + 1];
        probs[x as usize] = 1.0;
        Pmf { probs, tail_mass: 0.0 }
    }

    /// Shifted geometric law with pmf `(1-alpha)^k alpha` on `{0,1,...}`,
    /// truncated so the tail is below `eps_trunc`. Rejects `alpha <= 0` (no
    /// proper law) and `alpha > 1`.
    pub fn geometric(alpha: f64, eps_trunc: f64) -> Result<Pmf> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "geometric parameter must lie in (0,1], got {alpha}"
            )));
        }
        if alpha == 1.0 {
            return Ok(Pmf::delta(0));
        }
        let q = 1.0 - alpha;
        let len_f = (eps_trunc.ln() / q.ln()).ceil().max(1.0);
        if !(len_f <= 20_000_000.0) {
            return Err(Error::Numerical(format!(
                "geometric({alpha}) support exceeds {len_f:.0} states at tail {eps_trunc}"
            )));
        }
        let len = len_f as usize;
        let mut probs = Vec::with_capacity(len);
        let mut v = alpha;
        for _ in 0..len {
            probs.push(v);
            v *= q;
        }
        let tail = q.powi(len as i32);
        Ok(Pmf { probs, tail_mass: tail })
    }

    /// Poisson law truncated so the tail is below `eps_trunc`.
    pub fn poisson(beta: f64, eps_trunc: f64) -> Result<Pmf> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "poisson rate must be non-negative, got {beta}"
            )));
        }
        if beta == 0.0 {
            return Ok(Pmf::delta(0));
        }
        let p0 = (-beta).exp();
        if p0 == 0.0 {
            return Err(Error::Numerical(format!(
                "poisson rate {beta} too large for direct evaluation"
            )));
        }
        let mut probs = vec![p0];
        let mut v = p0;
        let mut total = p0;
        let mut k = 0u32;
        while 1.0 - total > eps_trunc {
            k += 1;
            v *= beta / k as f64;
            probs.push(v);
            total += v;
        }
        Ok(Pmf { probs, tail_mass: (1.0 - total).max(0.0) })
    }

    /// Builds a pmf from raw entries; the tail is whatever mass is missing.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Pmf {
        let mut pmf = Pmf { probs, tail_mass: 0.0 };
        pmf.retotal();
        pmf.trim_zeros();
        pmf
    }

    fn retotal(&mut self) {
        let sum: f64 = self.probs.iter().sum();
        self.tail_mass = (1.0 - sum).max(0.0);
    }

    fn trim_zeros(&mut self) {
        while self.probs.len() > 1 && *self.probs.last().unwrap() == 0.0 {
            self.probs.pop();
        }
    }

    /// Folds trailing entries into the tail while the total stays within the
    /// truncation budget.
    fn fold_tail(&mut self, budget: f64) {
        while self.probs.len() > 1 {
            let last = *self.probs.last().unwrap();
            if self.tail_mass + last <= budget {
                self.tail_mass += last;
                self.probs.pop();
            } else {
                break;
            }
        }
        self.trim_zeros();
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Largest represented state.
    pub fn support_max(&self) -> u64 {
        (self.probs.len() - 1) as u64
    }

    /// `P(X = j)` as represented (0 beyond the truncation point).
    pub fn prob(&self, j: u64) -> f64 {
        self.probs.get(j as usize).copied().unwrap_or(0.0)
    }

    /// Mean of the represented part (a lower bound on the true mean).
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(j, &p)| j as f64 * p).sum()
    }

    /// Probability generating function `E[s^X]` of the represented part.
    pub fn pgf(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        for &p in &self.probs {
            acc += p * pow;
            pow *= s;
        }
        acc
    }

    /// The pmf shifted up by `k` states.
    pub fn shifted(&self, k: u64) -> Pmf {
        let mut probs = vec![0.0; k as usize + self.probs.len()];
        probs[k as usize..].copy_from_slice(&self.probs);
        Pmf { probs, tail_mass: self.tail_mass }
    }

    /// One step of the chain: birth with probability `p`, binomial
    /// catastrophe otherwise. Support grows by at most one; lost mass is
    /// accounted in the tail.
    pub fn evolve(&self, params: ModelParams) -> Pmf {
        let p = params.p();
        let keep = 1.0 - params.c();
        let mut out = vec![0.0; self.probs.len() + 1];
        for (j, &w) in self.probs.iter().enumerate() {
            if w > 0.0 {
                out[j + 1] += p * w;
                binomial::accumulate_row(j as u64, keep, (1.0 - p) * w, &mut out);
            }
        }
        let mut pmf = Pmf::from_raw(out);
        pmf.fold_tail(EPS_TRUNC.max(pmf.tail_mass));
        pmf
    }

    /// Law of `Bin(R, eps)` for `R` distributed as `self`: every unit is kept
    /// independently with probability `eps`.
    pub fn binomial_thin(&self, eps: f64) -> Result<Pmf> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!(
                "thinning probability must lie in [0,1], got {eps}"
            )));
        }
        if eps == 1.0 {
            return Ok(self.clone());
        }
        if eps == 0.0 {
            // everything, tail included, collapses to zero
            return Ok(Pmf::delta(0));
        }
        let mut out = vec![0.0; self.probs.len()];
        for (j, &w) in self.probs.iter().enumerate() {
            if w > 0.0 {
                binomial::accumulate_row(j as u64, eps, w, &mut out);
            }
        }
        let mut pmf = Pmf::from_raw(out);
        pmf.fold_tail(EPS_TRUNC.max(pmf.tail_mass));
        Ok(pmf)
    }

    /// Law of the sum of independent draws from `self` and `other`. Tail
    /// masses add (conservatively).
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        let mut out = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, &a) in self.probs.iter().enumerate() {
            if a > 0.0 {
                for (j, &b) in other.probs.iter().enumerate() {
                    out[i + j] += a * b;
                }
            }
        }
        let mut pmf = Pmf::from_raw(out);
        pmf.fold_tail(EPS_TRUNC.max(pmf.tail_mass));
        pmf
    }

    /// Half-L1 distance over the represented support, with the tail error
    /// bar: the true total-variation distance lies within
    /// `value ± error_bound`.
    pub fn tv_distance(&self, other: &Pmf) -> TvEstimate {
        let n = self.probs.len().max(other.probs.len());
        let mut acc = 0.0;
        for j in 0..n {
            let a = self.probs.get(j).copied().unwrap_or(0.0);
            let b = other.probs.get(j).copied().unwrap_or(0.0);
            acc += (a - b).abs();
        }
        TvEstimate {
            value: 0.5 * acc,
            error_bound: 0.5 * (self.tail_mass + other.tail_mass),
        }
    }

    /// Checks the representation invariants; used by tests.
    #[cfg(test)]
    pub(crate) fn assert_valid(&self) {
        assert!(self.probs.iter().all(|&p| p >= 0.0 && p.is_finite()));
        assert!(self.tail_mass >= 0.0);
        let total: f64 = self.probs.iter().sum::<f64>() + self.tail_mass;
        assert!((total - 1.0).abs() < MASS_TOL, "total mass {total}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, c: f64) -> ModelParams {
        ModelParams::new(p, c).unwrap()
    }

    #[test]
    fn delta_basics() {
        let d = Pmf::delta(0);
        assert_eq!(d.probs(), &[1.0]);
        assert_eq!(Pmf::delta(5).mean(), 5.0);
        let tv = Pmf::delta(0).tv_distance(&Pmf::delta(1));
        assert_eq!(tv.value, 1.0);
        assert_eq!(tv.error_bound, 0.0);
    }

    #[test]
    fn geometric_entries_and_mean() {
        assert_eq!(Pmf::geometric(1.0, 1e-12).unwrap(), Pmf::delta(0));
        assert!(Pmf::geometric(0.0, 1e-12).is_err());
        let g = Pmf::geometric(0.6, 1e-12).unwrap();
        assert!((g.prob(0) - 0.6).abs() < 1e-15);
        assert!((g.prob(1) - 0.24).abs() < 1e-15);
        g.assert_valid();
        // mean (1-alpha)/alpha by summation
        let g = Pmf::geometric(0.5, 1e-14).unwrap();
        assert!((g.mean() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_entries() {
        assert_eq!(Pmf::poisson(0.0, 1e-12).unwrap(), Pmf::delta(0));
        let po = Pmf::poisson(1.0, 1e-13).unwrap();
        assert!((po.prob(0) - (-1.0f64).exp()).abs() < 1e-12);
        po.assert_valid();
        assert!((po.mean() - 1.0).abs() < 1e-13 * po.support_max() as f64 + 1e-12);
        assert!(Pmf::poisson(-1.0, 1e-12).is_err());
    }

    #[test]
    fn evolve_from_zero_is_one_kernel_row() {
        let out = Pmf::delta(0).evolve(params(0.4, 0.1));
        assert!((out.prob(0) - 0.6).abs() < 1e-15);
        assert!((out.prob(1) - 0.4).abs() < 1e-15);
        out.assert_valid();
    }

    #[test]
    fn evolve_total_catastrophe_collapses() {
        // c = 1: evolve(d) = (1-p) delta(0) + p shift(d, 1)
        let d = Pmf::geometric(0.3, 1e-13).unwrap();
        let out = d.evolve(params(0.4, 1.0));
        let mut expect = d.shifted(1);
        for v in expect.probs.iter_mut() {
            *v *= 0.4;
        }
        expect.probs[0] += 0.6;
        expect.tail_mass *= 0.4;
        assert!(out.tv_distance(&expect).value < 1e-14);
    }

    #[test]
    fn evolve_conserves_mass() {
        let mut d = Pmf::delta(7);
        let pr = params(0.35, 0.2);
        for _ in 0..50 {
            d = d.evolve(pr);
            d.assert_valid();
            assert!(d.tail_mass() <= EPS_TRUNC + 1e-15);
        }
    }

    #[test]
    fn thinning_endpoints() {
        let d = Pmf::geometric(0.4, 1e-13).unwrap();
        assert_eq!(d.binomial_thin(1.0).unwrap(), d);
        assert_eq!(d.binomial_thin(0.0).unwrap(), Pmf::delta(0));
        assert!(d.binomial_thin(1.5).is_err());
    }

    #[test]
    fn thinned_geometric_is_geometric() {
        // thin(Geom^-(1-p), eps) = Geom^-(1-r), r = p eps / (1 - p(1-eps))
        let p = 0.55;
        for &eps in &[0.3, 0.8] {
            let thinned = Pmf::geometric(1.0 - p, 1e-15).unwrap().binomial_thin(eps).unwrap();
            let r = p * eps / (1.0 - p * (1.0 - eps));
            let direct = Pmf::geometric(1.0 - r, 1e-15).unwrap();
            let tv = thinned.tv_distance(&direct);
            assert!(tv.value < 1e-10, "eps={eps} tv={}", tv.value);
        }
    }

    #[test]
    fn convolution_identities() {
        assert_eq!(Pmf::delta(3).convolve(&Pmf::delta(4)), Pmf::delta(7));
        let d = Pmf::geometric(0.25, 1e-13).unwrap();
        let same = d.convolve(&Pmf::delta(0));
        assert!(d.tv_distance(&same).value < 1e-15);
    }

    #[test]
    fn poisson_additivity() {
        let a = Pmf::poisson(1.0, 1e-14).unwrap();
        let b = Pmf::poisson(2.0, 1e-14).unwrap();
        let c = Pmf::poisson(3.0, 1e-14).unwrap();
        let tv = a.convolve(&b).tv_distance(&c);
        assert!(tv.value + tv.error_bound < 1e-10);
        assert!(a.convolve(&b).support_max() <= 60);
    }

    #[test]
    fn tv_examples() {
        let d = Pmf::geometric(0.5, 1e-13).unwrap();
        assert_eq!(d.tv_distance(&d).value, 0.0);
        // brute-force half-L1 oracle over 0..200
        let a = Pmf::geometric(0.5, 1e-15).unwrap();
        let b = Pmf::geometric(0.6, 1e-15).unwrap();
        let mut brute = 0.0;
        for k in 0..=200u64 {
            let pa = 0.5f64.powi(k as i32) * 0.5;
            let pb = 0.4f64.powi(k as i32) * 0.6;
            brute += (pa - pb).abs();
        }
        brute *= 0.5;
        let tv = a.tv_distance(&b);
        assert!((tv.value - brute).abs() < 1e-12, "tv={} brute={brute}", tv.value);
    }

    #[test]
    fn pgf_kernel_identity() {
        // pgf of evolve(d) equals p s G(s) + (1-p) G(1 - (1-c)(1-s))
        let d = Pmf::geometric(0.35, 1e-14).unwrap();
        for &(p, c) in &[(0.4, 0.1), (0.2, 0.7), (0.5, 1.0)] {
            let pr = params(p, c);
            let out = d.evolve(pr);
            for &s in &[0.1, 0.5, 0.9] {
                let lhs = out.pgf(s);
                let rhs = p * s * d.pgf(s) + (1.0 - p) * d.pgf(1.0 - (1.0 - c) * (1.0 - s));
                assert!((lhs - rhs).abs() < 1e-10, "p={p} c={c} s={s}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn serializes_as_probs_and_tail() {
        let d = Pmf::geometric(0.7, 1e-6).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.starts_with("{\"probs\":["));
        assert!(json.contains("\"tail_mass\":"));
        let back: Pmf = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
