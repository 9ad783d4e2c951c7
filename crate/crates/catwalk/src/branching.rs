//! The random-environment reading of the model: branching with unit
//! immigration, regeneration at catastrophe times, and the catastrophe-
//! sampled chain.
//!
//! Conditioning on the coin sequence (1 = birth, 0 = catastrophe) makes the
//! chain a branching process with Bernoulli offspring and one immigrant per
//! birth slot, the integer-autoregressive reading `X_{t+1} = thin(X_t) + I_t`.
//! Sampling at catastrophe times gives the chain
//! `Z_{t+1} = Bin(Z_t + R_t, 1-c)` with geometric immigration, whose
//! stationary law is the `k >= 1` part of the stationary convolution; adding
//! the independent `Geom^-(1-p)` birth count recovers the stationary law of
//! the full chain.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::chain::{sample_binomial, Trajectory};
use crate::pmf::Pmf;
use crate::rng::task_rng;
use crate::series::SeriesResult;
use crate::stationary::geometric_factor_convolution;
use crate::{Error, ModelParams, Result};

/// A fixed coin sequence: `true` marks a birth event, `false` a catastrophe.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    omega: Vec<bool>,
    p: f64,
}

impl Environment {
    /// Wraps an explicit coin sequence (mostly for tests and quenched runs).
    pub fn from_bits(omega: Vec<bool>, p: f64) -> Environment {
        Environment { omega, p }
    }

    pub fn omega(&self) -> &[bool] {
        &self.omega
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

/// Draws `len` independent Bernoulli(p) coins.
pub fn sample_environment<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Result<Environment> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "environment parameter must lie in [0,1], got {p}"
        )));
    }
    let omega = (0..len).map(|_| rng.random::<f64>() < p).collect();
    Ok(Environment { omega, p })
}

/// Catastrophe times of the environment, 1-based: `T_n = inf{k > T_{n-1} :
/// omega_k = 0}` with `T_0 = 0` left implicit.
pub fn regeneration_times(env: &Environment) -> Vec<u64> {
    env.omega()
        .iter()
        .enumerate()
        .filter(|&(_, &birth)| !birth)
        .map(|(i, _)| i as u64 + 1)
        .collect()
}

/// One step of the catastrophe-sampled chain: `Bin(z + r, 1-c)` where `r` is
/// the number of births since the previous catastrophe.
pub fn sampled_chain_step<R: Rng + ?Sized>(z: u64, r: u64, c: f64, rng: &mut R) -> u64 {
    sample_binomial(z + r, 1.0 - c, rng)
}

/// Stationary law of the catastrophe-sampled chain: the `k >= 1` part of the
/// geometric-factor convolution.
pub fn sampled_chain_stationary_pmf(params: ModelParams, eps_trunc: f64) -> Pmf {
    geometric_factor_convolution(params, eps_trunc, 1)
}

/// Stationary pgf of the sampled chain,
/// `prod_{k>=1} (1-p) / (1 - p(s(1-c)^k + 1 - (1-c)^k))`, evaluated in log
/// form. Stops once the remaining log-factors are below `tol`.
pub fn z_inf_pgf(s: f64, params: ModelParams, tol: f64) -> Result<SeriesResult> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidParameter(format!("pgf argument must lie in [0,1], got {s}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let p = params.p();
    let c = params.c();
    let ratio = p / (1.0 - p);
    let mut ln_sum = 0.0;
    let mut k = 1u32;
    loop {
        let x_k = ratio * (1.0 - c).powi(k as i32);
        ln_sum += f64::ln_1p(x_k * (1.0 - s));
        // remaining sum of ln(1+x_j(1-s)) <= sum of x_j (1-s)
        let remainder = if c < 1.0 {
            ratio * (1.0 - c).powi(k as i32 + 1) / c * (1.0 - s)
        } else {
            0.0
        };
        if remainder < tol {
            let value = (-ln_sum).exp();
            return Ok(SeriesResult::new(value, k as usize, value * remainder));
        }
        k += 1;
    }
}

/// One entry of the rare-but-severe catastrophe limit experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RareSevereRow {
    pub p: f64,
    pub c: f64,
    /// Distance between the post-catastrophe stationary law and the Poisson
    /// reference.
    pub tv_to_poisson: f64,
    pub mean: f64,
}

/// For each `(p_m, c_m)` of the schedule, builds the post-catastrophe law
/// (the `k >= 1` convolution) exactly and measures its distance to
/// `Pois(beta)`.
pub fn rare_severe_limit_check(
    schedule: &[(f64, f64)],
    beta: f64,
    eps_trunc: f64,
) -> Result<Vec<RareSevereRow>> {
    let limit = Pmf::poisson(beta, eps_trunc)?;
    let mut out = Vec::with_capacity(schedule.len());
    for &(p, c) in schedule {
        let params = ModelParams::new(p, c)?;
        if params.c() >= 1.0 {
            return Err(Error::InvalidParameter("schedule entries need c < 1".into()));
        }
        let law = sampled_chain_stationary_pmf(params, eps_trunc);
        out.push(RareSevereRow {
            p,
            c,
            tv_to_poisson: law.tv_distance(&limit).value,
            mean: law.mean(),
        });
    }
    Ok(out)
}

/// Runs the chain under a fixed environment: `x + 1` on a birth coin,
/// `Bin(x, 1-c)` on a catastrophe coin.
pub fn quenched_simulate(x0: u64, env: &Environment, c: f64, seed: u64) -> Trajectory {
    let mut rng = task_rng(seed, 0);
    let mut states = Vec::with_capacity(env.len() + 1);
    states.push(x0);
    let mut x = x0;
    for &birth in env.omega() {
        x = if birth { x + 1 } else { sample_binomial(x, 1.0 - c, &mut rng) };
        states.push(x);
    }
    Trajectory { states, seed }
}

/// Draws the geometric number of births between catastrophes,
/// `Geom^-(1-p)` on `{0,1,...}`.
pub fn sample_birth_count<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    Geometric::new(1.0 - p).expect("valid geometric parameter").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn params(p: f64, c: f64) -> ModelParams {
        ModelParams::new(p, c).unwrap()
    }

    #[test]
    fn environment_sampling_stats() {
        let mut rng = task_rng(1, 0);
        let env = sample_environment(1_000_000, 0.4, &mut rng).unwrap();
        let mean = env.omega().iter().filter(|&&b| b).count() as f64 / env.len() as f64;
        let sigma = (0.4 * 0.6 / 1e6).sqrt();
        assert!((mean - 0.4).abs() < 3.0 * sigma, "mean={mean}");
        assert!(sample_environment(10, 1.5, &mut rng).is_err());

        // all-ones probability p^T at T = 10 by frequency
        let p = 0.5f64;
        let trials = 1_000_000;
        let mut all_ones = 0u64;
        for _ in 0..trials {
            let e = sample_environment(10, p, &mut rng).unwrap();
            if e.omega().iter().all(|&b| b) {
                all_ones += 1;
            }
        }
        let q = p.powi(10);
        let sigma = (trials as f64 * q * (1.0 - q)).sqrt();
        assert!((all_ones as f64 - trials as f64 * q).abs() < 3.0 * sigma);
    }

    #[test]
    fn regeneration_basics() {
        let env = Environment::from_bits(vec![false; 7], 0.0);
        assert_eq!(regeneration_times(&env), vec![1, 2, 3, 4, 5, 6, 7]);
        let env = Environment::from_bits(vec![true, false, true, false], 0.5);
        assert_eq!(regeneration_times(&env), vec![2, 4]);
        let mut rng = task_rng(2, 0);
        let env = sample_environment(100_000, 0.7, &mut rng).unwrap();
        let times = regeneration_times(&env);
        assert!(times.iter().all(|&t| t >= 1 && t <= env.len() as u64));
    }

    #[test]
    fn regeneration_gaps_are_geometric() {
        // KS-style discrete test of the gap law against Geom(1-p) on {1,2,...}
        let p = 0.4f64;
        let mut rng = task_rng(3, 0);
        let env = sample_environment(1_700_000, p, &mut rng).unwrap();
        let times = regeneration_times(&env);
        let mut gaps = Vec::with_capacity(times.len());
        let mut prev = 0u64;
        for &t in &times {
            gaps.push(t - prev);
            prev = t;
        }
        let n = gaps.len() as f64;
        assert!(n > 900_000.0);
        let mean = gaps.iter().sum::<u64>() as f64 / n;
        assert!((mean - 1.0 / (1.0 - p)).abs() < 0.005, "gap mean {mean}");
        let max_gap = *gaps.iter().max().unwrap();
        let mut counts = vec![0u64; max_gap as usize + 1];
        for &g in &gaps {
            counts[g as usize] += 1;
        }
        let mut cum = 0.0;
        let mut d: f64 = 0.0;
        for k in 1..=max_gap {
            cum += counts[k as usize] as f64 / n;
            let exact = 1.0 - p.powi(k as i32);
            d = d.max((cum - exact).abs());
        }
        // critical value at the 1e-3 level: sqrt(ln(2/alpha)/2)/sqrt(n)
        let crit = (f64::ln(2.0 / 1e-3) / 2.0).sqrt() / n.sqrt();
        assert!(d < crit, "KS statistic {d} over critical {crit}");
    }

    #[test]
    fn sampled_step_edges() {
        let mut rng = task_rng(4, 0);
        assert_eq!(sampled_chain_step(5, 3, 1.0, &mut rng), 0);
        assert_eq!(sampled_chain_step(0, 0, 0.3, &mut rng), 0);
    }

    #[test]
    fn z_pgf_normalization_and_degenerate_case() {
        let m = params(0.4, 0.2);
        assert!((z_inf_pgf(1.0, m, 1e-14).unwrap().value - 1.0).abs() < 1e-14);
        let m1 = params(0.4, 1.0);
        for &s in &[0.0, 0.3, 0.9] {
            assert!((z_inf_pgf(s, m1, 1e-14).unwrap().value - 1.0).abs() < 1e-14);
        }
        assert!(z_inf_pgf(-0.1, m, 1e-14).is_err());
    }

    #[test]
    fn stationary_law_is_sampled_law_plus_births() {
        // pgf(pi)(s) = z_inf_pgf(s) * (1-p)/(1-ps)
        let m = params(0.4, 0.2);
        let pi = crate::stationary::stationary_pmf(m, 1e-12);
        for &s in &[0.1, 0.5, 0.9] {
            let lhs = pi.pgf(s);
            let rhs = z_inf_pgf(s, m, 1e-15).unwrap().value * 0.6 / (1.0 - 0.4 * s);
            assert!((lhs - rhs).abs() < 1e-10, "s={s}: {lhs} vs {rhs}");
        }
        // and the convolution route agrees with the pgf route
        let z_law = sampled_chain_stationary_pmf(m, 1e-12);
        for &s in &[0.3, 0.7] {
            let direct = z_inf_pgf(s, m, 1e-15).unwrap().value;
            assert!((z_law.pgf(s) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn sampled_chain_matches_reading_x_at_catastrophes() {
        // simulate X and read it right after each catastrophe vs simulate Z
        // directly; compare both empirical laws and the exact law
        let m = params(0.4, 0.2);
        let exact = sampled_chain_stationary_pmf(m, 1e-12);
        let samples = 500_000usize;
        let stride = 8;

        let mut rng = task_rng(5, 0);
        let mut x = 0u64;
        let mut via_x = Vec::with_capacity(samples);
        let mut catastrophes = 0u64;
        while via_x.len() < samples {
            if rng.random::<f64>() < m.p() {
                x += 1;
            } else {
                x = sample_binomial(x, 1.0 - m.c(), &mut rng);
                catastrophes += 1;
                if catastrophes > 100 && catastrophes % stride == 0 {
                    via_x.push(x);
                }
            }
        }

        let mut z = 0u64;
        let mut direct = Vec::with_capacity(samples);
        for i in 0..(samples as u64 * stride + 100) {
            let r = sample_birth_count(m.p(), &mut rng);
            z = sampled_chain_step(z, r, m.c(), &mut rng);
            if i > 100 && i % stride == 0 && direct.len() < samples {
                direct.push(z);
            }
        }

        let to_pmf = |v: &[u64]| {
            let max = *v.iter().max().unwrap() as usize;
            let mut probs = vec![0.0; max + 1];
            for &s in v {
                probs[s as usize] += 1.0 / v.len() as f64;
            }
            Pmf::from_raw(probs)
        };
        let emp_x = to_pmf(&via_x);
        let emp_z = to_pmf(&direct);
        assert!(emp_x.tv_distance(&emp_z).value < 0.01);
        assert!(emp_x.tv_distance(&exact).value < 0.01);
        assert!(emp_z.tv_distance(&exact).value < 0.01);
    }

    #[test]
    fn rare_severe_schedule_approaches_poisson() {
        let beta = 0.5;
        let schedule: Vec<(f64, f64)> =
            [10.0, 100.0, 1000.0, 10000.0].iter().map(|&m| (1.0 - 1.0 / m, 1.0 - beta / m)).collect();
        let rows = rare_severe_limit_check(&schedule, beta, 1e-12).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].tv_to_poisson < w[0].tv_to_poisson, "{w:?}");
        }
        // mean of the k>=1 part: p(1-c)/((1-p)c) -> beta
        for row in &rows {
            let closed = row.p * (1.0 - row.c) / ((1.0 - row.p) * row.c);
            assert!((row.mean - closed).abs() < 1e-8);
        }
        assert!((rows.last().unwrap().mean - beta).abs() < 1e-3);
    }

    #[test]
    fn rare_severe_degenerate_beta_zero() {
        // p_m -> 1 with c fixed at 1-1/m^2 so (1-c)/(1-p) -> 0: A_m -> delta(0)
        let schedule: Vec<(f64, f64)> =
            [10.0, 100.0].iter().map(|&m| (1.0 - 1.0 / m, 1.0 - 1.0 / (m * m))).collect();
        let rows = rare_severe_limit_check(&schedule, 0.0, 1e-12).unwrap();
        assert!(rows[1].tv_to_poisson < rows[0].tv_to_poisson);
        assert!(rows[1].tv_to_poisson < 0.01);
    }

    #[test]
    fn quenched_deterministic_environments() {
        let all_births = Environment::from_bits(vec![true; 50], 1.0);
        let traj = quenched_simulate(3, &all_births, 0.2, 1);
        for (t, &s) in traj.states.iter().enumerate() {
            assert_eq!(s, 3 + t as u64);
        }
        // all catastrophes with c = 1: extinct after the first step, no births
        let none = Environment::from_bits(vec![false; 10], 0.0);
        let traj = quenched_simulate(9, &none, 1.0, 1);
        assert_eq!(&traj.states[1..], &[0; 10]);
    }

    #[test]
    fn quenched_step_is_thin_plus_immigration() {
        // omega = 0: one step is exactly binomial thinning of the state
        let m_c = 0.3;
        let x0 = 12u64;
        let env0 = Environment::from_bits(vec![false], 0.0);
        let n = 200_000u64;
        let mut counts = vec![0u64; x0 as usize + 1];
        for seed in 0..n {
            let t = quenched_simulate(x0, &env0, m_c, seed);
            counts[t.states[1] as usize] += 1;
        }
        let mut chi2 = 0.0;
        let mut dof = 0;
        for j in 0..=x0 {
            let q = crate::binomial::pmf(x0, j, 1.0 - m_c);
            let expect = n as f64 * q;
            if expect >= 5.0 {
                let diff = counts[j as usize] as f64 - expect;
                chi2 += diff * diff / expect;
                dof += 1;
            }
        }
        let p_value = 1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(chi2);
        assert!(p_value > 0.001, "chi2={chi2} p={p_value}");
        // omega = 1: deterministic unit immigration
        let env1 = Environment::from_bits(vec![true], 1.0);
        assert_eq!(quenched_simulate(x0, &env1, m_c, 0).states[1], x0 + 1);
    }

    #[test]
    fn annealed_law_matches_kernel_evolution() {
        // averaging quenched runs over random environments recovers the
        // annealed law at t = 20
        let m = params(0.4, 0.25);
        let t = 20usize;
        let x0 = 2u64;
        let mut exact = Pmf::delta(x0);
        for _ in 0..t {
            exact = exact.evolve(m);
        }
        let n = 400_000u64;
        let mut rng = task_rng(6, 0);
        let mut counts = vec![0u64; 64];
        for seed in 0..n {
            let env = sample_environment(t, m.p(), &mut rng).unwrap();
            let traj = quenched_simulate(x0, &env, m.c(), seed ^ 0x5eed);
            let s = traj.states[t] as usize;
            if counts.len() <= s {
                counts.resize(s + 1, 0);
            }
            counts[s] += 1;
        }
        let mut chi2 = 0.0;
        let mut dof = 0;
        for (j, &cnt) in counts.iter().enumerate() {
            let q = exact.prob(j as u64);
            let expect = n as f64 * q;
            if expect >= 5.0 {
                let diff = cnt as f64 - expect;
                chi2 += diff * diff / expect;
                dof += 1;
            }
        }
        let p_value = 1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(chi2);
        assert!(p_value > 0.001, "chi2={chi2} dof={dof} p={p_value}");
    }
}
