//! Kernel entries, one-step sampling and single trajectories.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::binomial;
use crate::rng::task_rng;
use crate::ModelParams;

/// A simulated path together with the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<u64>,
    pub seed: u64,
}

/// One-step transition probability from `i` to `j`.
///
/// `p` for the birth `j = i + 1`, the binomial catastrophe term
/// `(1-p) C(i,j) (1-c)^j c^{i-j}` for `j <= i`, zero otherwise. Total on all
/// of `Z+^2`, rows sum to one.
pub fn transition_prob(i: u64, j: u64, params: ModelParams) -> f64 {
    if j == i + 1 {
        params.p()
    } else if j <= i {
        (1.0 - params.p()) * binomial::pmf(i, j, 1.0 - params.c())
    } else {
        0.0
    }
}

/// Draws the next state from `x`: `x + 1` with probability `p`, otherwise a
/// `Bin(x, 1-c)` catastrophe survivor count.
pub fn step_sample<R: Rng + ?Sized>(x: u64, params: ModelParams, rng: &mut R) -> u64 {
    if rng.random::<f64>() < params.p() {
        x + 1
    } else {
        sample_binomial(x, 1.0 - params.c(), rng)
    }
}

/// Exact `Bin(n, q)` sampler (inversion for small `n*q`, BTPE otherwise).
pub(crate) fn sample_binomial<R: Rng + ?Sized>(n: u64, q: f64, rng: &mut R) -> u64 {
    if n == 0 || q <= 0.0 {
        return 0;
    }
    if q >= 1.0 {
        return n;
    }
    Binomial::new(n, q).expect("valid binomial parameters").sample(rng)
}

/// Local drift `E[X_{t+1} - X_t | X_t = x] = p - (1-p) c x`, which equals
/// `p (1 - x/mu)`: the walk is mean-reverting around the stationary mean.
pub fn drift(x: u64, params: ModelParams) -> f64 {
    params.p() - (1.0 - params.p()) * params.c() * x as f64
}

/// Probability of hitting zero in the next step, `(1-p) c^x`: geometric decay
/// in the current state.
pub fn hit_zero_prob(x: u64, params: ModelParams) -> f64 {
    (1.0 - params.p()) * params.c().powi(x as i32)
}

/// Simulates `steps` transitions from `x0`, reproducibly for a given seed.
pub fn simulate_trajectory(x0: u64, steps: u64, params: ModelParams, seed: u64) -> Trajectory {
    let mut rng = task_rng(seed, 0);
    let mut states = Vec::with_capacity(steps as usize + 1);
    states.push(x0);
    let mut x = x0;
    for _ in 0..steps {
        x = step_sample(x, params, &mut rng);
        states.push(x);
    }
    Trajectory { states, seed }
}
