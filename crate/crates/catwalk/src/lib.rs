//! Numerical laboratory for a discrete-time random walk with binomial
//! catastrophes.
//!
//! The chain lives on the non-negative integers. Each step, with probability
//! `p` the population grows by one; otherwise a catastrophe strikes and every
//! individual survives independently with probability `1 - c`. This crate
//! provides
//!
//! - exact distribution evolution on truncated supports with rigorous
//!   tail-mass accounting ([`pmf`]),
//! - the stationary law as a convolution of shifted geometrics, persistence
//!   times and their log-scale brackets ([`stationary`]),
//! - the monotone coupling of two copies, exact coupling-time tails and
//!   two-sided total-variation bounds ([`coupling`]),
//! - cutoff experiments for parameter families with Poisson-limit stationary
//!   laws ([`cutoff`]),
//! - extinction-time sampling, generating-function series and a linear-solve
//!   oracle ([`extinction`]),
//! - the random-environment / branching reading of the model ([`branching`]).
//!
//! All randomness flows through explicit seeds; see [`rng`] for the stream
//! discipline.

pub mod branching;
pub mod chain;
pub mod coupling;
pub mod cutoff;
pub mod extinction;
pub mod params;
pub mod pmf;
pub mod rng;
pub mod series;
pub mod stationary;

mod binomial;
mod dd;

pub use params::ModelParams;
pub use pmf::Pmf;
pub use series::SeriesResult;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its admissible domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A numerical procedure lost control of its error (series blow-up,
    /// recursion instability, bracket too wide).
    #[error("numerical fault: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
