//! Model parameters and the quantities derived from them.

use crate::{Error, Result};

/// The pair `(p, c)`: birth probability and per-individual kill probability.
///
/// Requires `0 < p < 1` and `0 < c <= 1`. The degenerate `c = 1` (a
/// catastrophe wipes out the whole population) is admitted and is the main
/// closed-form oracle throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    p: f64,
    c: f64,
}

impl ModelParams {
    pub fn new(p: f64, c: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "birth probability p must lie in (0,1), got {p}"
            )));
        }
        if !(c.is_finite() && c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "kill probability c must lie in (0,1], got {c}"
            )));
        }
        Ok(ModelParams { p, c })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// One-step survival factor `alpha = p + (1-p)(1-c) = 1 - c(1-p)`.
    ///
    /// This is the probability that the gap between two coupled copies does
    /// not shrink in one step when the gap equals one; it also governs the
    /// geometric rate of convergence to stationarity.
    pub fn alpha(&self) -> f64 {
        1.0 - self.c * (1.0 - self.p)
    }

    /// Tilted birth probability `p/alpha`, in `(p, 1)` for `c < 1`.
    ///
    /// The chain conditioned on never coupling evolves with this birth
    /// probability. For `c = 1` the tilt degenerates to 1 and the tilted
    /// chain is improper; [`ModelParams::tilted`] rejects that case.
    pub fn tilted_p(&self) -> f64 {
        self.p / self.alpha()
    }

    /// Parameters of the tilted chain `(p/alpha, c)`.
    pub fn tilted(&self) -> Result<ModelParams> {
        ModelParams::new(self.tilted_p(), self.c)
    }

    /// Stationary mean `p / (c(1-p))`.
    pub fn mean(&self) -> f64 {
        self.p / (self.c * (1.0 - self.p))
    }
}
