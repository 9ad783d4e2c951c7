//! Carrier type for truncated series and products.

/// Value of an infinite sum or product together with how far the evaluation
/// went and a bound on the neglected remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesResult {
    pub value: f64,
    pub terms_used: usize,
    /// Valid bound on the truncation remainder under the evaluator's
    /// documented stopping rule.
    pub error_bound: f64,
}

impl SeriesResult {
    pub fn new(value: f64, terms_used: usize, error_bound: f64) -> Self {
        SeriesResult { value, terms_used, error_bound }
    }
}
