//! Hill estimator of a regularly varying tail index.

use serde::{Deserialize, Serialize};

use super::tail::Z95;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub alpha: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub k: usize,
    pub n: usize,
    /// The `(k+1)`-th largest value, the threshold of the fit.
    pub threshold: f64,
}

/// `⌊n^{2/3}⌋` capped at `n / 10`.
pub fn default_hill_k(n: usize) -> usize {
    (((n as f64).powf(2.0 / 3.0) + 1e-6).floor() as usize).min(n / 10)
}

/// `alpha = k / Σ_{i<=k} ln(X_(i) / X_(k+1))` on the `k` largest order statistics,
/// with interval `alpha (1 ± 1.96 / sqrt(k))`.
pub fn hill_estimator(values: &[f64], k: usize) -> Result<HillEstimate> {
    let n = values.len();
    if k < 2 || k >= n {
        return Err(Error::DomainError(format!(
            "Hill needs 2 <= k < n, got k = {k}, n = {n}"
        )));
    }
    let mut v = values.to_vec();
    // Descending order: positions 0..k hold the top k, position k the (k+1)-th largest.
    v.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = v[k];
    if !(threshold > 0.0) {
        return Err(Error::DegenerateSample(format!(
            "order statistic X_(k+1) = {threshold} is not positive"
        )));
    }
    let sum: f64 = v[..k].iter().map(|&x| (x / threshold).ln()).sum();
    if !(sum > 0.0) {
        return Err(Error::DegenerateSample("the top k+1 values are all equal".into()));
    }
    let alpha = k as f64 / sum;
    let half = Z95 / (k as f64).sqrt();
    Ok(HillEstimate {
        alpha,
        ci_lo: alpha * (1.0 - half),
        ci_hi: alpha * (1.0 + half),
        k,
        n,
        threshold,
    })
}
