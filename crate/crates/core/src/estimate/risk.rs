//! Monte Carlo summaries of the negative part of the risk process.

use serde::{Deserialize, Serialize};

use super::sample::map_chunks;
use super::tail::{default_grid, wilson_interval};
use crate::cycle::risk_negative_part_integral;
use crate::dist::DistributionSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskParams {
    /// Initial capital.
    pub v: f64,
    /// Premium rate.
    pub c: f64,
    pub claim_rate: f64,
    pub claim: DistributionSpec,
    pub horizon: f64,
}

impl RiskParams {
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !self.v.is_finite() {
            errs.push("risk: v must be finite".into());
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            errs.push("risk: c must be positive".into());
        }
        if !(self.claim_rate.is_finite() && self.claim_rate > 0.0) {
            errs.push("risk: claim_rate must be positive".into());
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            errs.push("risk: horizon must be positive".into());
        }
        errs.extend(self.claim.violations().into_iter().map(|e| format!("risk claim: {e}")));
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskTailPoint {
    pub x: f64,
    /// `P̂(-I > x)`.
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub n: u64,
    /// Mean of `I = ∫ S 1{S < 0}`, which is non-positive.
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    /// `P̂(I < 0)`, the finite-horizon ruin probability.
    pub prob_negative: f64,
    pub tail: Vec<RiskTailPoint>,
}

/// Simulates `n` independent paths and summarises the integral.
///
/// `grid` defaults to the log grid of the strictly negative values of `-I`.
pub fn risk_summary(params: &RiskParams, n: u64, master_seed: u64, grid: Option<Vec<f64>>) -> Result<RiskSummary> {
    let errs = params.violations();
    if !errs.is_empty() {
        return Err(Error::InvalidParams(errs));
    }
    if n < 2 {
        return Err(Error::DomainError("risk summary needs at least 2 paths".into()));
    }
    let values: Vec<f64> = map_chunks(n, master_seed, |rng, count| {
        (0..count)
            .map(|_| {
                risk_negative_part_integral(
                    params.v,
                    params.c,
                    params.claim_rate,
                    &params.claim,
                    params.horizon,
                    rng,
                )
            })
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect();
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let losses: Vec<f64> = values.iter().map(|v| -v).collect();
    let negative = losses.iter().filter(|&&l| l > 0.0).count() as u64;
    let grid = match grid {
        Some(g) => g,
        None => {
            let positive: Vec<f64> = losses.iter().copied().filter(|&l| l > 0.0).collect();
            if positive.len() < 10 {
                Vec::new()
            } else {
                default_grid(&positive, None)?
            }
        }
    };
    let tail = grid
        .iter()
        .map(|&x| {
            let count = losses.iter().filter(|&&l| l > x).count() as u64;
            let (ci_lo, ci_hi) = wilson_interval(count, n);
            RiskTailPoint {
                x,
                p_hat: count as f64 / nf,
                ci_lo,
                ci_hi,
                count,
            }
        })
        .collect();
    Ok(RiskSummary {
        n,
        mean,
        variance,
        std_error: (variance / nf).sqrt(),
        prob_negative: negative as f64 / nf,
        tail,
    })
}
