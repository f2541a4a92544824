//! Ratios of estimated tails to asymptotic predictions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tail::{TailEstimate, CONFIDENT_COUNT, Z95};
use crate::asymptotics::{AsymptoticCurve, ValueKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub x: f64,
    pub ratio: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub exceed_count: u64,
    /// Fewer than 200 exceedances, or censoring may bias the estimate.
    pub low_confidence: bool,
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()))
}

fn low_confidence(est: &TailEstimate, j: usize) -> bool {
    est.exceed_count[j] < CONFIDENT_COUNT || est.biased_low[j]
}

/// `p̂(x) / curve(x)` with the estimate's interval divided through.
pub fn ratio_diagnostic(estimate: &TailEstimate, curve: &AsymptoticCurve) -> Result<Vec<RatioPoint>> {
    if estimate.digest != curve.digest {
        return Err(Error::GridMismatch(format!(
            "parameter digests differ: estimate {} vs curve {}",
            estimate.digest, curve.digest
        )));
    }
    let grid = curve.grid();
    if !same_grid(&estimate.grid, &grid) {
        return Err(Error::GridMismatch("estimate and curve grids differ".into()));
    }
    if curve.kind != ValueKind::Probability {
        return Err(Error::DomainError(format!(
            "curve {} is a log-shape and has no probability scale",
            curve.name.label()
        )));
    }
    Ok(curve
        .points
        .iter()
        .enumerate()
        .map(|(j, c)| RatioPoint {
            x: c.x,
            ratio: estimate.p_hat[j] / c.value,
            ci_lo: estimate.ci_lo[j] / c.value,
            ci_hi: estimate.ci_hi[j] / c.value,
            exceed_count: estimate.exceed_count[j],
            low_confidence: low_confidence(estimate, j),
        })
        .collect())
}

fn log_se(est: &TailEstimate, j: usize) -> f64 {
    if est.ci_lo[j] > 0.0 && est.ci_hi[j] > 0.0 {
        (est.ci_hi[j].ln() - est.ci_lo[j].ln()) / (2.0 * Z95)
    } else {
        f64::INFINITY
    }
}

/// `p̂_num(x) / p̂_den(x)` for two estimates on the same grid, typically an
/// area tail over the busy-period tail at the mapped level.
///
/// The interval adds the two log-scale standard errors in quadrature.
pub fn ratio_to_empirical(numerator: &TailEstimate, denominator: &TailEstimate) -> Result<Vec<RatioPoint>> {
    if numerator.digest != denominator.digest {
        return Err(Error::GridMismatch(format!(
            "parameter digests differ: {} vs {}",
            numerator.digest, denominator.digest
        )));
    }
    if !same_grid(&numerator.grid, &denominator.grid) {
        return Err(Error::GridMismatch("numerator and denominator grids differ".into()));
    }
    Ok((0..numerator.len())
        .map(|j| {
            let ratio = numerator.p_hat[j] / denominator.p_hat[j];
            let se = log_se(numerator, j).hypot(log_se(denominator, j));
            let (ci_lo, ci_hi) = if ratio > 0.0 && ratio.is_finite() && se.is_finite() {
                (ratio * (-Z95 * se).exp(), ratio * (Z95 * se).exp())
            } else {
                (0.0, f64::INFINITY)
            };
            RatioPoint {
                x: numerator.grid[j],
                ratio,
                ci_lo,
                ci_hi,
                exceed_count: numerator.exceed_count[j],
                low_confidence: low_confidence(numerator, j) || low_confidence(denominator, j),
            }
        })
        .collect())
}

/// Confident points whose ratio falls outside `[lo, hi]`.
pub fn outside_band(points: &[RatioPoint], lo: f64, hi: f64) -> Vec<RatioPoint> {
    points
        .iter()
        .filter(|p| !p.low_confidence && !(p.ratio >= lo && p.ratio <= hi))
        .copied()
        .collect()
}

pub fn ratios_to_csv(points: &[RatioPoint], meta: &serde_json::Value) -> String {
    let mut out = String::new();
    for line in serde_json::to_string_pretty(meta).unwrap_or_default().lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("x,ratio,ci_lo,ci_hi,exceed_count,low_confidence\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.x, p.ratio, p.ci_lo, p.ci_hi, p.exceed_count, p.low_confidence
        );
    }
    out
}
