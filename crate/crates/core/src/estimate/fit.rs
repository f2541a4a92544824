//! Weighted least-squares fits of log-tail shapes.

use serde::{Deserialize, Serialize};

use super::tail::{TailEstimate, Z95};
use crate::error::{Error, Result};

/// Minimum number of grid points inside a fit window.
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitModel {
    /// `ln p = c0 + slope ln x`.
    LogLogSlope,
    /// `ln p = c0 - psi sqrt(x)`, minus `(1/4) ln x` when `quarter_log` is set.
    StretchedExp { quarter_log: bool },
}

impl FitModel {
    pub const STRETCHED_EXP: Self = Self::StretchedExp { quarter_log: true };
}

/// Which grid points enter the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum WindowPolicy {
    /// `p̂ ∈ [max(1e-6, 5 / n), 1e-2]`.
    Default,
    ProbabilityBand {
        lo: f64,
        hi: f64,
    },
    XRange {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    pub coefficients: Vec<Coefficient>,
    /// First and last grid points used.
    pub window: [f64; 2],
    pub n_points: usize,
    /// `Σ w r²` with weights equal to exceedance counts.
    pub weighted_rss: f64,
}

impl FitReport {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Decay rate `psi` of a stretched-exponential fit.
    pub fn psi(&self) -> Option<&Coefficient> {
        self.coefficient("psi")
    }

    /// Slope of a log-log fit.
    pub fn slope(&self) -> Option<&Coefficient> {
        self.coefficient("slope")
    }
}

/// Weighted straight-line fit `y = a + b t`; returns `(a, b, se_a, se_b, rss)`.
///
/// `v[k]` is the sampling variance of `y[k]`. Points are ordered by growing
/// threshold, so `cov(y_i, y_j) = v[min(i, j)]` as for nested exceedance
/// events. Each standard error is the larger of the sandwich error under that
/// covariance and the residual-variance error `rss / (m - 2)`.
fn wls_line(t: &[f64], y: &[f64], w: &[f64], v: &[f64]) -> (f64, f64, f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let mt = t.iter().zip(w).map(|(t, w)| w * t).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let mut stt = 0.0;
    let mut sty = 0.0;
    for i in 0..t.len() {
        stt += w[i] * (t[i] - mt) * (t[i] - mt);
        sty += w[i] * (t[i] - mt) * (y[i] - my);
    }
    let b = sty / stt;
    let a = my - b * mt;
    let rss: f64 = (0..t.len()).map(|i| w[i] * (y[i] - a - b * t[i]).powi(2)).sum();
    let s2 = rss / (t.len() as f64 - 2.0);
    let c: Vec<f64> = (0..t.len()).map(|i| w[i] * (t[i] - mt) / stt).collect();
    let d: Vec<f64> = (0..t.len()).map(|i| w[i] / sw - mt * c[i]).collect();
    let se_b = (s2 / stt).max(nested_variance(&c, v)).sqrt();
    let se_a = (s2 * (1.0 / sw + mt * mt / stt)).max(nested_variance(&d, v)).sqrt();
    (a, b, se_a, se_b, rss)
}

/// `Σ_i Σ_j c_i c_j v[min(i, j)]`.
fn nested_variance(c: &[f64], v: &[f64]) -> f64 {
    let mut tail = 0.0;
    let mut out = 0.0;
    for k in (0..c.len()).rev() {
        tail += c[k];
        let prev = if k == 0 { 0.0 } else { v[k - 1] };
        out += (v[k] - prev) * tail * tail;
    }
    out.max(0.0)
}

/// Delta-method variance of `ln p̂` at grid point `j`.
fn log_variance(est: &TailEstimate, j: usize) -> f64 {
    let p = est.p_hat[j];
    if est.weighted {
        ((est.ci_hi[j] - p) / (Z95 * p)).powi(2)
    } else {
        (1.0 - p) / est.exceed_count[j] as f64
    }
}

fn in_window(est: &TailEstimate, j: usize, policy: WindowPolicy) -> bool {
    let p = est.p_hat[j];
    let x = est.grid[j];
    match policy {
        WindowPolicy::Default => {
            let lo = 1e-6f64.max(5.0 / est.n_cycles as f64);
            p >= lo && p <= 1e-2
        }
        WindowPolicy::ProbabilityBand { lo, hi } => p >= lo && p <= hi,
        WindowPolicy::XRange { lo, hi } => x >= lo && x <= hi,
    }
}

/// Fits `model` to `ln p̂` over the window, weighting each point by its exceedance count.
pub fn fit_tail(estimate: &TailEstimate, model: FitModel, window: WindowPolicy) -> Result<FitReport> {
    let idx: Vec<usize> = (0..estimate.len())
        .filter(|&j| estimate.p_hat[j] > 0.0 && estimate.exceed_count[j] > 0 && in_window(estimate, j, window))
        .collect();
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientWindow {
            found: idx.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let x: Vec<f64> = idx.iter().map(|&j| estimate.grid[j]).collect();
    let w: Vec<f64> = idx.iter().map(|&j| estimate.exceed_count[j] as f64).collect();
    let lnp: Vec<f64> = idx.iter().map(|&j| estimate.p_hat[j].ln()).collect();
    let var: Vec<f64> = idx.iter().map(|&j| log_variance(estimate, j)).collect();
    let window_x = [x[0], x[x.len() - 1]];
    let (coefficients, rss) = match model {
        FitModel::LogLogSlope => {
            let t: Vec<f64> = x.iter().map(|v| v.ln()).collect();
            let (a, b, se_a, se_b, rss) = wls_line(&t, &lnp, &w, &var);
            (
                vec![
                    Coefficient {
                        name: "c0".into(),
                        value: a,
                        se: se_a,
                    },
                    Coefficient {
                        name: "slope".into(),
                        value: b,
                        se: se_b,
                    },
                ],
                rss,
            )
        }
        FitModel::StretchedExp { quarter_log } => {
            let t: Vec<f64> = x.iter().map(|v| v.sqrt()).collect();
            let y: Vec<f64> = x
                .iter()
                .zip(&lnp)
                .map(|(v, l)| if quarter_log { l + 0.25 * v.ln() } else { *l })
                .collect();
            let (a, b, se_a, se_b, rss) = wls_line(&t, &y, &w, &var);
            if !(-b > 0.0) {
                return Err(Error::NonPositiveDecay(-b));
            }
            (
                vec![
                    Coefficient {
                        name: "c0".into(),
                        value: a,
                        se: se_a,
                    },
                    Coefficient {
                        name: "psi".into(),
                        value: -b,
                        se: se_b,
                    },
                ],
                rss,
            )
        }
    };
    Ok(FitReport {
        model,
        coefficients,
        window: window_x,
        n_points: idx.len(),
        weighted_rss: rss,
    })
}
