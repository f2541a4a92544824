//! Exact integrals of the functional integrand over one inter-event segment.
//!
//! Between events the queue length is constant and the workload decreases
//! with unit slope, so every segment integral has a closed form or a fast
//! convergent representation.

use crate::error::{Error, Result};
use crate::quad;

/// `∫_0^delta e^{-theta (t0 + s)} (w0 - s)^k ds` for `0 <= delta <= w0`.
pub fn integrate_workload_segment(w0: f64, delta: f64, k: f64, theta: f64, t0: f64) -> Result<f64> {
    if !(delta >= 0.0) || delta > w0 * (1.0 + 1e-12) {
        return Err(Error::DomainError(format!(
            "workload segment needs 0 <= delta <= w0, got delta = {delta}, w0 = {w0}"
        )));
    }
    if !(k >= 0.0) || !(theta >= 0.0) {
        return Err(Error::DomainError("k and theta must be non-negative".into()));
    }
    Ok(workload_segment(w0, delta.min(w0), k, theta, t0))
}

/// `q^k e^{-theta t0} (1 - e^{-theta delta}) / theta`, or `q^k delta` when `theta = 0`.
pub fn integrate_queue_segment(q: u64, delta: f64, k: f64, theta: f64, t0: f64) -> f64 {
    queue_segment(q as f64, delta, k, theta, t0)
}

#[inline]
pub(crate) fn queue_segment(q: f64, delta: f64, k: f64, theta: f64, t0: f64) -> f64 {
    let level = if k == 1.0 { q } else { q.powf(k) };
    if theta == 0.0 {
        level * delta
    } else {
        level * (-theta * t0).exp() * -(-theta * delta).exp_m1() / theta
    }
}

#[inline]
pub(crate) fn workload_segment(w0: f64, delta: f64, k: f64, theta: f64, t0: f64) -> f64 {
    if delta <= 0.0 {
        return 0.0;
    }
    if theta == 0.0 {
        if k == 1.0 {
            return delta * (w0 - 0.5 * delta);
        }
        if k == 0.0 {
            return delta;
        }
        return power_difference(w0, delta, k + 1.0) / (k + 1.0);
    }
    let discount = (-theta * t0).exp();
    if discount == 0.0 {
        return 0.0;
    }
    discount * discounted_power(w0, delta, k, theta)
}

/// `w0^p - (w0 - delta)^p` without cancellation for short segments.
fn power_difference(w0: f64, delta: f64, p: f64) -> f64 {
    let a = w0 - delta;
    if a <= 0.0 {
        w0.powf(p)
    } else if delta < 0.5 * w0 {
        -w0.powf(p) * (p * (-delta / w0).ln_1p()).exp_m1()
    } else {
        w0.powf(p) - a.powf(p)
    }
}

/// `∫_0^delta e^{-theta s} (w0 - s)^k ds` for `theta > 0`.
fn discounted_power(w0: f64, delta: f64, k: f64, theta: f64) -> f64 {
    let scale = theta * w0;
    let integer_k = k.fract() == 0.0 && k <= 64.0;
    if integer_k && scale >= 2.0 * (k + 1.0) {
        by_parts(w0, delta, k as u32, theta)
    } else if scale <= 60.0 {
        positive_series(w0, delta, k, theta)
    } else {
        truncated_quadrature(w0, delta, k, theta)
    }
}

/// Integration by parts downward in the power:
/// `I_j = (w0^j - a^j e^{-theta delta}) / theta - (j / theta) I_{j-1}`.
/// Stable when `theta w0` dominates `k`.
fn by_parts(w0: f64, delta: f64, k: u32, theta: f64) -> f64 {
    let a = (w0 - delta).max(0.0);
    let decay = (-theta * delta).exp();
    let mut acc = -(-theta * delta).exp_m1() / theta;
    let mut w_pow = 1.0;
    let mut a_pow = 1.0;
    for j in 1..=k {
        w_pow *= w0;
        a_pow *= a;
        acc = (w_pow - a_pow * decay) / theta - (j as f64 / theta) * acc;
    }
    acc
}

/// Substituting `u = w0 - s` and expanding `e^{theta u}`:
/// `e^{-theta w0} Σ_m theta^m / m! (w0^{p+m} - a^{p+m}) / (p+m)`, `p = k + 1`.
/// All terms are positive.
fn positive_series(w0: f64, delta: f64, k: f64, theta: f64) -> f64 {
    let p = k + 1.0;
    let x = theta * w0;
    let ratio_log = if delta >= w0 {
        f64::NEG_INFINITY
    } else {
        (-delta / w0).ln_1p()
    };
    let base = w0.powf(p);
    let mut coef = 1.0; // x^m / m!
    let mut sum = 0.0;
    let mut m = 0u32;
    loop {
        let q = p + m as f64;
        let frac = if ratio_log == f64::NEG_INFINITY {
            1.0
        } else {
            -(q * ratio_log).exp_m1()
        };
        let term = coef * frac / q;
        sum += term;
        if m as f64 > x && term <= 1e-17 * sum {
            break;
        }
        m += 1;
        coef *= x / m as f64;
        if m > 10_000 {
            break;
        }
    }
    (-x).exp() * base * sum
}

/// Large `theta w0`: the integrand is negligible beyond `s = 40 / theta`, where
/// `w0 - s` is still bounded away from zero, so composite Gauss–Legendre on
/// panels of width `2 / theta` is accurate.
fn truncated_quadrature(w0: f64, delta: f64, k: f64, theta: f64) -> f64 {
    let upper = delta.min(40.0 / theta);
    let panels = ((upper * theta / 2.0).ceil() as usize).max(1);
    let f = |s: f64| (-theta * s).exp() * (w0 - s).powf(k);
    quad::gl16_composite(&f, 0.0, upper, panels)
}
