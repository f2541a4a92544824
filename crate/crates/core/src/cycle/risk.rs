//! Negative part of the classical risk process over a finite horizon.

use crate::dist::DistributionSpec;
use crate::rng::RandomStream;

/// `∫_0^horizon S(u) 1{S(u) < 0} du` for `S(t) = v + c t - Σ_{i <= N(t)} claims`,
/// claims arriving as a Poisson process of rate `claim_rate`. Always `<= 0`.
pub fn risk_negative_part_integral(
    v: f64,
    c: f64,
    claim_rate: f64,
    claim: &DistributionSpec,
    horizon: f64,
    rng: &mut RandomStream,
) -> f64 {
    let mut claims = Vec::new();
    let mut t = rng.exp1() / claim_rate;
    while t < horizon {
        claims.push((t, claim.sample(rng)));
        t += rng.exp1() / claim_rate;
    }
    negative_part_integral(v, c, &claims, horizon)
}

/// Same integral for a given list of `(time, size)` claims sorted by time.
pub fn negative_part_integral(v: f64, c: f64, claims: &[(f64, f64)], horizon: f64) -> f64 {
    let mut level = v;
    let mut t = 0.0;
    let mut total = 0.0;
    for &(at, size) in claims.iter().take_while(|(at, _)| *at < horizon) {
        total += linear_negative_part(level, c, at - t);
        level += c * (at - t) - size;
        t = at;
    }
    total + linear_negative_part(level, c, horizon - t)
}

/// `∫_0^d min(s0 + c u, 0) du` for non-negative slope `c`.
fn linear_negative_part(s0: f64, c: f64, d: f64) -> f64 {
    if s0 >= 0.0 || d <= 0.0 {
        return 0.0;
    }
    let until_zero = if c > 0.0 { -s0 / c } else { f64::INFINITY };
    let span = d.min(until_zero);
    s0 * span + 0.5 * c * span * span
}
