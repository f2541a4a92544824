//! Average shape of cycles conditioned on a large area.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sample::{CycleSample, Quantity};
use crate::cycle::CyclePath;
use crate::error::{Error, Result};

/// Minimum number of qualifying cycles for a conditional profile.
pub const MIN_QUALIFIERS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathProfile {
    pub n_bins: usize,
    pub n_paths: usize,
    /// Bin midpoints in `(0, 1)`.
    pub s: Vec<f64>,
    /// Mean normalised queue length, scaled so the peak is one.
    pub q_bar: Vec<f64>,
    pub peak_fraction: f64,
    /// Largest positive second difference of `q_bar`.
    pub concavity_defect: f64,
    /// Root-mean-square distance to the best triangle through `(0,0)`, `(s, h)`, `(1,0)`.
    pub triangle_distance: f64,
    pub triangle_peak: [f64; 2],
}

impl PathProfile {
    /// `s,q_bar` rows after a `#`-prefixed JSON diagnostics block.
    pub fn to_csv(&self, meta: &serde_json::Value) -> String {
        let diag = serde_json::json!({
            "n_bins": self.n_bins,
            "n_paths": self.n_paths,
            "peak_fraction": self.peak_fraction,
            "concavity_defect": self.concavity_defect,
            "triangle_distance": self.triangle_distance,
            "triangle_peak": self.triangle_peak,
            "meta": meta,
        });
        let mut out = String::new();
        for line in serde_json::to_string_pretty(&diag).unwrap_or_default().lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("s,q_bar\n");
        for (s, q) in self.s.iter().zip(&self.q_bar) {
            let _ = writeln!(out, "{s},{q}");
        }
        out
    }
}

fn triangle(s: f64, peak: f64) -> f64 {
    if s <= peak {
        s / peak
    } else {
        (1.0 - s) / (1.0 - peak)
    }
}

/// Best height for a unit triangle peaking at `peak`, and the residual sum of squares.
fn triangle_fit(s: &[f64], q: &[f64], peak: f64) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for (si, qi) in s.iter().zip(q) {
        let b = triangle(*si, peak);
        num += b * qi;
        den += b * b;
    }
    let h = num / den;
    let rss = s
        .iter()
        .zip(q)
        .map(|(si, qi)| (qi - h * triangle(*si, peak)).powi(2))
        .sum();
    (h, rss)
}

fn best_triangle(s: &[f64], q: &[f64]) -> (f64, f64, f64) {
    let steps = 2000;
    let mut best = (0.5, 0.0, f64::INFINITY);
    for i in 1..steps {
        let peak = i as f64 / steps as f64;
        let (h, rss) = triangle_fit(s, q, peak);
        if rss < best.2 {
            best = (peak, h, rss);
        }
    }
    // Golden-section refinement around the best grid point.
    let (mut a, mut b) = (
        (best.0 - 1.0 / steps as f64).max(1e-9),
        (best.0 + 1.0 / steps as f64).min(1.0 - 1e-9),
    );
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if triangle_fit(s, q, c).1 < triangle_fit(s, q, d).1 {
            b = d;
        } else {
            a = c;
        }
    }
    let peak = 0.5 * (a + b);
    let (h, rss) = triangle_fit(s, q, peak);
    if rss < best.2 {
        (peak, h, rss)
    } else {
        best
    }
}

/// Profile of the given paths: each rescaled to `[0, 1]` in time, sampled at
/// bin midpoints, divided by its own maximum, averaged and peak-normalised.
pub fn profile_from_paths(paths: &[&CyclePath], n_bins: usize) -> Result<PathProfile> {
    if n_bins < 3 {
        return Err(Error::DomainError(format!(
            "profile needs at least 3 bins, got {n_bins}"
        )));
    }
    if paths.is_empty() {
        return Err(Error::TooFewQualifiers { found: 0, needed: 1 });
    }
    let s: Vec<f64> = (0..n_bins).map(|i| (i as f64 + 0.5) / n_bins as f64).collect();
    let mut q_bar = vec![0.0; n_bins];
    for p in paths {
        let tau = *p
            .times
            .last()
            .ok_or_else(|| Error::DegenerateSample("empty path".into()))?;
        let peak = p.queue.iter().copied().max().unwrap_or(0) as f64;
        if !(tau > 0.0 && peak > 0.0) {
            return Err(Error::DegenerateSample("path without a busy interval".into()));
        }
        for (acc, si) in q_bar.iter_mut().zip(&s) {
            *acc += p.queue_at(si * tau) as f64 / peak;
        }
    }
    let top = q_bar.iter().cloned().fold(0.0, f64::max);
    for v in q_bar.iter_mut() {
        *v /= top;
    }
    let arg = q_bar
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > q_bar[best] { i } else { best });
    let concavity_defect = q_bar.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(0.0, f64::max);
    let (tp, th, rss) = best_triangle(&s, &q_bar);
    Ok(PathProfile {
        n_bins,
        n_paths: paths.len(),
        peak_fraction: s[arg],
        concavity_defect,
        triangle_distance: (rss / n_bins as f64).sqrt(),
        triangle_peak: [tp, th],
        s,
        q_bar,
    })
}

/// Profile of the captured uncensored cycles whose `quantity` exceeds `x_level`.
pub fn conditional_path_profile(
    sample: &CycleSample,
    quantity: Quantity,
    x_level: f64,
    n_bins: usize,
) -> Result<PathProfile> {
    let values = sample.values(&quantity)?;
    let paths: Vec<&CyclePath> = sample
        .paths
        .iter()
        .filter(|(i, _)| sample.censored[*i].is_none() && values[*i] > x_level)
        .map(|(_, p)| p)
        .collect();
    if paths.len() < MIN_QUALIFIERS {
        return Err(Error::TooFewQualifiers {
            found: paths.len(),
            needed: MIN_QUALIFIERS,
        });
    }
    profile_from_paths(&paths, n_bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::{replay_cycle, FunctionalSpec, PathCapture, QueueParams};
    use crate::estimate::sample::run_cycles;

    /// Deterministic path rising by one per unit time to 50, then falling by one per unit.
    fn triangular() -> CyclePath {
        let queue: Vec<u32> = (0..100u32).map(|t| if t < 50 { t + 1 } else { 99 - t }).collect();
        CyclePath {
            times: (0..100).map(f64::from).collect(),
            workload: vec![0.0; queue.len()],
            queue,
        }
    }

    #[test]
    fn triangular_path_has_small_triangle_distance() {
        let p = triangular();
        let prof = profile_from_paths(&[&p], 50).unwrap();
        assert!(prof.triangle_distance < 0.02, "{}", prof.triangle_distance);
        assert!((prof.peak_fraction - 0.5).abs() < 0.03);
        assert!(prof.q_bar.iter().all(|&q| (0.0..=1.0).contains(&q)));
    }

    #[test]
    fn replayed_path_profile() {
        // Long first service, then the queue drains.
        let f = [FunctionalSpec::queue_area()];
        let r = replay_cycle(&f, &[10.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, 100.0], true);
        let p = r.path.unwrap();
        let prof = profile_from_paths(&[&p], 13).unwrap();
        assert!(prof.peak_fraction > 0.0 && prof.peak_fraction < 1.0);
    }

    #[test]
    fn too_few_qualifiers() {
        let params = QueueParams::mm1(0.5, 1.0)
            .with_functionals(vec![FunctionalSpec::queue_area()])
            .with_path_capture(PathCapture::All);
        let s = run_cycles(&params, 1000, 1).unwrap();
        let q = Quantity::area(FunctionalSpec::queue_area());
        assert!(matches!(
            conditional_path_profile(&s, q, 1e9, 20),
            Err(Error::TooFewQualifiers { found: 0, needed: 30 })
        ));
        let prof = conditional_path_profile(&s, q, 5.0, 20).unwrap();
        assert!(prof.n_paths >= 30);
        assert!(prof.peak_fraction > 0.0 && prof.peak_fraction < 1.0);
    }
}
