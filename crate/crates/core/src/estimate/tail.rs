//! Empirical survival curves with confidence intervals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::sample::{map_chunks, Column, CycleSample, Quantity};
use crate::asymptotics::CurveName;
use crate::cycle::{CycleRecord, CycleSimulator, QueueParams, TiltPlan};
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Exceedance count below which ratio points are flagged low-confidence.
pub const CONFIDENT_COUNT: u64 = 200;

/// Effective sample size below which weighted points carry a warning.
pub const MIN_ESS: f64 = 100.0;

/// 95% Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k >= n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) || n < 2 {
        return Err(Error::DomainError(format!(
            "log grid needs 0 < lo < hi and n >= 2, got lo = {lo}, hi = {hi}, n = {n}"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect();
    g[0] = lo;
    g[n - 1] = hi;
    Ok(g)
}

/// Weighted `q`-quantile: smallest value whose cumulative weight reaches `q`.
pub fn weighted_quantile(values: &[f64], weights: Option<&[f64]>, q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_unstable_by(|&a, &b| values[a].total_cmp(&values[b]));
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = idx.iter().map(|&i| w(i)).sum();
    let target = q * total;
    let mut acc = 0.0;
    for &i in &idx {
        acc += w(i);
        if acc >= target {
            return Ok(values[i]);
        }
    }
    Ok(values[*idx.last().unwrap()])
}

/// 40 log-spaced points between the weighted 50th and 99.99th percentiles.
pub fn default_grid(values: &[f64], weights: Option<&[f64]>) -> Result<Vec<f64>> {
    let lo = weighted_quantile(values, weights, 0.5)?;
    let hi = weighted_quantile(values, weights, 0.9999)?;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::DegenerateSample(format!(
            "percentiles do not span a log grid: median {lo}, 99.99th {hi}"
        )));
    }
    log_grid(lo, hi, 40)
}

/// Survival estimate on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub quantity: Quantity,
    pub digest: String,
    pub grid: Vec<f64>,
    /// Levels at which the quantity was actually evaluated, when they differ from `grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapped: Option<MappedLevels>,
    pub p_hat: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    pub exceed_count: Vec<u64>,
    pub n_cycles: u64,
    pub n_censored: u64,
    pub weighted: bool,
    /// Some censored cycle stopped at or below this level, so `p_hat` may be low.
    pub biased_low: Vec<bool>,
    /// Effective sample size of the exceedances (weighted estimates only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ess: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedLevels {
    pub curve: CurveName,
    pub levels: Vec<f64>,
}

impl TailEstimate {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Points with at least [`CONFIDENT_COUNT`] exceedances and no censoring bias.
    pub fn confident(&self, j: usize) -> bool {
        self.exceed_count[j] >= CONFIDENT_COUNT && !self.biased_low[j]
    }

    fn check_invariants(&self) {
        for j in 0..self.len() {
            assert!(self.ci_lo[j] <= self.p_hat[j] && self.p_hat[j] <= self.ci_hi[j]);
            if j > 0 {
                assert!(self.grid[j] > self.grid[j - 1]);
                assert!(self.p_hat[j] <= self.p_hat[j - 1]);
                assert!(self.exceed_count[j] <= self.exceed_count[j - 1]);
            }
        }
    }

    /// CSV with a `#`-prefixed JSON metadata block.
    pub fn to_csv(&self, meta: &serde_json::Value) -> String {
        let header = serde_json::json!({
            "quantity": self.quantity,
            "label": self.quantity.label(),
            "digest": self.digest,
            "n_cycles": self.n_cycles,
            "n_censored": self.n_censored,
            "weighted": self.weighted,
            "mapped_curve": self.mapped.as_ref().map(|m| m.curve),
            "warnings": self.warnings,
            "meta": meta,
        });
        let mut out = String::new();
        for line in serde_json::to_string_pretty(&header).unwrap_or_default().lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("x,level,p_hat,ci_lo,ci_hi,exceed_count,biased_low,ess\n");
        for j in 0..self.len() {
            let level = self.mapped.as_ref().map_or(self.grid[j], |m| m.levels[j]);
            let ess = self.ess.as_ref().map_or(String::new(), |e| e[j].to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.grid[j],
                level,
                self.p_hat[j],
                self.ci_lo[j],
                self.ci_hi[j],
                self.exceed_count[j],
                self.biased_low[j],
                ess
            );
        }
        out
    }
}

/// Streaming exceedance counter for one quantity on a fixed grid.
///
/// Per-cycle cost is one binary search; merging is a vector sum, so the
/// result is independent of how cycles are partitioned as long as partial
/// accumulators are merged in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct TailAccumulator {
    quantity: Quantity,
    column: Column,
    grid: Vec<f64>,
    /// Histograms over "number of grid points strictly below the value".
    count: Vec<u64>,
    w: Vec<f64>,
    w2: Vec<f64>,
    n: u64,
    n_censored: u64,
    total_w: f64,
    total_w2: f64,
    weighted: bool,
    min_censored: f64,
}

impl TailAccumulator {
    pub fn new(params: &QueueParams, quantity: Quantity, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::DomainError(
                "tail grid must be non-empty and strictly increasing".into(),
            ));
        }
        let column = quantity.resolve(params)?;
        let m = grid.len() + 1;
        Ok(Self {
            quantity,
            column,
            grid,
            count: vec![0; m],
            w: vec![0.0; m],
            w2: vec![0.0; m],
            n: 0,
            n_censored: 0,
            total_w: 0.0,
            total_w2: 0.0,
            weighted: false,
            min_censored: f64::INFINITY,
        })
    }

    #[inline]
    pub fn add(&mut self, value: f64, weight: f64, censored: bool) {
        let bin = self.grid.partition_point(|&g| g < value);
        self.count[bin] += 1;
        self.w[bin] += weight;
        self.w2[bin] += weight * weight;
        self.n += 1;
        self.total_w += weight;
        self.total_w2 += weight * weight;
        if weight != 1.0 {
            self.weighted = true;
        }
        if censored {
            self.n_censored += 1;
            self.min_censored = self.min_censored.min(value);
        }
    }

    #[inline]
    pub fn add_record(&mut self, r: &CycleRecord) {
        self.add(self.column.of(r), r.weight, r.censored.is_some());
    }

    pub fn merge(&mut self, other: &TailAccumulator) {
        assert_eq!(self.grid, other.grid, "merging accumulators on different grids");
        for b in 0..self.count.len() {
            self.count[b] += other.count[b];
            self.w[b] += other.w[b];
            self.w2[b] += other.w2[b];
        }
        self.n += other.n;
        self.n_censored += other.n_censored;
        self.total_w += other.total_w;
        self.total_w2 += other.total_w2;
        self.weighted |= other.weighted;
        self.min_censored = self.min_censored.min(other.min_censored);
    }

    pub fn finish(&self, digest: &str) -> Result<TailEstimate> {
        if self.n == 0 {
            return Err(Error::EmptySample);
        }
        let m = self.grid.len();
        let (mut p_hat, mut ci_lo, mut ci_hi) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut exceed_count = vec![0u64; m];
        let mut ess = vec![0.0; m];
        let (mut c, mut w, mut w2) = (0u64, 0.0f64, 0.0f64);
        for j in (0..m).rev() {
            c += self.count[j + 1];
            w += self.w[j + 1];
            w2 += self.w2[j + 1];
            exceed_count[j] = c;
            if self.weighted {
                let p = (w / self.total_w).clamp(0.0, 1.0);
                let var =
                    ((1.0 - p).powi(2) * w2 + p * p * (self.total_w2 - w2)).max(0.0) / (self.total_w * self.total_w);
                let half = Z95 * var.sqrt();
                p_hat[j] = p;
                ci_lo[j] = (p - half).max(0.0);
                ci_hi[j] = (p + half).min(1.0);
                ess[j] = if w2 > 0.0 { w * w / w2 } else { 0.0 };
            } else {
                p_hat[j] = c as f64 / self.n as f64;
                let (lo, hi) = wilson_interval(c, self.n);
                ci_lo[j] = lo.min(p_hat[j]);
                ci_hi[j] = hi.max(p_hat[j]);
            }
        }
        // Self-normalised sums can wobble by rounding; enforce the ordering exactly.
        for j in 1..m {
            if p_hat[j] > p_hat[j - 1] {
                p_hat[j] = p_hat[j - 1];
                ci_lo[j] = ci_lo[j].min(p_hat[j]);
            }
        }
        let biased_low = self.grid.iter().map(|&x| self.min_censored <= x).collect();
        let mut warnings = Vec::new();
        if self.weighted {
            let low: Vec<String> = (0..m)
                .filter(|&j| exceed_count[j] > 0 && ess[j] < MIN_ESS)
                .map(|j| format!("{}", self.grid[j]))
                .collect();
            if !low.is_empty() {
                warnings.push(format!(
                    "effective sample size below {MIN_ESS} at x = {}",
                    low.join(", ")
                ));
            }
        }
        let est = TailEstimate {
            quantity: self.quantity,
            digest: digest.to_string(),
            grid: self.grid.clone(),
            mapped: None,
            p_hat,
            ci_lo,
            ci_hi,
            exceed_count,
            n_cycles: self.n,
            n_censored: self.n_censored,
            weighted: self.weighted,
            biased_low,
            ess: self.weighted.then_some(ess),
            warnings,
        };
        est.check_invariants();
        Ok(est)
    }
}

/// `p̂(x) = Σ w 1{value > x} / Σ w` on `grid`.
///
/// Censored cycles contribute their recorded lower bound, so they count as
/// exceedances only below it; grid points at or above the smallest censored
/// bound are flagged `biased_low`.
pub fn empirical_tail(sample: &CycleSample, quantity: Quantity, grid: &[f64]) -> Result<TailEstimate> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let params = sample.params();
    let mut acc = TailAccumulator::new(params, quantity, grid.to_vec())?;
    let col = sample.column(acc.column);
    for i in 0..sample.len() {
        acc.add(col.get(i), sample.weight_at(i), sample.censored[i].is_some());
    }
    acc.finish(&params.digest())
}

/// Empirical tail on the default grid of the quantity's own sample.
pub fn empirical_tail_default(sample: &CycleSample, quantity: Quantity) -> Result<TailEstimate> {
    let values = sample.values(&quantity)?;
    let grid = default_grid(&values, sample.weight.as_deref())?;
    empirical_tail(sample, quantity, &grid)
}

/// Tail of `quantity` evaluated at the busy-period level that `curve` maps each
/// grid point to; reported on the original grid.
pub fn mapped_tail(sample: &CycleSample, quantity: Quantity, curve: CurveName, grid: &[f64]) -> Result<TailEstimate> {
    let params = sample.params();
    let levels = grid
        .iter()
        .map(|&x| {
            curve
                .threshold(params, x)
                .unwrap_or_else(|| Err(Error::DomainError(format!("{} is not a threshold map", curve.label()))))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut est = empirical_tail(sample, quantity, &levels)?;
    est.grid = grid.to_vec();
    est.mapped = Some(MappedLevels { curve, levels });
    Ok(est)
}

/// Streams `n` cycles through one accumulator per `(quantity, grid)` target
/// without storing them. Uses the current rayon pool.
pub fn stream_tails(
    params: &QueueParams,
    tilt: Option<TiltPlan>,
    n: u64,
    master_seed: u64,
    targets: &[(Quantity, Vec<f64>)],
) -> Result<Vec<TailEstimate>> {
    params.validate()?;
    if n == 0 {
        return Err(Error::DomainError("number of cycles must be at least 1".into()));
    }
    let template = targets
        .iter()
        .map(|(q, g)| TailAccumulator::new(params, *q, g.clone()))
        .collect::<Result<Vec<_>>>()?;
    let parts = map_chunks(n, master_seed, |rng, count| {
        let mut accs = template.clone();
        let mut sim = match tilt {
            Some(plan) => CycleSimulator::with_tilt(params, plan),
            None => CycleSimulator::new(params),
        };
        for _ in 0..count {
            let r = sim.run(rng);
            for a in accs.iter_mut() {
                a.add_record(&r);
            }
        }
        accs
    });
    let mut total = template;
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    let digest = params.digest();
    total.iter().map(|a| a.finish(&digest)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cycle::{CycleCaps, FunctionalSpec};
    use crate::estimate::sample::run_cycles;

    fn sample_from(values: &[f64]) -> CycleSample {
        let params = QueueParams::mm1(0.5, 1.0);
        let mut s = CycleSample::new(&params);
        s.tau = values.to_vec();
        s.n_customers = vec![1; values.len()];
        s.max_queue = vec![1; values.len()];
        s.max_workload = values.to_vec();
        s.sojourn_sum = values.to_vec();
        s.censored = vec![None; values.len()];
        s
    }

    #[test]
    fn simple_proportion() {
        let s = sample_from(&[1.0, 2.0, 3.0, 4.0]);
        let e = empirical_tail(&s, Quantity::Tau, &[0.5, 2.5]).unwrap();
        assert_eq!(e.p_hat, vec![1.0, 0.5]);
        assert_eq!(e.exceed_count, vec![4, 2]);
        assert!(!e.weighted);
    }

    #[test]
    fn wilson_hand_computed() {
        let (lo, hi) = wilson_interval(10, 100);
        assert!((lo - 0.055).abs() < 1e-3 && (hi - 0.174).abs() < 1e-3, "{lo} {hi}");
        assert!((lo - 0.05523).abs() < 1e-5 && (hi - 0.17437).abs() < 1e-5);
        assert_eq!(wilson_interval(0, 10).0, 0.0);
        assert_eq!(wilson_interval(10, 10).1, 1.0);
    }

    #[test]
    fn strict_exceedance_at_ties() {
        let s = sample_from(&[1.0, 2.0, 2.0, 3.0]);
        let e = empirical_tail(&s, Quantity::Tau, &[2.0]).unwrap();
        assert_eq!(e.exceed_count, vec![1]);
    }

    #[test]
    fn censored_bounds_flag_bias() {
        let mut s = sample_from(&[1.0, 2.0, 5.0, 4.0]);
        s.censored[2] = Some(crate::cycle::CensorCause::MaxTime);
        let e = empirical_tail(&s, Quantity::Tau, &[3.0, 4.5, 6.0]).unwrap();
        assert_eq!(e.exceed_count, vec![2, 1, 0]);
        assert_eq!(e.biased_low, vec![false, false, true]);
        assert_eq!(e.n_censored, 1);
    }

    #[test]
    fn weighted_estimate_is_self_normalised() {
        let mut s = sample_from(&[1.0, 2.0, 3.0, 4.0]);
        s.weight = Some(vec![1.0, 1.0, 2.0, 0.5]);
        let e = empirical_tail(&s, Quantity::Tau, &[2.5]).unwrap();
        assert!((e.p_hat[0] - 2.5 / 4.5).abs() < 1e-15);
        assert!(e.weighted);
        let ess = e.ess.as_ref().unwrap()[0];
        assert!((ess - 2.5 * 2.5 / 4.25).abs() < 1e-12);
        assert!(!e.warnings.is_empty());
    }

    #[test]
    fn errors() {
        let s = CycleSample::new(&QueueParams::mm1(0.5, 1.0));
        assert_eq!(empirical_tail(&s, Quantity::Tau, &[1.0]), Err(Error::EmptySample));
        let s = sample_from(&[1.0]);
        assert!(empirical_tail(&s, Quantity::Tau, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn grids() {
        let g = log_grid(1.0, 100.0, 3).unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        let v: Vec<f64> = (1..=10_000).map(|i| i as f64).collect();
        assert_eq!(weighted_quantile(&v, None, 0.5).unwrap(), 5000.0);
        let g = default_grid(&v, None).unwrap();
        assert_eq!(g.len(), 40);
        assert_eq!(g[0], 5000.0);
        assert_eq!(g[39], 9999.0);
        assert!(default_grid(&[1.0; 10], None).is_err());
    }

    #[test]
    fn stream_matches_stored_sample() {
        let params = QueueParams::mm1(0.5, 1.0).with_functionals(vec![FunctionalSpec::queue_area()]);
        let grid = log_grid(0.5, 50.0, 12).unwrap();
        let q = Quantity::area(FunctionalSpec::queue_area());
        let stored = run_cycles(&params, 20_000, 9).unwrap();
        let a = empirical_tail(&stored, q, &grid).unwrap();
        let b = stream_tails(&params, None, 20_000, 9, &[(q, grid.clone())]).unwrap();
        assert_eq!(a, b[0]);
    }

    #[test]
    fn larger_caps_do_not_lower_confident_points() {
        let base = QueueParams::mm1(1.0, 1.0).with_functionals(vec![FunctionalSpec::queue_area()]);
        let q = Quantity::area(FunctionalSpec::queue_area());
        let grid = log_grid(1.0, 1e4, 20).unwrap();
        let small = stream_tails(
            &base.clone().with_caps(CycleCaps::customers(100)),
            None,
            20_000,
            4,
            &[(q, grid.clone())],
        )
        .unwrap()
        .remove(0);
        let large = stream_tails(
            &base.with_caps(CycleCaps::customers(10_000)),
            None,
            20_000,
            4,
            &[(q, grid)],
        )
        .unwrap()
        .remove(0);
        for j in 0..small.len() {
            if small.confident(j) {
                let width = small.ci_hi[j] - small.ci_lo[j];
                assert!(large.p_hat[j] >= small.p_hat[j] - width);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn estimate_invariants(values in proptest::collection::vec(0.0f64..100.0, 1..200),
                               weights in proptest::collection::vec(0.01f64..10.0, 200)) {
            let mut s = sample_from(&values);
            s.weight = Some(weights[..values.len()].to_vec());
            let grid = log_grid(0.1, 120.0, 25).unwrap();
            let e = empirical_tail(&s, Quantity::Tau, &grid).unwrap();
            for j in 0..e.len() {
                proptest::prop_assert!(e.ci_lo[j] <= e.p_hat[j] && e.p_hat[j] <= e.ci_hi[j]);
                proptest::prop_assert!(e.p_hat[j] >= 0.0 && e.p_hat[j] <= 1.0);
                if j > 0 {
                    proptest::prop_assert!(e.p_hat[j] <= e.p_hat[j - 1]);
                    proptest::prop_assert!(e.exceed_count[j] <= e.exceed_count[j - 1]);
                }
            }
        }
    }
}
