//! Joint area tails of two queues fed by the same arrivals.

use serde::{Deserialize, Serialize};

use super::sample::map_chunks;
use super::tail::wilson_interval;
use crate::cycle::{simulate_bivariate_cycle, FunctionalSpec, QueueParams};
use crate::error::{Error, Result};

/// Areas of both servers on `[0, tau_min]`, one row per cycle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BivariateSample {
    pub params: Option<QueueParams>,
    /// Server one works `b` times longer on every customer.
    pub b: f64,
    pub tau_min: Vec<f64>,
    /// `first[f][i]`: functional `f` of server one in cycle `i`.
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    pub censored: Vec<bool>,
}

impl BivariateSample {
    pub fn len(&self) -> usize {
        self.tau_min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_min.is_empty()
    }

    fn empty(params: &QueueParams, b: f64) -> Self {
        let m = params.functionals.len();
        Self {
            params: Some(params.clone()),
            b,
            first: vec![Vec::new(); m],
            second: vec![Vec::new(); m],
            ..Self::default()
        }
    }
}

/// Simulates `n` bivariate cycles on the current rayon pool.
pub fn run_bivariate(params: &QueueParams, b: f64, n: u64, master_seed: u64) -> Result<BivariateSample> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::DomainError(format!("service ratio b must be positive, got {b}")));
    }
    let errs = params.violations();
    let scaled_rho = params.rho() * b;
    if !errs.is_empty() {
        return Err(Error::InvalidParams(errs));
    }
    if scaled_rho >= 1.0 && !params.caps.is_bounded() {
        return Err(Error::InvalidParams(vec![format!(
            "CycleCaps: server one has rho = {scaled_rho} >= 1 and needs max_customers or max_time"
        )]));
    }
    if n == 0 {
        return Err(Error::DomainError("number of cycles must be at least 1".into()));
    }
    let parts = map_chunks(n, master_seed, |rng, count| {
        let mut part = BivariateSample::empty(params, b);
        for _ in 0..count {
            let (one, two) = simulate_bivariate_cycle(params, b, rng);
            part.tau_min.push(one.tau);
            for (col, a) in part.first.iter_mut().zip(&one.areas) {
                col.push(*a);
            }
            for (col, a) in part.second.iter_mut().zip(&two.areas) {
                col.push(*a);
            }
            part.censored.push(one.censored.is_some());
        }
        part
    });
    let mut out = BivariateSample::empty(params, b);
    for p in parts {
        out.tau_min.extend(p.tau_min);
        for (c, o) in out.first.iter_mut().zip(p.first) {
            c.extend(o);
        }
        for (c, o) in out.second.iter_mut().zip(p.second) {
            c.extend(o);
        }
        out.censored.extend(p.censored);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointTail {
    pub x: f64,
    pub a: f64,
    /// `P̂(A_1 > x, A_2 > a x)`.
    pub p: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub count: u64,
    pub n: u64,
    pub marginal_first: f64,
    pub marginal_second: f64,
}

/// Joint exceedance of functional `functional` by server one above `x` and
/// server two above `a x`, with a Wilson interval.
pub fn joint_tail(sample: &BivariateSample, functional: &FunctionalSpec, x: f64, a: f64) -> Result<JointTail> {
    if !(a >= 0.0) {
        return Err(Error::DomainError(format!("a must be >= 0, got {a}")));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let params = sample.params.as_ref().expect("sample carries its parameters");
    let f = params
        .functional_index(functional)
        .ok_or_else(|| Error::DomainError(format!("functional {} was not simulated", functional.id())))?;
    let (one, two) = (&sample.first[f], &sample.second[f]);
    let (mut joint, mut m1, mut m2) = (0u64, 0u64, 0u64);
    for i in 0..sample.len() {
        let e1 = one[i] > x;
        let e2 = two[i] > a * x;
        m1 += e1 as u64;
        m2 += e2 as u64;
        joint += (e1 && e2) as u64;
    }
    assert!(joint <= m1.min(m2));
    let n = sample.len() as u64;
    let (ci_lo, ci_hi) = wilson_interval(joint, n);
    Ok(JointTail {
        x,
        a,
        p: joint as f64 / n as f64,
        ci_lo,
        ci_hi,
        count: joint,
        n,
        marginal_first: m1 as f64 / n as f64,
        marginal_second: m2 as f64 / n as f64,
    })
}
