use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};

/// Process under the integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    /// Queue length, number of customers in the system.
    Q,
    /// Workload, unfinished work.
    W,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Q => f.write_str("Q"),
            Target::W => f.write_str("W"),
        }
    }
}

/// The functional `∫ e^{-theta u} X(u)^k du` over a busy cycle, `X` being `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    pub k: f64,
    #[serde(default)]
    pub theta: f64,
    pub target: Target,
}

impl FunctionalSpec {
    pub const fn new(target: Target, k: f64, theta: f64) -> Self {
        Self { k, theta, target }
    }

    /// Plain area under the queue length.
    pub const fn queue_area() -> Self {
        Self::new(Target::Q, 1.0, 0.0)
    }

    /// Plain area under the workload.
    pub const fn workload_area() -> Self {
        Self::new(Target::W, 1.0, 0.0)
    }

    pub fn is_plain_area(&self) -> bool {
        self.k == 1.0 && self.theta == 0.0
    }

    /// Column identifier, e.g. `W_k1_theta0`.
    pub fn id(&self) -> String {
        format!("{}_k{}_theta{}", self.target, self.k, self.theta)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.k.is_finite() && self.k >= 0.0) {
            errs.push(format!("functional {}: k must be finite and >= 0", self.id()));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            errs.push(format!("functional {}: theta must be finite and >= 0", self.id()));
        }
        errs
    }
}

/// Why a cycle stopped before the queue emptied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CensorCause {
    MaxCustomers,
    MaxTime,
    /// Every requested functional passed `early_stop_threshold`.
    EarlyStop,
}

/// Limits on a single cycle. Censored cycles keep exact lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleCaps {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_customers: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop_threshold: Option<f64>,
}

impl CycleCaps {
    pub fn customers(max_customers: u64) -> Self {
        Self {
            max_customers: Some(max_customers),
            ..Self::default()
        }
    }

    /// True when some cap bounds the length of every cycle.
    pub fn is_bounded(&self) -> bool {
        self.max_customers.is_some() || self.max_time.is_some()
    }

    pub(crate) fn customer_limit(&self) -> u64 {
        self.max_customers.unwrap_or(u64::MAX)
    }

    pub(crate) fn time_limit(&self) -> f64 {
        self.max_time.unwrap_or(f64::INFINITY)
    }
}

/// Which cycles keep their event-epoch trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PathCapture {
    #[default]
    Off,
    All,
    /// Keep the path only when functional `functional` ends above `level`.
    AreaAbove {
        functional: usize,
        level: f64,
    },
}

/// Stability regime of the queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Stable,
    Critical,
    Transient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueParams {
    pub interarrival: DistributionSpec,
    pub service: DistributionSpec,
    #[serde(default)]
    pub functionals: Vec<FunctionalSpec>,
    #[serde(default)]
    pub caps: CycleCaps,
    #[serde(default, skip_serializing_if = "is_off")]
    pub path_capture: PathCapture,
}

fn is_off(p: &PathCapture) -> bool {
    *p == PathCapture::Off
}

impl QueueParams {
    pub fn new(interarrival: DistributionSpec, service: DistributionSpec) -> Self {
        Self {
            interarrival,
            service,
            functionals: Vec::new(),
            caps: CycleCaps::default(),
            path_capture: PathCapture::Off,
        }
    }

    /// M/M/1 with arrival rate `lambda` and service rate `mu`.
    pub fn mm1(lambda: f64, mu: f64) -> Self {
        Self::new(
            DistributionSpec::Exponential { rate: lambda },
            DistributionSpec::Exponential { rate: mu },
        )
    }

    pub fn with_functionals(mut self, functionals: Vec<FunctionalSpec>) -> Self {
        self.functionals = functionals;
        self
    }

    pub fn with_caps(mut self, caps: CycleCaps) -> Self {
        self.caps = caps;
        self
    }

    pub fn with_path_capture(mut self, capture: PathCapture) -> Self {
        self.path_capture = capture;
        self
    }

    pub fn lambda_t(&self) -> f64 {
        1.0 / self.interarrival.mean()
    }

    pub fn lambda_s(&self) -> f64 {
        1.0 / self.service.mean()
    }

    pub fn rho(&self) -> f64 {
        self.service.mean() / self.interarrival.mean()
    }

    pub fn regime(&self) -> Regime {
        let rho = self.rho();
        if (rho - 1.0).abs() < 1e-12 {
            Regime::Critical
        } else if rho < 1.0 {
            Regime::Stable
        } else {
            Regime::Transient
        }
    }

    /// Index of `f` in the functional list.
    pub fn functional_index(&self, f: &FunctionalSpec) -> Option<usize> {
        self.functionals.iter().position(|g| g == f)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for e in self.interarrival.violations() {
            errs.push(format!("interarrival: {e}"));
        }
        for e in self.service.violations() {
            errs.push(format!("service: {e}"));
        }
        for f in &self.functionals {
            errs.extend(f.violations());
        }
        if let Some(m) = self.caps.max_customers {
            if m == 0 {
                errs.push("CycleCaps: max_customers must be positive".into());
            }
        }
        if let Some(t) = self.caps.max_time {
            if !(t.is_finite() && t > 0.0) {
                errs.push("CycleCaps: max_time must be finite and positive".into());
            }
        }
        if let Some(x) = self.caps.early_stop_threshold {
            if !x.is_finite() || x <= 0.0 {
                errs.push("CycleCaps: early_stop_threshold must be finite and positive".into());
            }
            if self.functionals.is_empty() {
                errs.push("CycleCaps: early_stop_threshold needs at least one functional".into());
            }
        }
        if errs.is_empty() && self.regime() != Regime::Stable && !self.caps.is_bounded() {
            errs.push(format!(
                "CycleCaps: rho = {} >= 1 requires max_customers or max_time",
                self.rho()
            ));
        }
        if let PathCapture::AreaAbove { functional, .. } = self.path_capture {
            if functional >= self.functionals.len() {
                errs.push(format!("path_capture: functional index {functional} out of range"));
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(errs))
        }
    }

    /// Short content hash of the laws and functionals, used to pair estimates with curves.
    pub fn digest(&self) -> String {
        let key = serde_json::json!({
            "interarrival": self.interarrival,
            "service": self.service,
        });
        let hash = Sha256::digest(key.to_string().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
