//! Parametric laws for interarrival and service times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::rng::RandomStream;

/// Law of an interarrival time `T` or a service time `S`.
///
/// Serialized with an internal `family` tag, e.g.
/// `{"family": "pareto", "alpha": 2.5, "scale": 0.6}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistributionSpec {
    Exponential {
        rate: f64,
    },
    /// Survival `(scale / t)^alpha` for `t >= scale`.
    Pareto {
        alpha: f64,
        scale: f64,
    },
    Lognormal {
        mu: f64,
        sigma: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    Deterministic {
        value: f64,
    },
    Erlang {
        shape: u32,
        rate: f64,
    },
}

/// Coarse tail classification used to decide which asymptotic results apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag")]
pub enum TailClass {
    LightTailed,
    RegularlyVarying { alpha: f64 },
    SubexponentialOther,
}

impl TailClass {
    pub fn is_subexponential(&self) -> bool {
        !matches!(self, TailClass::LightTailed)
    }
}

fn positive(name: &str, v: f64, errs: &mut Vec<String>) {
    if !(v.is_finite() && v > 0.0) {
        errs.push(format!("{name} must be finite and > 0, got {v}"));
    }
}

impl DistributionSpec {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Pareto { .. } => "pareto",
            Self::Lognormal { .. } => "lognormal",
            Self::Weibull { .. } => "weibull",
            Self::Deterministic { .. } => "deterministic",
            Self::Erlang { .. } => "erlang",
        }
    }

    /// Lists every violated parameter constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        match *self {
            Self::Exponential { rate } => positive("exponential rate", rate, &mut errs),
            Self::Pareto { alpha, scale } => {
                positive("pareto scale", scale, &mut errs);
                if !(alpha.is_finite() && alpha > 1.0) {
                    errs.push(format!("pareto alpha must exceed 1 for a finite mean, got {alpha}"));
                }
            }
            Self::Lognormal { mu, sigma } => {
                if !mu.is_finite() {
                    errs.push(format!("lognormal mu must be finite, got {mu}"));
                }
                positive("lognormal sigma", sigma, &mut errs);
            }
            Self::Weibull { shape, scale } => {
                positive("weibull shape", shape, &mut errs);
                positive("weibull scale", scale, &mut errs);
            }
            Self::Deterministic { value } => positive("deterministic value", value, &mut errs),
            Self::Erlang { shape, rate } => {
                if shape == 0 {
                    errs.push("erlang shape must be a positive integer".into());
                }
                positive("erlang rate", rate, &mut errs);
            }
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(errs.join("; ")))
        }
    }

    /// Draws one strictly positive variate.
    #[inline]
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        match *self {
            Self::Exponential { rate } => rng.exp1() / rate,
            Self::Pareto { alpha, scale } => scale * rng.open01().powf(-1.0 / alpha),
            Self::Lognormal { mu, sigma } => (mu + sigma * rng.std_normal()).exp(),
            Self::Weibull { shape, scale } => scale * rng.exp1().powf(1.0 / shape),
            Self::Deterministic { value } => value,
            Self::Erlang { shape, rate } => (0..shape).map(|_| rng.exp1()).sum::<f64>() / rate,
        }
    }

    /// Tail probability `P(X > t)`.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * t).exp(),
            Self::Pareto { alpha, scale } => {
                if t <= scale {
                    1.0
                } else {
                    (scale / t).powf(alpha)
                }
            }
            Self::Lognormal { mu, sigma } => 0.5 * libm::erfc((t.ln() - mu) / (sigma * std::f64::consts::SQRT_2)),
            Self::Weibull { shape, scale } => (-(t / scale).powf(shape)).exp(),
            Self::Deterministic { value } => {
                if t < value {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Erlang { shape, rate } => {
                let x = rate * t;
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..shape {
                    term *= x / j as f64;
                    sum += term;
                }
                (-x).exp() * sum
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Pareto { alpha, scale } => alpha * scale / (alpha - 1.0),
            Self::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Self::Weibull { shape, scale } => scale * libm::tgamma(1.0 + 1.0 / shape),
            Self::Deterministic { value } => value,
            Self::Erlang { shape, rate } => shape as f64 / rate,
        }
    }

    /// Supremum of the arguments at which the mgf is finite (`+inf` if entire).
    pub fn mgf_abscissa(&self) -> f64 {
        match *self {
            Self::Exponential { rate } | Self::Erlang { rate, .. } => rate,
            Self::Pareto { .. } | Self::Lognormal { .. } => 0.0,
            Self::Weibull { shape, scale } => {
                if shape < 1.0 {
                    0.0
                } else if shape == 1.0 {
                    1.0 / scale
                } else {
                    f64::INFINITY
                }
            }
            Self::Deterministic { .. } => f64::INFINITY,
        }
    }

    /// Moment generating function `E[exp(s X)]`; `+inf` where it diverges.
    ///
    /// Closed forms where they exist, otherwise adaptive quadrature.
    pub fn mgf(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        if s > 0.0 && s >= self.mgf_abscissa() {
            // Weibull{shape=1} and the exponential families diverge at the abscissa itself.
            return f64::INFINITY;
        }
        match *self {
            Self::Exponential { rate } => rate / (rate - s),
            Self::Erlang { shape, rate } => (rate / (rate - s)).powi(shape as i32),
            Self::Deterministic { value } => (s * value).exp(),
            Self::Pareto { alpha, scale } => {
                // x = scale * e^y turns the density into alpha * e^{-alpha y}.
                let upper = 42.0 / alpha;
                let f = |y: f64| (s * scale * y.exp() - alpha * y).exp();
                alpha * quad::adaptive(&f, 0.0, upper, 1e-13)
            }
            Self::Lognormal { mu, sigma } => {
                let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
                let f = |z: f64| norm * (-0.5 * z * z + s * (mu + sigma * z).exp()).exp();
                quad::adaptive(&f, -9.0, 9.0, 1e-13)
            }
            Self::Weibull { shape, scale } => {
                if shape == 1.0 {
                    let rate = 1.0 / scale;
                    return rate / (rate - s);
                }
                // y = (x/scale)^shape turns the law into a unit exponential.
                let log_f = |y: f64| -y + s * scale * y.powf(1.0 / shape);
                let mut upper = 50.0;
                while log_f(upper) > -45.0 && upper < 1e12 {
                    upper *= 2.0;
                }
                let f = |y: f64| log_f(y).exp();
                quad::adaptive(&f, 0.0, upper, 1e-13)
            }
        }
    }

    /// Exponentially tilted law with density proportional to `e^{gamma x} f(x)`.
    pub fn tilt(&self, gamma: f64) -> Result<DistributionSpec> {
        if gamma == 0.0 {
            return Ok(*self);
        }
        if !self.mgf(gamma).is_finite() {
            return Err(Error::TiltOutOfDomain { gamma });
        }
        match *self {
            Self::Exponential { rate } => Ok(Self::Exponential { rate: rate - gamma }),
            Self::Erlang { shape, rate } => Ok(Self::Erlang {
                shape,
                rate: rate - gamma,
            }),
            Self::Deterministic { .. } => Ok(*self),
            other => Err(Error::TiltUnsupported { family: other.family() }),
        }
    }

    pub fn classify_tail(&self) -> TailClass {
        match *self {
            Self::Exponential { .. } | Self::Erlang { .. } | Self::Deterministic { .. } => TailClass::LightTailed,
            Self::Pareto { alpha, .. } => TailClass::RegularlyVarying { alpha },
            Self::Lognormal { .. } => TailClass::SubexponentialOther,
            Self::Weibull { shape, .. } => {
                if shape < 1.0 {
                    TailClass::SubexponentialOther
                } else {
                    TailClass::LightTailed
                }
            }
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Self::Exponential { .. })
            || matches!(self, Self::Weibull { shape, .. } if *shape == 1.0)
            || matches!(self, Self::Erlang { shape: 1, .. })
    }
}
