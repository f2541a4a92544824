//! Closed-form tail asymptotics, conjectured threshold maps and hypothesis checks.
//!
//! Every probability-valued formula is clamped to `(0, 1]`; points where
//! the raw value exceeds one are marked as outside the asymptotic regime.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cycle::QueueParams;
use crate::dist::{DistributionSpec, TailClass};
use crate::error::{Error, Result};

fn require_stable(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(Error::UnstableRegime { rho })
    }
}

fn require_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("{name} must be positive, got {x}")))
    }
}

fn busy_tail_raw(x: f64, rho: f64, service: &DistributionSpec) -> Result<f64> {
    require_stable(rho)?;
    require_positive("x", x)?;
    Ok(service.survival((1.0 - rho) * x) / (1.0 - rho))
}

/// Subexponential busy-period tail `F̄((1 - rho) x) / (1 - rho)`, clamped to 1.
pub fn busy_tail_heavy(x: f64, rho: f64, service: &DistributionSpec) -> Result<f64> {
    Ok(busy_tail_raw(x, rho, service)?.min(1.0))
}

/// Busy-period level matching queue area `x`: `sqrt(2x / (rho (lambda_S - lambda_T)))`.
pub fn area_q_threshold(x: f64, rho: f64, lambda_t: f64, lambda_s: f64) -> Result<f64> {
    require_stable(rho)?;
    if !(lambda_s > lambda_t) {
        return Err(Error::UnstableRegime { rho });
    }
    require_positive("x", x)?;
    Ok((2.0 * x / (rho * (lambda_s - lambda_t))).sqrt())
}

/// Busy-period level matching workload area `x`: `sqrt(2x / (1 - rho))`.
pub fn area_w_threshold(x: f64, rho: f64) -> Result<f64> {
    require_stable(rho)?;
    require_positive("x", x)?;
    Ok((2.0 * x / (1.0 - rho)).sqrt())
}

/// Level for `∫ W^k`: `((k + 1) x / (1 - rho)^k)^{1/(k+1)}`.
pub fn power_threshold(x: f64, k: f64, rho: f64) -> Result<f64> {
    require_stable(rho)?;
    require_positive("x", x)?;
    if !(k >= 0.0) {
        return Err(Error::DomainError(format!("k must be >= 0, got {k}")));
    }
    if k == 1.0 {
        return area_w_threshold(x, rho);
    }
    Ok(((k + 1.0) * x / (1.0 - rho).powf(k)).powf(1.0 / (k + 1.0)))
}

/// Level for `∫ e^{-theta u} W^k`: `(theta x / (1 - rho)^k)^{1/k}`.
pub fn discounted_threshold(x: f64, k: f64, theta: f64, rho: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::DomainError(format!("discounted threshold needs k > 0, got {k}")));
    }
    require_positive("theta", theta)?;
    require_stable(rho)?;
    require_positive("x", x)?;
    Ok((theta * x / (1.0 - rho).powf(k)).powf(1.0 / k))
}

/// `(1 + rho) ln(1/rho) - 2 (1 - rho)`, positive on (0, 1).
pub fn mm1_psi_radicand(rho: f64) -> Result<f64> {
    require_stable(rho)?;
    let eps = 1.0 - rho;
    if eps < 0.5 {
        // Σ_{m>=3} eps^m (m - 2) / (m (m - 1)): positive terms, no cancellation near rho = 1.
        let mut sum = 0.0;
        let mut pow = eps * eps;
        for m in 3..400 {
            pow *= eps;
            let term = pow * (m - 2) as f64 / (m * (m - 1)) as f64;
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        Ok(sum)
    } else {
        Ok((1.0 + rho) * (-rho.ln()) - 2.0 * eps)
    }
}

/// Decay rate `psi = 2 sqrt((1 + rho) ln(1/rho) - 2 (1 - rho))` of the M/M/1 queue-area tail.
pub fn mm1_psi(rho: f64) -> Result<f64> {
    Ok(2.0 * mm1_psi_radicand(rho)?.sqrt())
}

fn mm1_area_tail_raw(x: f64, rho: f64) -> Result<f64> {
    require_positive("x", x)?;
    let psi = mm1_psi(rho)?;
    let pre = (1.0 - rho) / (rho * (2.0 * std::f64::consts::PI * psi).sqrt());
    Ok(pre * x.powf(-0.25) * (-psi * x.sqrt()).exp())
}

/// M/M/1 queue-area tail `(1-rho)/(rho sqrt(2 pi psi)) x^{-1/4} e^{-psi sqrt(x)}`,
/// time measured in mean service times; clamped to 1.
pub fn mm1_area_tail(x: f64, rho: f64) -> Result<f64> {
    Ok(mm1_area_tail_raw(x, rho)?.min(1.0))
}

/// `(1 - sqrt(rho))^2 mu`, the busy-period decay rate of M/M/1.
pub fn kyprianou_gamma(rho: f64, mu: f64) -> Result<f64> {
    require_stable(rho)?;
    require_positive("mu", mu)?;
    Ok((1.0 - rho.sqrt()).powi(2) * mu)
}

/// Coefficient of `sqrt(x)` in the exponent produced by the piecewise-linear
/// path: `gamma sqrt(2 (1 + rho) / (1 - rho))`.
pub fn kyprianou_comparator_exponent(rho: f64, mu: f64) -> Result<f64> {
    let gamma = kyprianou_gamma(rho, mu)?;
    Ok(gamma * (2.0 * (1.0 + rho) / (1.0 - rho)).sqrt())
}

/// Log-log slope of the critical M/M/1 queue-area tail.
pub fn critical_slope() -> f64 {
    -1.0 / 3.0
}

fn log_mgf_pair(interarrival: &DistributionSpec, service: &DistributionSpec, gamma: f64) -> f64 {
    service.mgf(gamma).ln() + interarrival.mgf(-gamma).ln()
}

/// Positive root of `E[e^{gamma (S - T)}] = 1`.
pub fn lundberg_root(interarrival: &DistributionSpec, service: &DistributionSpec) -> Result<f64> {
    let abscissa = service.mgf_abscissa();
    if abscissa <= 0.0 {
        return Err(Error::NoRoot(format!(
            "service law {} has no finite mgf to the right of 0",
            service.family()
        )));
    }
    if service.mean() >= interarrival.mean() {
        return Err(Error::NoRoot("queue is not stable, E[S] >= E[T]".into()));
    }
    let g = |x: f64| log_mgf_pair(interarrival, service, x);

    // Walk towards the abscissa until the log-mgf turns positive.
    let mut lo = 0.0;
    let mut hi = None;
    let mut probe = if abscissa.is_finite() { 0.5 * abscissa } else { 1.0 };
    for step in 1..200 {
        let v = g(probe);
        if v > 0.0 {
            hi = Some(probe);
            break;
        }
        if v < 0.0 {
            lo = probe;
        }
        probe = if abscissa.is_finite() {
            abscissa * (1.0 - 0.5f64.powi(step + 1))
        } else {
            probe * 2.0
        };
    }
    let Some(mut hi) = hi else {
        return Err(Error::NoRoot("log-mgf stays negative up to the mgf abscissa".into()));
    };
    if lo == 0.0 {
        // The first probe overshot; look for a negative point below it.
        let mut p = hi;
        loop {
            p *= 0.5;
            if p < 1e-300 {
                return Err(Error::NoRoot("could not bracket the root".into()));
            }
            if g(p) < 0.0 {
                lo = p;
                break;
            }
            hi = p;
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Tilt in `(0, lundberg_root)` minimising `E[e^{gamma S}] E[e^{-gamma T}]`.
///
/// Under it the tilted queue has traffic intensity one, which makes long
/// busy periods typical.
pub fn busy_period_tilt(interarrival: &DistributionSpec, service: &DistributionSpec) -> Result<f64> {
    let root = lundberg_root(interarrival, service)?;
    let g = |x: f64| log_mgf_pair(interarrival, service, x);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, root);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 * root {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    Ok(0.5 * (a + b))
}

/// Outcome of the interarrival-versus-service tail comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interlight {
    Holds,
    Fails,
    Unknown,
}

/// Asymptotic form of `log P(X > t)`, enough to compare two families.
#[derive(Debug, Clone, Copy)]
enum TailShape {
    /// Zero beyond a finite point.
    Bounded,
    /// `-c t^beta + p ln t`.
    Stretched { beta: f64, c: f64, p: f64 },
    /// `-(ln t)^2 / (2 sigma^2) + (mu / sigma^2) ln t`.
    Lognormal { mu: f64, sigma: f64 },
    /// `-alpha ln t`.
    Polynomial { alpha: f64 },
}

impl TailShape {
    fn of(d: &DistributionSpec) -> Self {
        match *d {
            DistributionSpec::Deterministic { .. } => Self::Bounded,
            DistributionSpec::Exponential { rate } => Self::Stretched {
                beta: 1.0,
                c: rate,
                p: 0.0,
            },
            DistributionSpec::Erlang { shape, rate } => Self::Stretched {
                beta: 1.0,
                c: rate,
                p: shape as f64 - 1.0,
            },
            DistributionSpec::Weibull { shape, scale } => Self::Stretched {
                beta: shape,
                c: scale.powf(-shape),
                p: 0.0,
            },
            DistributionSpec::Lognormal { mu, sigma } => Self::Lognormal { mu, sigma },
            DistributionSpec::Pareto { alpha, .. } => Self::Polynomial { alpha },
        }
    }

    /// Heaviness class: larger is heavier.
    fn rank(&self) -> u8 {
        match self {
            Self::Bounded => 0,
            Self::Stretched { .. } => 1,
            Self::Lognormal { .. } => 2,
            Self::Polynomial { .. } => 3,
        }
    }
}

/// Decides `lim t^{1+varsigma} P(T > t) / F̄(t) = 0` from the family-level tail forms.
pub fn check_interlight(interarrival: &DistributionSpec, service: &DistributionSpec, varsigma: f64) -> Interlight {
    if !(varsigma.is_finite() && varsigma > 0.0) {
        return Interlight::Unknown;
    }
    let holds = |b: bool| if b { Interlight::Holds } else { Interlight::Fails };
    let t_shape = TailShape::of(interarrival);
    let s_shape = TailShape::of(service);
    if let TailShape::Bounded = t_shape {
        return Interlight::Holds;
    }
    if t_shape.rank() != s_shape.rank() {
        return holds(t_shape.rank() < s_shape.rank());
    }
    match (t_shape, s_shape) {
        (TailShape::Stretched { beta: bt, c: ct, p: pt }, TailShape::Stretched { beta: bs, c: cs, p: ps }) => {
            if bt != bs {
                holds(bt > bs)
            } else if ct != cs {
                holds(ct > cs)
            } else {
                holds(1.0 + varsigma + pt - ps < 0.0)
            }
        }
        (TailShape::Lognormal { mu: mt, sigma: st }, TailShape::Lognormal { mu: ms, sigma: ss }) => {
            if st != ss {
                holds(st < ss)
            } else {
                holds(1.0 + varsigma + (mt - ms) / (st * st) < 0.0)
            }
        }
        (TailShape::Polynomial { alpha: at }, TailShape::Polynomial { alpha: a_s }) => {
            holds(1.0 + varsigma - at + a_s < 0.0)
        }
        _ => Interlight::Unknown,
    }
}

/// Named formula evaluated by an [`AsymptoticCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum CurveName {
    BusyTailHeavy,
    AreaQConjecture,
    AreaWConjecture,
    PowerConjecture { k: f64 },
    DiscountedConjecture { k: f64, theta: f64 },
    MM1LightTail,
    KyprianouComparator,
    CriticalSlope,
}

impl CurveName {
    pub fn label(&self) -> String {
        match self {
            Self::BusyTailHeavy => "busy_tail_heavy".into(),
            Self::AreaQConjecture => "area_q_conjecture".into(),
            Self::AreaWConjecture => "area_w_conjecture".into(),
            Self::PowerConjecture { k } => format!("power_conjecture_k{k}"),
            Self::DiscountedConjecture { k, theta } => {
                format!("discounted_conjecture_k{k}_theta{theta}")
            }
            Self::MM1LightTail => "mm1_light_tail".into(),
            Self::KyprianouComparator => "kyprianou_comparator".into(),
            Self::CriticalSlope => "critical_slope".into(),
        }
    }

    /// Busy-period level that the conjecture pairs with functional level `x`.
    /// `None` for curves that are not threshold maps.
    pub fn threshold(&self, params: &QueueParams, x: f64) -> Option<Result<f64>> {
        let rho = params.rho();
        Some(match *self {
            Self::BusyTailHeavy => require_positive("x", x).map(|_| x),
            Self::AreaQConjecture => area_q_threshold(x, rho, params.lambda_t(), params.lambda_s()),
            Self::AreaWConjecture => area_w_threshold(x, rho),
            Self::PowerConjecture { k } => power_threshold(x, k, rho),
            Self::DiscountedConjecture { k, theta } => discounted_threshold(x, k, theta, rho),
            _ => return None,
        })
    }
}

/// Whether the formula's hypotheses cover the queue it is evaluated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Applicability {
    /// Hypotheses of a published theorem are met.
    Established,
    /// Covered by a conjecture only.
    Conjectural,
    /// Formula evaluated outside its hypotheses.
    Extrapolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Probability,
    /// Log-probability up to an unknown additive constant.
    LogShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub value: f64,
    /// Raw value exceeded one and was clamped.
    pub outside_regime: bool,
}

/// A named formula evaluated on an increasing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCurve {
    pub name: CurveName,
    pub digest: String,
    pub kind: ValueKind,
    pub applicability: Applicability,
    pub provenance: String,
    pub points: Vec<CurvePoint>,
}

fn applicability(name: &CurveName, params: &QueueParams) -> Applicability {
    use Applicability::*;
    let service_class = params.service.classify_tail();
    let mm1 = params.interarrival.is_exponential() && params.service.is_exponential();
    match name {
        CurveName::BusyTailHeavy | CurveName::AreaWConjecture => match service_class {
            TailClass::RegularlyVarying { .. } => Established,
            TailClass::SubexponentialOther => Conjectural,
            TailClass::LightTailed => Extrapolated,
        },
        CurveName::AreaQConjecture => match service_class {
            TailClass::RegularlyVarying { .. } => {
                // Some positive varsigma is enough.
                if check_interlight(&params.interarrival, &params.service, 1e-9) == Interlight::Holds {
                    Established
                } else {
                    Conjectural
                }
            }
            TailClass::SubexponentialOther => Conjectural,
            TailClass::LightTailed => Extrapolated,
        },
        CurveName::PowerConjecture { .. } | CurveName::DiscountedConjecture { .. } => {
            if service_class.is_subexponential() {
                Conjectural
            } else {
                Extrapolated
            }
        }
        CurveName::MM1LightTail => {
            if mm1 {
                Conjectural
            } else {
                Extrapolated
            }
        }
        CurveName::KyprianouComparator => {
            if mm1 {
                Established
            } else {
                Extrapolated
            }
        }
        CurveName::CriticalSlope => {
            if mm1 && params.regime() == crate::cycle::Regime::Critical {
                Established
            } else {
                Extrapolated
            }
        }
    }
}

fn provenance(name: &CurveName) -> &'static str {
    match name {
        CurveName::BusyTailHeavy => "P(tau > x) ~ Fbar((1-rho) x) / (1-rho)",
        CurveName::AreaQConjecture => {
            "P(int Q > x) ~ P(tau > sqrt(2x / (rho (lambda_S - lambda_T)))); tau tail from busy_tail_heavy"
        }
        CurveName::AreaWConjecture => "P(int W > x) ~ P(tau > sqrt(2x / (1-rho))); tau tail from busy_tail_heavy",
        CurveName::PowerConjecture { .. } => {
            "P(int W^k > x) ~ P(tau > ((k+1) x / (1-rho)^k)^(1/(k+1))); tau tail from busy_tail_heavy"
        }
        CurveName::DiscountedConjecture { .. } => {
            "P(int e^(-theta u) W^k > x) ~ P(tau > (theta x / (1-rho)^k)^(1/k)); tau tail from busy_tail_heavy"
        }
        CurveName::MM1LightTail => {
            "(1-rho)/(rho sqrt(2 pi psi)) x^(-1/4) exp(-psi sqrt(x)), x in units of 1/mu; \
             psi = 2 sqrt((1+rho) ln(1/rho) - 2(1-rho)); source form \
             psi = 2 sqrt(-2(1-rho) + (1+rho) log(rho)) has a negative radicand on (0,1)"
        }
        CurveName::KyprianouComparator => {
            "log P ~ -gamma sqrt(2(1+rho)/(1-rho)) sqrt(x) - (3/4) ln x + C, gamma = (1-sqrt(rho))^2 mu; C unknown"
        }
        CurveName::CriticalSlope => "log P ~ -(1/3) ln x + C at rho = 1; C unknown",
    }
}

impl AsymptoticCurve {
    /// Evaluates `name` for `params` on `grid` (strictly increasing, positive).
    pub fn evaluate(name: CurveName, params: &QueueParams, grid: &[f64]) -> Result<Self> {
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::DomainError("curve grid must be strictly increasing".into()));
        }
        let rho = params.rho();
        let mut points = Vec::with_capacity(grid.len());
        let kind = match name {
            CurveName::KyprianouComparator | CurveName::CriticalSlope => ValueKind::LogShape,
            _ => ValueKind::Probability,
        };
        for &x in grid {
            require_positive("grid point", x)?;
            let raw = match name {
                CurveName::MM1LightTail => {
                    // Rescale time so that the service rate is one.
                    mm1_area_tail_raw(x * params.lambda_s(), rho)?
                }
                CurveName::KyprianouComparator => {
                    -kyprianou_comparator_exponent(rho, params.lambda_s())? * x.sqrt() - 0.75 * x.ln()
                }
                CurveName::CriticalSlope => critical_slope() * x.ln(),
                _ => {
                    let level = name.threshold(params, x).expect("threshold curve")?;
                    busy_tail_raw(level, rho, &params.service)?
                }
            };
            let outside = kind == ValueKind::Probability && raw > 1.0;
            points.push(CurvePoint {
                x,
                value: if kind == ValueKind::Probability {
                    raw.min(1.0)
                } else {
                    raw
                },
                outside_regime: outside,
            });
        }
        Ok(Self {
            name,
            digest: params.digest(),
            kind,
            applicability: applicability(&name, params),
            provenance: provenance(&name).to_string(),
            points,
        })
    }

    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// CSV with a `#`-prefixed JSON metadata block.
    pub fn to_csv(&self, meta: &serde_json::Value) -> String {
        let header = serde_json::json!({
            "curve": self.name,
            "label": self.name.label(),
            "digest": self.digest,
            "kind": self.kind,
            "applicability": self.applicability,
            "provenance": self.provenance,
            "meta": meta,
        });
        let mut out = String::new();
        for line in serde_json::to_string_pretty(&header).unwrap_or_default().lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str("x,value,applicability_flag\n");
        for p in &self.points {
            let flag = if p.outside_regime {
                "outside_asymptotic_regime".to_string()
            } else {
                serde_json::to_value(self.applicability)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default()
            };
            let _ = writeln!(out, "{},{},{}", p.x, p.value, flag);
        }
        out
    }
}
