//! Experiment configuration files and named presets.

use std::collections::BTreeSet;

use areatail::asymptotics::CurveName;
use areatail::cycle::{CycleCaps, FunctionalSpec, QueueParams, SwitchRule, Target};
use areatail::estimate::{log_grid, FitModel, Quantity, RiskParams, WindowPolicy};
use areatail::DistributionSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Statement the experiment checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue: Option<QueueParams>,
    pub n_cycles: u64,
    pub master_seed: u64,
    /// Worker threads; all cores when absent. Never changes results.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub grid: GridPolicy,
    /// Quantities to estimate; `tau` plus every functional area when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quantities: Vec<Quantity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<CurveName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt: Option<TiltConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<RiskParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointConfig>,
    /// Output directory; each command writes into a subdirectory named after it.
    #[serde(default = "default_out")]
    pub out: String,
}

fn default_out() -> String {
    "areatail-out".into()
}

/// Threshold grid for tail estimates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridPolicy {
    /// 40 log-spaced points between the sample median and 99.99th percentile.
    #[default]
    Default,
    Log {
        lo: f64,
        hi: f64,
        n: usize,
    },
    Points {
        x: Vec<f64>,
    },
}

impl GridPolicy {
    /// Explicit grid, or `None` when it depends on the sample.
    pub fn explicit(&self) -> Option<Vec<f64>> {
        match self {
            GridPolicy::Default => None,
            GridPolicy::Log { lo, hi, n } => log_grid(*lo, *hi, *n).ok(),
            GridPolicy::Points { x } => Some(x.clone()),
        }
    }

    fn violations(&self) -> Vec<String> {
        match self {
            GridPolicy::Default => vec![],
            GridPolicy::Log { lo, hi, n } => match log_grid(*lo, *hi, *n) {
                Ok(_) => vec![],
                Err(e) => vec![format!("grid: {e}")],
            },
            GridPolicy::Points { x } => {
                let mut errs = vec![];
                if x.is_empty() {
                    errs.push("grid: points must not be empty".into());
                }
                if x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    errs.push("grid: points must be finite and positive".into());
                }
                if x.windows(2).any(|w| !(w[0] < w[1])) {
                    errs.push("grid: points must be strictly increasing".into());
                }
                errs
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// Minimiser of `E[e^{g S}] E[e^{-g T}]`, which balances the tilted means.
    BusyPeriod,
    /// Positive root of `E[e^{g (S - T)}] = 1`.
    Lundberg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Value(f64),
    Rule(GammaRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltConfig {
    pub gamma: Gamma,
    #[serde(default = "never")]
    pub switch: SwitchRule,
}

fn never() -> SwitchRule {
    SwitchRule::Never
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub quantity: Quantity,
    pub model: FitModel,
    #[serde(default = "default_window")]
    pub window: WindowPolicy,
}

fn default_window() -> WindowPolicy {
    WindowPolicy::Default
}

/// Conditioning level of a path profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case", deny_unknown_fields)]
pub enum Level {
    Value {
        x: f64,
    },
    /// Empirical quantile of the quantity over all cycles.
    Quantile {
        q: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub functional: FunctionalSpec,
    pub level: Level,
    #[serde(default = "default_bins")]
    pub n_bins: usize,
    /// Cycle count for the profile run; `n_cycles` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cycles: Option<u64>,
}

fn default_bins() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    /// Server one works `b` times longer per customer.
    pub b: f64,
    /// Server two's level is `a x`.
    pub a: f64,
    pub functional: FunctionalSpec,
    pub x: Vec<f64>,
}

/// Sections a command needs besides the common fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Queue,
    Fit,
    Profile,
    Risk,
    Joint,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn queue(&self) -> &QueueParams {
        self.queue.as_ref().expect("validated config has a queue")
    }

    /// Quantities to estimate after applying the default.
    pub fn resolved_quantities(&self) -> Vec<Quantity> {
        if !self.quantities.is_empty() {
            return self.quantities.clone();
        }
        let mut q = vec![Quantity::Tau];
        if let Some(p) = &self.queue {
            q.extend(p.functionals.iter().map(|f| Quantity::area(*f)));
        }
        q
    }

    /// Every violated constraint for a command needing `needs`.
    pub fn violations(&self, needs: &[Needs]) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n_cycles == 0 {
            errs.push("n_cycles must be at least 1".into());
        }
        if self.workers == Some(0) {
            errs.push("workers must be at least 1".into());
        }
        errs.extend(self.grid.violations());
        for need in needs {
            let missing = match need {
                Needs::Queue => self.queue.is_none(),
                Needs::Fit => self.fit.is_none(),
                Needs::Profile => self.profile.is_none(),
                Needs::Risk => self.risk.is_none(),
                Needs::Joint => self.joint.is_none(),
            };
            if missing {
                errs.push(format!("{need:?} section is required for this command").to_lowercase());
            }
        }
        if let Some(q) = &self.queue {
            errs.extend(q.violations());
            let quantities = self.resolved_quantities();
            for quantity in &quantities {
                if let Quantity::Area { functional } = quantity {
                    if q.functional_index(functional).is_none() {
                        errs.push(format!(
                            "quantity {} is not among the queue functionals",
                            functional.id()
                        ));
                    }
                }
            }
            let labels: BTreeSet<String> = quantities.iter().map(Quantity::label).collect();
            for curve in &self.curves {
                let paired = paired_quantity(curve);
                if !labels.contains(&paired.label()) {
                    errs.push(format!(
                        "curve {} compares against {}, which is not estimated",
                        curve.label(),
                        paired.label()
                    ));
                }
            }
            if let Some(t) = &self.tilt {
                if let Gamma::Value(g) = t.gamma {
                    if !g.is_finite() {
                        errs.push("tilt: gamma must be finite".into());
                    }
                }
                if !q.caps.is_bounded() {
                    errs.push("CycleCaps: tilted runs require max_customers or max_time".into());
                }
            }
            if let Some(f) = &self.fit {
                if let Quantity::Area { functional } = f.quantity {
                    if q.functional_index(&functional).is_none() {
                        errs.push(format!(
                            "fit: functional {} is not among the queue functionals",
                            functional.id()
                        ));
                    }
                }
            }
            if let Some(p) = &self.profile {
                if q.functional_index(&p.functional).is_none() {
                    errs.push(format!(
                        "profile: functional {} is not among the queue functionals",
                        p.functional.id()
                    ));
                }
            }
            if let Some(j) = &self.joint {
                if q.functional_index(&j.functional).is_none() {
                    errs.push(format!(
                        "joint: functional {} is not among the queue functionals",
                        j.functional.id()
                    ));
                }
                if errs.is_empty() && q.rho() * j.b >= 1.0 && !q.caps.is_bounded() {
                    errs.push(format!(
                        "CycleCaps: server one has rho = {} >= 1 and needs max_customers or max_time",
                        q.rho() * j.b
                    ));
                }
            }
        }
        if let Some(f) = &self.fit {
            match f.window {
                WindowPolicy::Default => {}
                WindowPolicy::ProbabilityBand { lo, hi } | WindowPolicy::XRange { lo, hi } => {
                    if !(lo < hi) {
                        errs.push("fit: window needs lo < hi".into());
                    }
                }
            }
        }
        if let Some(p) = &self.profile {
            if p.n_bins < 3 {
                errs.push("profile: n_bins must be at least 3".into());
            }
            if p.n_cycles == Some(0) {
                errs.push("profile: n_cycles must be at least 1".into());
            }
            match p.level {
                Level::Value { x } if !x.is_finite() => errs.push("profile: level must be finite".into()),
                Level::Quantile { q } if !(q > 0.0 && q < 1.0) => {
                    errs.push("profile: quantile must lie in (0, 1)".into())
                }
                _ => {}
            }
        }
        if let Some(r) = &self.risk {
            errs.extend(r.violations());
        }
        if let Some(j) = &self.joint {
            if !(j.b.is_finite() && j.b > 0.0) {
                errs.push("joint: b must be positive".into());
            }
            if !(j.a.is_finite() && j.a >= 0.0) {
                errs.push("joint: a must be non-negative".into());
            }
            if j.x.is_empty() || j.x.iter().any(|v| !v.is_finite()) {
                errs.push("joint: x must be a non-empty list of finite levels".into());
            }
        }
        errs
    }
}

/// The estimated quantity a curve is compared with.
pub fn paired_quantity(curve: &CurveName) -> Quantity {
    match *curve {
        CurveName::BusyTailHeavy => Quantity::Tau,
        CurveName::AreaQConjecture
        | CurveName::MM1LightTail
        | CurveName::KyprianouComparator
        | CurveName::CriticalSlope => Quantity::area(FunctionalSpec::queue_area()),
        CurveName::AreaWConjecture => Quantity::area(FunctionalSpec::workload_area()),
        CurveName::PowerConjecture { k } => Quantity::area(FunctionalSpec::new(Target::W, k, 0.0)),
        CurveName::DiscountedConjecture { k, theta } => Quantity::area(FunctionalSpec::new(Target::W, k, theta)),
    }
}

pub struct Preset {
    pub name: &'static str,
    pub claim: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        let mut c = (self.build)();
        c.preset = Some(self.name.into());
        c.claim = Some(self.claim.into());
        c
    }
}

fn base(queue: Option<QueueParams>, n_cycles: u64) -> ExperimentConfig {
    ExperimentConfig {
        preset: None,
        claim: None,
        queue,
        n_cycles,
        master_seed: 42,
        workers: None,
        grid: GridPolicy::Default,
        quantities: vec![],
        curves: vec![],
        tilt: None,
        fit: None,
        profile: None,
        risk: None,
        joint: None,
        out: default_out(),
    }
}

/// M/Pareto/1 with arrival rate 0.5, mean service 1 and tail index 2.5.
fn pareto_queue() -> QueueParams {
    QueueParams::new(
        DistributionSpec::Exponential { rate: 0.5 },
        DistributionSpec::Pareto { alpha: 2.5, scale: 0.6 },
    )
}

fn conjecture2_pareto() -> ExperimentConfig {
    let queue = pareto_queue().with_functionals(vec![FunctionalSpec::queue_area(), FunctionalSpec::workload_area()]);
    ExperimentConfig {
        curves: vec![
            CurveName::BusyTailHeavy,
            CurveName::AreaWConjecture,
            CurveName::AreaQConjecture,
        ],
        fit: Some(FitConfig {
            quantity: Quantity::area(FunctionalSpec::workload_area()),
            model: FitModel::LogLogSlope,
            window: WindowPolicy::Default,
        }),
        profile: Some(ProfileConfig {
            functional: FunctionalSpec::workload_area(),
            level: Level::Quantile { q: 0.999 },
            n_bins: 50,
            n_cycles: Some(1_000_000),
        }),
        ..base(Some(queue), 10_000_000)
    }
}

fn conjecture3_power() -> ExperimentConfig {
    let k2 = FunctionalSpec::new(Target::W, 2.0, 0.0);
    let discounted = FunctionalSpec::new(Target::W, 2.0, 0.1);
    let queue = pareto_queue().with_functionals(vec![k2, discounted]);
    ExperimentConfig {
        quantities: vec![Quantity::Tau, Quantity::area(k2), Quantity::area(discounted)],
        curves: vec![
            CurveName::BusyTailHeavy,
            CurveName::PowerConjecture { k: 2.0 },
            CurveName::DiscountedConjecture { k: 2.0, theta: 0.1 },
        ],
        ..base(Some(queue), 10_000_000)
    }
}

fn mm1_lighttail() -> ExperimentConfig {
    let queue = QueueParams::mm1(0.5, 1.0).with_functionals(vec![FunctionalSpec::queue_area()]);
    let area = Quantity::area(FunctionalSpec::queue_area());
    ExperimentConfig {
        grid: GridPolicy::Log {
            lo: 20.0,
            hi: 2000.0,
            n: 60,
        },
        quantities: vec![area],
        curves: vec![CurveName::MM1LightTail, CurveName::KyprianouComparator],
        fit: Some(FitConfig {
            quantity: area,
            model: FitModel::STRETCHED_EXP,
            window: WindowPolicy::Default,
        }),
        profile: Some(ProfileConfig {
            functional: FunctionalSpec::queue_area(),
            level: Level::Quantile { q: 0.999 },
            n_bins: 50,
            n_cycles: Some(200_000),
        }),
        ..base(Some(queue), 100_000_000)
    }
}

fn critical_third() -> ExperimentConfig {
    let queue = QueueParams::mm1(1.0, 1.0)
        .with_functionals(vec![FunctionalSpec::queue_area()])
        .with_caps(CycleCaps {
            max_customers: Some(10_000_000),
            max_time: None,
            early_stop_threshold: Some(1e8),
        });
    let area = Quantity::area(FunctionalSpec::queue_area());
    ExperimentConfig {
        grid: GridPolicy::Log {
            lo: 1e5,
            hi: 1e7,
            n: 21,
        },
        quantities: vec![area],
        curves: vec![CurveName::CriticalSlope],
        fit: Some(FitConfig {
            quantity: area,
            model: FitModel::LogLogSlope,
            window: WindowPolicy::XRange { lo: 1e5, hi: 1e7 },
        }),
        ..base(Some(queue), 1_000_000)
    }
}

fn mm1_tilted() -> ExperimentConfig {
    let queue = QueueParams::mm1(0.5, 1.0).with_caps(CycleCaps {
        max_customers: None,
        max_time: Some(202.0),
        early_stop_threshold: None,
    });
    ExperimentConfig {
        grid: GridPolicy::Points {
            x: vec![10.0, 20.0, 30.0, 200.0],
        },
        quantities: vec![Quantity::Tau],
        tilt: Some(TiltConfig {
            gamma: Gamma::Rule(GammaRule::BusyPeriod),
            switch: SwitchRule::Never,
        }),
        ..base(Some(queue), 1_000_000)
    }
}

fn risk_negative_part() -> ExperimentConfig {
    ExperimentConfig {
        risk: Some(RiskParams {
            v: 2.0,
            c: 1.2,
            claim_rate: 1.0,
            claim: DistributionSpec::Exponential { rate: 1.0 },
            horizon: 100.0,
        }),
        ..base(None, 1_000_000)
    }
}

fn joint_mm1() -> ExperimentConfig {
    let queue = QueueParams::mm1(0.3, 1.0).with_functionals(vec![FunctionalSpec::workload_area()]);
    ExperimentConfig {
        joint: Some(JointConfig {
            b: 2.0,
            a: 1.0,
            functional: FunctionalSpec::workload_area(),
            x: vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
        }),
        ..base(Some(queue), 1_000_000)
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "conjecture2-pareto",
        claim: "M/Pareto(2.5)/1 at rho = 0.5: P(int W > x) ~ P(tau > sqrt(2x/(1-rho))), \
                P(int Q > x) ~ P(tau > sqrt(2x/(rho(lambda_S - lambda_T)))), P(tau > x) ~ Fbar((1-rho)x)/(1-rho)",
        build: conjecture2_pareto,
    },
    Preset {
        name: "conjecture3-power",
        claim: "M/Pareto(2.5)/1 at rho = 0.5: P(int W^2 > x) ~ P(tau > (3x/(1-rho)^2)^(1/3)) and \
                P(int e^(-0.1u) W^2 > x) ~ P(tau > (0.1x/(1-rho)^2)^(1/2))",
        build: conjecture3_power,
    },
    Preset {
        name: "mm1-lighttail",
        claim: "M/M/1 at rho = 0.5: log P(int Q > x) decays like -psi sqrt(x) with \
                psi = 2 sqrt((1+rho) ln(1/rho) - 2(1-rho)) = 0.3986, not the comparator rate 0.2101",
        build: mm1_lighttail,
    },
    Preset {
        name: "critical-third",
        claim: "M/M/1 at rho = 1: P(int Q > x) decays like x^(-1/3)",
        build: critical_third,
    },
    Preset {
        name: "mm1-tilted",
        claim: "M/M/1 at rho = 0.5: exponentially tilted sampling estimates P(tau > u) without bias, \
                down to probabilities below 1e-8",
        build: mm1_tilted,
    },
    Preset {
        name: "risk-negative-part",
        claim: "Cramer-Lundberg risk process: distribution of the integral of its negative part",
        build: risk_negative_part,
    },
    Preset {
        name: "joint-mm1",
        claim: "Two M/M/1 servers fed by the same arrivals, one working twice as long: joint workload-area tails",
        build: joint_mm1,
    },
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    PRESETS.iter().find(|p| p.name == name).map(Preset::config)
}
