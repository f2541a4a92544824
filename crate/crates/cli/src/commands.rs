//! The experiment subcommands. Each returns its output files in memory.

use std::fmt::Write as _;

use areatail::asymptotics::{
    busy_period_tilt, critical_slope, kyprianou_comparator_exponent, lundberg_root, mm1_psi, AsymptoticCurve,
    CurveName, ValueKind,
};
use areatail::cycle::{PathCapture, QueueParams, Regime, Target, TiltPlan};
use areatail::estimate::{
    conditional_path_profile, default_grid, default_hill_k, empirical_tail, fit_tail, hill_estimator, joint_tail,
    mapped_tail, outside_band, ratio_diagnostic, ratio_to_empirical, ratios_to_csv, risk_summary, run_bivariate,
    run_cycles, run_cycles_with, stream_tails, tilted_run, weighted_quantile, CycleSample, FitModel, Quantity,
    RatioPoint, TailEstimate, TiltSpec,
};
use areatail::DistributionSpec;
use serde_json::{json, Map, Value};

use crate::artifact::{meta, with_meta, Artifact};
use crate::config::{paired_quantity, ExperimentConfig, FitConfig, Gamma, GammaRule, Level, Needs};
use crate::error::CliError;

/// Band used when summarising ratio diagnostics.
pub const RATIO_BAND: (f64, f64) = (0.7, 1.3);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Cycles,
    Tail,
    Fit,
    Profile,
    Risk,
    Joint,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Cycles,
        Command::Tail,
        Command::Fit,
        Command::Profile,
        Command::Risk,
        Command::Joint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Cycles => "cycles",
            Command::Tail => "tail",
            Command::Fit => "fit",
            Command::Profile => "profile",
            Command::Risk => "risk",
            Command::Joint => "joint",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn needs(self) -> &'static [Needs] {
        match self {
            Command::Cycles | Command::Tail => &[Needs::Queue],
            Command::Fit => &[Needs::Queue, Needs::Fit],
            Command::Profile => &[Needs::Queue, Needs::Profile],
            Command::Risk => &[Needs::Risk],
            Command::Joint => &[Needs::Queue, Needs::Joint],
        }
    }
}

/// Files of one run plus a short human-readable report.
#[derive(Debug, Default)]
pub struct Output {
    pub artifacts: Vec<Artifact>,
    pub report: Vec<String>,
}

pub fn validate(command: Command, config: &ExperimentConfig) -> Result<(), CliError> {
    let errs = config.violations(command.needs());
    if errs.is_empty() {
        Ok(())
    } else {
        Err(CliError::InvalidConfig(errs))
    }
}

pub fn run(command: Command, config: &ExperimentConfig) -> Result<Output, CliError> {
    validate(command, config)?;
    let meta = meta(command.name(), config);
    match command {
        Command::Cycles => cycles(config, &meta),
        Command::Tail => tail(config, &meta),
        Command::Fit => fit(config, &meta),
        Command::Profile => profile(config, &meta),
        Command::Risk => risk(config, &meta),
        Command::Joint => joint(config, &meta),
    }
}

fn resolve_tilt(config: &ExperimentConfig) -> Result<Option<TiltSpec>, CliError> {
    let Some(t) = &config.tilt else { return Ok(None) };
    let q = config.queue();
    let gamma = match t.gamma {
        Gamma::Value(g) => g,
        Gamma::Rule(GammaRule::BusyPeriod) => busy_period_tilt(&q.interarrival, &q.service)?,
        Gamma::Rule(GammaRule::Lundberg) => lundberg_root(&q.interarrival, &q.service)?,
    };
    Ok(Some(TiltSpec {
        gamma,
        switch: t.switch,
    }))
}

fn sample(config: &ExperimentConfig, tilt: Option<TiltSpec>) -> Result<CycleSample, CliError> {
    let q = config.queue();
    let plan = tilt.map(|t| TiltPlan::new(q, t.gamma, t.switch)).transpose()?;
    Ok(run_cycles_with(q, plan, config.n_cycles, config.master_seed)?)
}

struct Estimates {
    tails: Vec<TailEstimate>,
    sample: Option<CycleSample>,
    tilt: Option<TiltSpec>,
}

/// Tail estimates for `quantities`. The cycles are kept only when the grid
/// depends on the sample or `keep_sample` is set; otherwise they are streamed.
fn estimate(config: &ExperimentConfig, quantities: &[Quantity], keep_sample: bool) -> Result<Estimates, CliError> {
    let tilt = resolve_tilt(config)?;
    let grid = config.grid.explicit();
    if grid.is_none() || keep_sample {
        let s = sample(config, tilt)?;
        let tails = quantities
            .iter()
            .map(|q| {
                let g = match &grid {
                    Some(g) => g.clone(),
                    None => default_grid(&s.values(q)?, s.weight.as_deref())?,
                };
                empirical_tail(&s, *q, &g)
            })
            .collect::<areatail::Result<Vec<_>>>()?;
        return Ok(Estimates {
            tails,
            sample: Some(s),
            tilt,
        });
    }
    let grid = grid.expect("explicit grid");
    let targets: Vec<(Quantity, Vec<f64>)> = quantities.iter().map(|q| (*q, grid.clone())).collect();
    let q = config.queue();
    let tails = match tilt {
        Some(t) => tilted_run(q, t, config.n_cycles, &targets, config.master_seed)?,
        None => stream_tails(q, None, config.n_cycles, config.master_seed, &targets)?,
    };
    Ok(Estimates {
        tails,
        sample: None,
        tilt,
    })
}

fn tail_summary(est: &TailEstimate) -> Value {
    json!({
        "quantity": est.quantity,
        "label": est.quantity.label(),
        "n_cycles": est.n_cycles,
        "n_censored": est.n_censored,
        "weighted": est.weighted,
        "grid_points": est.len(),
        "confident_points": (0..est.len()).filter(|&j| est.confident(j)).count(),
        "warnings": est.warnings,
    })
}

fn ratio_summary(points: &[RatioPoint]) -> Value {
    let confident: Vec<&RatioPoint> = points.iter().filter(|p| !p.low_confidence).collect();
    let min = confident.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let max = confident.iter().map(|p| p.ratio).fold(f64::NEG_INFINITY, f64::max);
    json!({
        "confident_points": confident.len(),
        "min_ratio": if confident.is_empty() { Value::Null } else { json!(min) },
        "max_ratio": if confident.is_empty() { Value::Null } else { json!(max) },
        "band": [RATIO_BAND.0, RATIO_BAND.1],
        "outside_band": outside_band(points, RATIO_BAND.0, RATIO_BAND.1).len(),
    })
}

fn gamma_json(tilt: Option<TiltSpec>) -> Value {
    tilt.map_or(Value::Null, |t| json!(t.gamma))
}

fn cycles(config: &ExperimentConfig, meta: &Value) -> Result<Output, CliError> {
    let tilt = resolve_tilt(config)?;
    let s = sample(config, tilt)?;
    let q = config.queue();
    let mut quantities = vec![
        Quantity::Tau,
        Quantity::Customers,
        Quantity::MaxQueue,
        Quantity::MaxWorkload,
    ];
    quantities.extend(q.functionals.iter().map(|f| Quantity::area(*f)));
    let mut means = Map::new();
    let mut hill = Map::new();
    for quantity in &quantities {
        means.insert(quantity.label(), json!(s.mean(quantity)?));
        if s.weight.is_none() {
            let values = s.completed_values(quantity)?;
            let k = default_hill_k(values.len());
            let entry = match hill_estimator(&values, k) {
                Ok(h) => json!(h),
                Err(e) => json!({ "error": e.code(), "message": e.to_string() }),
            };
            hill.insert(quantity.label(), entry);
        }
    }
    let summary = json!({
        "meta": meta,
        "n_cycles": s.len(),
        "n_censored": s.censored_count(),
        "escaped_fraction": s.escaped_fraction(),
        "rho": q.rho(),
        "regime": q.regime(),
        "gamma": gamma_json(tilt),
        "means": means,
        "hill": hill,
    });
    let report = vec![format!(
        "{} cycles, {} censored, mean tau {:.6}",
        s.len(),
        s.censored_count(),
        s.mean(&Quantity::Tau)?
    )];
    Ok(Output {
        artifacts: vec![
            Artifact::text("cycles.csv", with_meta(meta, &s.to_csv())),
            Artifact::json("summary.json", &summary),
        ],
        report,
    })
}

fn tail(config: &ExperimentConfig, meta: &Value) -> Result<Output, CliError> {
    let q = config.queue();
    let quantities = config.resolved_quantities();
    let threshold_curves = config.curves.iter().any(|c| c.threshold(q, 1.0).is_some());
    let est = estimate(config, &quantities, threshold_curves)?;
    let mut out = Output::default();
    for t in &est.tails {
        out.artifacts.push(Artifact::text(
            format!("tail_{}.csv", t.quantity.label()),
            t.to_csv(meta),
        ));
    }
    let mut curves = Vec::new();
    for name in &config.curves {
        let label = paired_quantity(name).label();
        let t = est
            .tails
            .iter()
            .find(|t| t.quantity.label() == label)
            .expect("validated curve pairing");
        let curve = AsymptoticCurve::evaluate(*name, q, &t.grid)?;
        out.artifacts.push(Artifact::text(
            format!("curve_{}.csv", name.label()),
            curve.to_csv(meta),
        ));
        let mut entry = json!({
            "curve": name,
            "label": name.label(),
            "quantity": label,
            "kind": curve.kind,
            "applicability": curve.applicability,
            "provenance": curve.provenance,
        });
        if curve.kind == ValueKind::Probability {
            let r = ratio_diagnostic(t, &curve)?;
            out.artifacts.push(Artifact::text(
                format!("ratio_{}.csv", name.label()),
                ratios_to_csv(&r, meta),
            ));
            entry["ratio_to_curve"] = ratio_summary(&r);
            out.report
                .push(format!("{}: ratio to curve {}", name.label(), brief(&r)));
        }
        if let (Some(s), Some(_)) = (&est.sample, name.threshold(q, 1.0)) {
            if *name != CurveName::BusyTailHeavy {
                let mapped = mapped_tail(s, Quantity::Tau, *name, &t.grid)?;
                let r = ratio_to_empirical(t, &mapped)?;
                out.artifacts.push(Artifact::text(
                    format!("ratio_empirical_{}.csv", name.label()),
                    ratios_to_csv(&r, meta),
                ));
                entry["ratio_to_empirical_tau"] = ratio_summary(&r);
                out.report
                    .push(format!("{}: ratio to empirical tau tail {}", name.label(), brief(&r)));
            }
        }
        curves.push(entry);
    }
    let summary = json!({
        "meta": meta,
        "gamma": gamma_json(est.tilt),
        "tails": est.tails.iter().map(tail_summary).collect::<Vec<_>>(),
        "curves": curves,
    });
    out.artifacts.push(Artifact::json("tail.json", &summary));
    for t in &est.tails {
        out.report.push(format!(
            "{}: {} grid points, p_hat from {:.3e} to {:.3e}",
            t.quantity.label(),
            t.len(),
            t.p_hat[0],
            t.p_hat[t.len() - 1]
        ));
    }
    Ok(out)
}

fn brief(points: &[RatioPoint]) -> String {
    let s = ratio_summary(points);
    format!(
        "over {} confident points in [{}, {}], {} outside [{}, {}]",
        s["confident_points"],
        s["min_ratio"].as_f64().map_or("-".into(), |v| format!("{v:.3}")),
        s["max_ratio"].as_f64().map_or("-".into(), |v| format!("{v:.3}")),
        s["outside_band"],
        RATIO_BAND.0,
        RATIO_BAND.1
    )
}

/// Reference values the fitted coefficients can be compared with.
fn candidates(q: &QueueParams, fit: &FitConfig) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let mm1 = matches!(q.interarrival, DistributionSpec::Exponential { .. })
        && matches!(q.service, DistributionSpec::Exponential { .. });
    let rho = q.rho();
    let queue_area = matches!(fit.quantity, Quantity::Area { functional } if functional.target == Target::Q && functional.is_plain_area());
    match fit.model {
        FitModel::StretchedExp { .. } => {
            if mm1 && queue_area && rho < 1.0 {
                if let Ok(psi) = mm1_psi(rho) {
                    out.push(("psi", psi * q.lambda_s().sqrt()));
                }
                if let Ok(c) = kyprianou_comparator_exponent(rho, q.lambda_s()) {
                    out.push(("comparator", c));
                }
            }
        }
        FitModel::LogLogSlope => {
            if mm1 && queue_area && q.regime() == Regime::Critical {
                out.push(("slope", critical_slope()));
            }
            if let (DistributionSpec::Pareto { alpha, .. }, true) = (q.service, rho < 1.0) {
                let slope = match fit.quantity {
                    Quantity::Tau => Some(-alpha),
                    Quantity::Area { functional } if functional.theta == 0.0 => match functional.target {
                        Target::W => Some(-alpha / (functional.k + 1.0)),
                        Target::Q if functional.k == 1.0 => Some(-alpha / 2.0),
                        Target::Q => None,
                    },
                    _ => None,
                };
                if let Some(s) = slope {
                    out.push(("slope", s));
                }
            }
        }
    }
    out
}

fn fit(config: &ExperimentConfig, meta: &Value) -> Result<Output, CliError> {
    let f = config.fit.expect("validated fit section");
    let est = estimate(config, &[f.quantity], false)?;
    let t = &est.tails[0];
    let report = fit_tail(t, f.model, f.window)?;
    let cands = candidates(config.queue(), &f);
    let mut line = String::new();
    for c in &report.coefficients {
        if c.name != "c0" {
            let _ = write!(line, "{}_hat = {:.4} ± {:.4}", c.name, c.value, c.se);
        }
    }
    for (name, value) in &cands {
        let _ = write!(line, " | {name} = {value:.4}");
    }
    let _ = write!(
        line,
        " (x in [{:.4e}, {:.4e}], {} points)",
        report.window[0], report.window[1], report.n_points
    );
    let summary = json!({
        "meta": meta,
        "gamma": gamma_json(est.tilt),
        "quantity": f.quantity.label(),
        "fit": report,
        "candidates": cands.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<Map<_, _>>(),
        "tail": tail_summary(t),
    });
    Ok(Output {
        artifacts: vec![
            Artifact::text(format!("tail_{}.csv", f.quantity.label()), t.to_csv(meta)),
            Artifact::json("fit.json", &summary),
        ],
        report: vec![line],
    })
}

fn profile(config: &ExperimentConfig, meta: &Value) -> Result<Output, CliError> {
    let p = config.profile.expect("validated profile section");
    let n = p.n_cycles.unwrap_or(config.n_cycles);
    let mut q = config.queue().clone();
    q.path_capture = PathCapture::Off;
    let index = q.functional_index(&p.functional).expect("validated functional");
    let quantity = Quantity::area(p.functional);
    let level = match p.level {
        Level::Value { x } => x,
        Level::Quantile { q: prob } => {
            let pilot = run_cycles(&q, n, config.master_seed)?;
            weighted_quantile(&pilot.values(&quantity)?, None, prob)?
        }
    };
    let q = q.with_path_capture(PathCapture::AreaAbove {
        functional: index,
        level,
    });
    let s = run_cycles(&q, n, config.master_seed)?;
    let prof = conditional_path_profile(&s, quantity, level, p.n_bins)?;
    let summary = json!({
        "meta": meta,
        "quantity": quantity.label(),
        "level": level,
        "n_cycles": n,
        "profile": prof,
    });
    let report = vec![format!(
        "{} paths above {level:.4}: peak_fraction {:.3}, concavity_defect {:.4}, triangle_distance {:.4}",
        prof.n_paths, prof.peak_fraction, prof.concavity_defect, prof.triangle_distance
    )];
    Ok(Output {
        artifacts: vec![
            Artifact::text("profile.csv", prof.to_csv(meta)),
            Artifact::json("profile.json", &summary),
        ],
        report,
    })
}

fn risk(config: &ExperimentConfig, meta: &Value) -> Result<Output, CliError> {
    let r = config.risk.expect("validated risk section");
    let s = risk_summary(&r, config.n_cycles, config.master_seed, config.grid.explicit())?;
    let mut csv = String::from("x,p_hat,ci_lo,ci_hi,count\n");
    for p in &s.tail {
        let _ = writeln!(csv, "{},{},{},{},{}", p.x, p.p_hat, p.ci_lo, p.ci_hi, p.count);
    }
    let summary = json!({
        "meta": meta,
        "n": s.n,
        "mean": s.mean,
        "variance": s.variance,
        "std_error": s.std_error,
        "prob_negative": s.prob_negative,
    });
    let report = vec![format!(
        "mean {:.6} ± {:.6}, P(I < 0) = {:.6}",
        s.mean, s.std_error, s.prob_negative
    )];
    Ok(Output {
        artifacts: vec![
            Artifact::text("risk_tail.csv", with_meta(meta, &csv)),
            Artifact::json("risk.json", &summary),
        ],
        report,
    })
}

fn joint(config: &ExperimentConfig, meta: &Value) -> Result<Output, CliError> {
    let j = config.joint.clone().expect("validated joint section");
    let s = run_bivariate(config.queue(), j.b, config.n_cycles, config.master_seed)?;
    let rows =
        j.x.iter()
            .map(|&x| joint_tail(&s, &j.functional, x, j.a))
            .collect::<areatail::Result<Vec<_>>>()?;
    let mut csv = String::from("x,a,p,ci_lo,ci_hi,count,n,marginal_first,marginal_second\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.x, r.a, r.p, r.ci_lo, r.ci_hi, r.count, r.n, r.marginal_first, r.marginal_second
        );
    }
    let summary = json!({
        "meta": meta,
        "b": j.b,
        "a": j.a,
        "functional": j.functional.id(),
        "n_censored": s.censored.iter().filter(|c| **c).count(),
        "points": rows,
    });
    let report = rows
        .iter()
        .map(|r| {
            format!(
                "x = {}: joint {:.4e}, marginals {:.4e} / {:.4e}",
                r.x, r.p, r.marginal_first, r.marginal_second
            )
        })
        .collect();
    Ok(Output {
        artifacts: vec![
            Artifact::text("joint.csv", with_meta(meta, &csv)),
            Artifact::json("joint.json", &summary),
        ],
        report,
    })
}
