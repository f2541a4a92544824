//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p areatail --test acceptance`. Set `ACCEPTANCE_ONLY`
//! to a comma-separated list of criterion numbers to run a subset, and
//! `ACCEPTANCE_STRICT=1` to exit nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use areatail::asymptotics::{
    area_w_threshold, busy_period_tilt, kyprianou_comparator_exponent, mm1_psi, power_threshold, AsymptoticCurve,
    CurveName,
};
use areatail::cycle::{CycleCaps, CyclePath, FunctionalSpec, PathCapture, QueueParams, Target};
use areatail::estimate::{
    conditional_path_profile, default_grid, default_hill_k, empirical_tail, fit_tail, hill_estimator, log_grid,
    mapped_tail, outside_band, ratio_diagnostic, ratio_to_empirical, run_cycles, stream_tails, tilted_run,
    weighted_quantile, wilson_interval, CycleSample, FitModel, Quantity, RatioPoint, TailEstimate, TiltSpec,
    WindowPolicy,
};
use areatail::rng::RandomStream;
use areatail::DistributionSpec;

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn pareto_params() -> QueueParams {
    QueueParams::new(
        DistributionSpec::Exponential { rate: 0.5 },
        DistributionSpec::Pareto { alpha: 2.5, scale: 0.6 },
    )
    .with_functionals(vec![
        FunctionalSpec::queue_area(),
        FunctionalSpec::workload_area(),
        FunctionalSpec::new(Target::W, 2.0, 0.0),
        FunctionalSpec::new(Target::W, 2.0, 0.1),
    ])
}

/// Distribution of each family with the given mean.
fn family_with_mean(family: usize, mean: f64) -> DistributionSpec {
    match family % 6 {
        0 => DistributionSpec::Exponential { rate: 1.0 / mean },
        1 => DistributionSpec::Pareto {
            alpha: 2.5,
            scale: mean * 1.5 / 2.5,
        },
        2 => DistributionSpec::Lognormal {
            mu: mean.ln() - 0.32,
            sigma: 0.8,
        },
        3 => DistributionSpec::Weibull {
            shape: 1.5,
            scale: mean / libm::tgamma(1.0 + 1.0 / 1.5),
        },
        4 => DistributionSpec::Deterministic { value: mean },
        _ => DistributionSpec::Erlang {
            shape: 3,
            rate: 3.0 / mean,
        },
    }
}

/// Midpoint Riemann sums with `steps` cells for every functional, walking the event path once.
fn riemann(path: &CyclePath, functionals: &[FunctionalSpec], steps: usize) -> Vec<f64> {
    let tau = *path.times.last().unwrap();
    let h = tau / steps as f64;
    let mut idx = 0;
    let mut sums = vec![0.0; functionals.len()];
    let power = |x: f64, k: f64| match k {
        1.0 => x,
        2.0 => x * x,
        0.5 => x.sqrt(),
        _ => x.powf(k),
    };
    for i in 0..steps {
        let t = (i as f64 + 0.5) * h;
        while idx + 1 < path.times.len() && path.times[idx + 1] <= t {
            idx += 1;
        }
        let q = path.queue[idx] as f64;
        let w = (path.workload[idx] - (t - path.times[idx])).max(0.0);
        for (sum, f) in sums.iter_mut().zip(functionals) {
            let x = if f.target == Target::Q { q } else { w };
            let discount = if f.theta == 0.0 { 1.0 } else { (-f.theta * t).exp() };
            *sum += discount * power(x, f.k);
        }
    }
    sums.iter().map(|s| s * h).collect()
}

fn criterion_1() -> Outcome {
    let functionals = vec![
        FunctionalSpec::queue_area(),
        FunctionalSpec::workload_area(),
        FunctionalSpec::new(Target::Q, 2.0, 0.3),
        FunctionalSpec::new(Target::W, 0.5, 0.0),
        FunctionalSpec::new(Target::W, 2.0, 0.3),
    ];
    let mut rng = RandomStream::new(SEED);
    let (mut checked, mut worst_identity, mut worst_riemann) = (0, 0.0f64, 0.0f64);
    let mut riemann_checked = 0;
    let mut combo = 0usize;
    while checked < 1000 {
        let params = QueueParams::new(family_with_mean(combo / 6, 1.5), family_with_mean(combo, 1.0))
            .with_functionals(functionals.clone())
            .with_caps(CycleCaps::customers(8))
            .with_path_capture(PathCapture::All);
        combo = (combo + 1) % 36;
        let r = areatail::cycle::simulate_cycle(&params, &mut rng);
        if r.is_censored() {
            continue;
        }
        checked += 1;
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        worst_identity = worst_identity
            .max(rel(r.areas[0], r.sojourn_sum))
            .max(rel(r.areas[1], r.workload_area_identity()));
        let path = r.path.as_ref().unwrap();
        for (oracle, area) in riemann(path, &functionals, 1_000_000).iter().zip(&r.areas) {
            worst_riemann = worst_riemann.max(rel(*oracle, *area));
        }
        riemann_checked += 1;
    }
    outcome(
        worst_identity < 1e-9 && worst_riemann < 1e-5,
        format!(
            "{checked} cycles over 36 family pairs: max identity rel err {worst_identity:.2e} (< 1e-9), \
             max Riemann rel err {worst_riemann:.2e} (< 1e-5) on {riemann_checked} cycles"
        ),
    )
}

fn criterion_2() -> Outcome {
    let params = QueueParams::mm1(0.5, 1.0);
    let s = run_cycles(&params, 1_000_000, SEED + 2).unwrap();
    let n = s.mean(&Quantity::Customers).unwrap();
    let tau = s.mean(&Quantity::Tau).unwrap();
    outcome(
        (n - 2.0).abs() <= 0.02 && (tau - 2.0).abs() <= 0.05,
        format!("mean N = {n:.4} (2.00 ± 0.02), mean tau = {tau:.4} (2.00 ± 0.05)"),
    )
}

/// Shared heavy-tail run for criteria 3, 4, 5, 9 and 10.
struct ParetoRun {
    sample: CycleSample,
}

impl ParetoRun {
    fn new() -> Self {
        let t = Instant::now();
        let sample = run_cycles(&pareto_params(), 10_000_000, SEED + 3).unwrap();
        eprintln!(
            "  pareto run: {} cycles in {:.1}s",
            sample.len(),
            t.elapsed().as_secs_f64()
        );
        Self { sample }
    }

    fn area(&self, f: FunctionalSpec) -> Quantity {
        Quantity::area(f)
    }
}

fn band_summary(points: &[RatioPoint], lo: f64, hi: f64) -> (bool, String) {
    let confident: Vec<&RatioPoint> = points.iter().filter(|p| !p.low_confidence).collect();
    let bad = outside_band(points, lo, hi);
    let (min, max) = confident.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.ratio), b.max(p.ratio))
    });
    let mut msg = format!(
        "{} confident points, ratio range [{min:.3}, {max:.3}] (band [{lo}, {hi}])",
        confident.len()
    );
    if !bad.is_empty() {
        let xs: Vec<String> = bad.iter().map(|p| format!("x={:.4} r={:.3}", p.x, p.ratio)).collect();
        msg.push_str(&format!("; outside: {}", xs.join(", ")));
    }
    (bad.is_empty() && !confident.is_empty(), msg)
}

fn conjecture_check(run: &ParetoRun, f: FunctionalSpec, curve: CurveName) -> Outcome {
    let q = run.area(f);
    let values = run.sample.values(&q).unwrap();
    let k = default_hill_k(values.len());
    let hill = hill_estimator(&values, k).unwrap();
    let hill_ok = (1.15..=1.35).contains(&hill.alpha);
    let plot: Vec<String> = [500, 1000, 2000, 5000, 10_000]
        .iter()
        .map(|&k| format!("{k}:{:.3}", hill_estimator(&values, k).unwrap().alpha))
        .collect();
    let grid = default_grid(&values, None).unwrap();
    let num = empirical_tail(&run.sample, q, &grid).unwrap();
    let den = mapped_tail(&run.sample, Quantity::Tau, curve, &grid).unwrap();
    let ratios = ratio_to_empirical(&num, &den).unwrap();
    let (band_ok, band) = band_summary(&ratios, 0.7, 1.3);
    outcome(
        hill_ok && band_ok,
        format!(
            "(a) Hill alpha = {:.4} [{:.4}, {:.4}] with default k = {k} (in [1.15, 1.35]: {hill_ok}), \
             Hill plot {}; (b) {band}",
            hill.alpha,
            hill.ci_lo,
            hill.ci_hi,
            plot.join(" ")
        ),
    )
}

fn criterion_5(run: &ParetoRun) -> Outcome {
    let values = run.sample.values(&Quantity::Tau).unwrap();
    let grid = default_grid(&values, None).unwrap();
    let est = empirical_tail(&run.sample, Quantity::Tau, &grid).unwrap();
    let curve = AsymptoticCurve::evaluate(CurveName::BusyTailHeavy, &pareto_params(), &grid).unwrap();
    let mut ratios = ratio_diagnostic(&est, &curve).unwrap();
    let clamped = curve.points.iter().filter(|p| p.outside_regime).count();
    for (r, c) in ratios.iter_mut().zip(&curve.points) {
        r.low_confidence |= c.outside_regime;
    }
    let (ok, band) = band_summary(&ratios, 0.7, 1.3);
    outcome(ok, format!("{band}; {clamped} clamped grid points excluded"))
}

fn criterion_6() -> Outcome {
    let params = QueueParams::mm1(0.5, 1.0).with_functionals(vec![FunctionalSpec::queue_area()]);
    let grid = log_grid(20.0, 2000.0, 60).unwrap();
    let t = Instant::now();
    let est = stream_tails(
        &params,
        None,
        100_000_000,
        SEED + 6,
        &[(Quantity::area(FunctionalSpec::queue_area()), grid)],
    )
    .unwrap()
    .remove(0);
    eprintln!("  light-tail run: {:.1}s", t.elapsed().as_secs_f64());
    let psi_true = mm1_psi(0.5).unwrap();
    let comparator = kyprianou_comparator_exponent(0.5, 1.0).unwrap();
    let fit = fit_tail(&est, FitModel::STRETCHED_EXP, WindowPolicy::Default);
    match fit {
        Ok(f) => {
            let psi = f.psi().unwrap();
            let ok = (psi.value - 0.399).abs() <= 0.06 && (psi.value - 0.399).abs() < (psi.value - 0.2101).abs();
            outcome(
                ok,
                format!(
                    "psi_hat = {:.4} ± {:.4} over x in [{:.1}, {:.1}] ({} points); psi = {psi_true:.4}, \
                     comparator = {comparator:.4}",
                    psi.value, psi.se, f.window[0], f.window[1], f.n_points
                ),
            )
        }
        Err(e) => outcome(false, format!("fit failed: {e}")),
    }
}

fn criterion_7() -> Outcome {
    let (lo, hi) = (1e5, 1e7);
    let params = QueueParams::mm1(1.0, 1.0)
        .with_functionals(vec![FunctionalSpec::queue_area()])
        .with_caps(CycleCaps {
            max_customers: Some(10_000_000),
            max_time: None,
            early_stop_threshold: Some(10.0 * hi),
        });
    let grid = log_grid(lo, hi, 21).unwrap();
    let t = Instant::now();
    let est = stream_tails(
        &params,
        None,
        1_000_000,
        SEED + 7,
        &[(Quantity::area(FunctionalSpec::queue_area()), grid)],
    )
    .unwrap()
    .remove(0);
    eprintln!("  critical run: {:.1}s", t.elapsed().as_secs_f64());
    let biased = est.biased_low.iter().filter(|b| **b).count();
    let fit = fit_tail(&est, FitModel::LogLogSlope, WindowPolicy::XRange { lo, hi }).unwrap();
    let slope = fit.slope().unwrap();
    outcome(
        (slope.value + 1.0 / 3.0).abs() <= 0.05 && biased == 0,
        format!(
            "slope = {:.4} ± {:.4} over x in [{lo:e}, {hi:e}] (target -1/3 ± 0.05); {} censored cycles, \
             {biased} biased grid points; p_hat from {:.2e} to {:.2e}",
            slope.value,
            slope.se,
            est.n_censored,
            est.p_hat[0],
            est.p_hat[est.len() - 1]
        ),
    )
}

fn overlap(a: &TailEstimate, b: &TailEstimate, j: usize) -> bool {
    a.ci_lo[j] <= b.ci_hi[j] && b.ci_lo[j] <= a.ci_hi[j]
}

fn criterion_8() -> Outcome {
    let common = [10.0, 20.0, 30.0];
    let rare = 200.0;
    let params = QueueParams::mm1(0.5, 1.0).with_caps(CycleCaps {
        max_customers: None,
        max_time: Some(1.01 * rare),
        early_stop_threshold: None,
    });
    let plain = stream_tails(&params, None, 10_000_000, SEED + 8, &[(Quantity::Tau, common.to_vec())])
        .unwrap()
        .remove(0);
    let gamma = busy_period_tilt(&params.interarrival, &params.service).unwrap();
    let mut grid = common.to_vec();
    grid.push(rare);
    let tilted = tilted_run(
        &params,
        TiltSpec::new(gamma),
        1_000_000,
        &[(Quantity::Tau, grid)],
        SEED + 9,
    )
    .unwrap()
    .remove(0);
    let mut ok = true;
    let mut parts = Vec::new();
    for j in 0..common.len() {
        let o = overlap(&plain, &tilted, j);
        ok &= o && plain.p_hat[j] >= 1e-4;
        parts.push(format!(
            "u={}: plain {:.3e} [{:.3e}, {:.3e}] tilted {:.3e} [{:.3e}, {:.3e}] overlap {o}",
            common[j],
            plain.p_hat[j],
            plain.ci_lo[j],
            plain.ci_hi[j],
            tilted.p_hat[j],
            tilted.ci_lo[j],
            tilted.ci_hi[j]
        ));
    }
    let j = common.len();
    let ess = tilted.ess.as_ref().unwrap()[j];
    let p_rare = tilted.p_hat[j];
    ok &= p_rare <= 1e-8 && p_rare > 0.0 && ess >= 100.0;
    parts.push(format!(
        "u={rare}: tilted {p_rare:.3e} (<= 1e-8) with ESS {ess:.0} (>= 100), gamma = {gamma:.4}"
    ));
    outcome(ok, parts.join("; "))
}

fn criterion_9(run: &ParetoRun) -> Outcome {
    let mut exact = true;
    for i in 1..=10_000 {
        let x = i as f64 * 0.731;
        exact &= power_threshold(x, 1.0, 0.5).unwrap() == area_w_threshold(x, 0.5).unwrap();
    }
    let mut reports = vec![format!(
        "power_threshold(x, 1, rho) == area_w_threshold on 10^4 points: {exact}"
    )];
    for (f, curve) in [
        (
            FunctionalSpec::new(Target::W, 2.0, 0.0),
            CurveName::PowerConjecture { k: 2.0 },
        ),
        (
            FunctionalSpec::new(Target::W, 2.0, 0.1),
            CurveName::DiscountedConjecture { k: 2.0, theta: 0.1 },
        ),
    ] {
        let q = run.area(f);
        let values = run.sample.values(&q).unwrap();
        let grid = default_grid(&values, None).unwrap();
        let num = empirical_tail(&run.sample, q, &grid).unwrap();
        let den = mapped_tail(&run.sample, Quantity::Tau, curve, &grid).unwrap();
        let ratios = ratio_to_empirical(&num, &den).unwrap();
        let (in_band, band) = band_summary(&ratios, 0.7, 1.3);
        reports.push(format!("[documented] {}: in band {in_band}; {band}", curve.label()));
    }
    outcome(exact, reports.join("; "))
}

fn criterion_10(run: &ParetoRun) -> Outcome {
    let q = Quantity::area(FunctionalSpec::workload_area());
    let values = run.sample.values(&q).unwrap();
    let level = weighted_quantile(&values, None, 0.999).unwrap();
    let heavy_params = pareto_params().with_path_capture(PathCapture::AreaAbove { functional: 1, level });
    let heavy = run_cycles(&heavy_params, 1_000_000, SEED + 10).unwrap();
    let heavy_profile = conditional_path_profile(&heavy, q, level, 50);

    let light_params = QueueParams::mm1(0.5, 1.0)
        .with_functionals(vec![FunctionalSpec::queue_area()])
        .with_path_capture(PathCapture::All);
    let light = run_cycles(&light_params, 200_000, SEED + 11).unwrap();
    let lq = Quantity::area(FunctionalSpec::queue_area());
    let light_level = weighted_quantile(&light.values(&lq).unwrap(), None, 0.999).unwrap();
    let light_profile = conditional_path_profile(&light, lq, light_level, 50);

    match (heavy_profile, light_profile) {
        (Ok(h), Ok(l)) => {
            let ok = (h.peak_fraction - 0.5).abs() <= 0.1
                && (0.0..=1.0).contains(&l.peak_fraction)
                && l.q_bar.iter().all(|v| *v >= 0.0 && v.is_finite())
                && l.concavity_defect.is_finite()
                && l.triangle_distance.is_finite();
            outcome(
                ok,
                format!(
                    "heavy: peak_fraction {:.3} (0.5 ± 0.1) from {} paths, triangle_distance {:.4}; \
                     light: peak_fraction {:.3}, concavity_defect {:.4}, triangle_distance {:.4} from {} paths",
                    h.peak_fraction,
                    h.n_paths,
                    h.triangle_distance,
                    l.peak_fraction,
                    l.concavity_defect,
                    l.triangle_distance,
                    l.n_paths
                ),
            )
        }
        (h, l) => outcome(
            false,
            format!("profile failed: heavy {:?}, light {:?}", h.err(), l.err()),
        ),
    }
}

fn criterion_11() -> Outcome {
    let d = DistributionSpec::Pareto { alpha: 2.0, scale: 1.0 };
    let mut rng = RandomStream::new(SEED + 12);
    let v: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
    let hill = hill_estimator(&v, 1000).unwrap().alpha;

    let grid = log_grid(100.0, 1000.0, 20).unwrap();
    let p: Vec<f64> = grid.iter().map(|x| (-0.4 * x.sqrt()).exp()).collect();
    let n = 1u64 << 40;
    let est = TailEstimate {
        quantity: Quantity::Tau,
        digest: "synthetic".into(),
        grid: grid.clone(),
        mapped: None,
        ci_lo: p.clone(),
        ci_hi: p.clone(),
        exceed_count: p.iter().map(|q| (q * n as f64) as u64).collect(),
        p_hat: p,
        n_cycles: n,
        n_censored: 0,
        weighted: false,
        biased_low: vec![false; grid.len()],
        ess: None,
        warnings: vec![],
    };
    let psi = fit_tail(
        &est,
        FitModel::StretchedExp { quarter_log: false },
        WindowPolicy::Default,
    )
    .unwrap()
    .psi()
    .unwrap()
    .value;

    let (lo, hi) = wilson_interval(10, 100);
    let ok = (hill - 2.0).abs() <= 0.12
        && (psi - 0.4).abs() <= 0.01
        && (lo - 0.055).abs() <= 1e-3
        && (hi - 0.174).abs() <= 1e-3;
    outcome(
        ok,
        format!("Hill {hill:.4} (2 ± 0.12); psi_hat {psi:.5} (0.400 ± 0.01); Wilson [{lo:.5}, {hi:.5}] ([0.055, 0.174] ± 1e-3)"),
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |c: u32| only.as_ref().is_none_or(|o| o.contains(&c));

    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut run_one = |c: u32, f: &mut dyn FnMut() -> Outcome| {
        if wanted(c) {
            let t = Instant::now();
            let o = f();
            eprintln!("  criterion {c}: {:.1}s", t.elapsed().as_secs_f64());
            results.push((c, o));
        }
    };
    run_one(1, &mut criterion_1);
    run_one(2, &mut criterion_2);
    if [3, 4, 5, 9, 10].iter().any(|&c| wanted(c)) {
        let run = ParetoRun::new();
        run_one(3, &mut || {
            conjecture_check(&run, FunctionalSpec::workload_area(), CurveName::AreaWConjecture)
        });
        run_one(4, &mut || {
            conjecture_check(&run, FunctionalSpec::queue_area(), CurveName::AreaQConjecture)
        });
        run_one(5, &mut || criterion_5(&run));
        run_one(9, &mut || criterion_9(&run));
        run_one(10, &mut || criterion_10(&run));
    }
    run_one(6, &mut criterion_6);
    run_one(7, &mut criterion_7);
    run_one(8, &mut criterion_8);
    run_one(11, &mut criterion_11);

    results.sort_by_key(|(c, _)| *c);
    let mut failed = 0;
    for (c, o) in &results {
        println!("{} criterion {c}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += (!o.pass) as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 || std::env::var_os("ACCEPTANCE_STRICT").is_none() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
