use areatail::asymptotics::{busy_period_tilt, AsymptoticCurve, CurveName};
use areatail::cycle::{CycleCaps, FunctionalSpec, PathCapture, QueueParams};
use areatail::estimate::{
    conditional_path_profile, default_hill_k, empirical_tail, empirical_tail_default, fit_tail, hill_estimator,
    log_grid, mapped_tail, ratio_diagnostic, ratio_to_empirical, run_cycles, stream_tails, tilted_run, FitModel,
    Quantity, TiltSpec, WindowPolicy,
};
use areatail::DistributionSpec;

fn pareto_queue() -> QueueParams {
    QueueParams::new(
        DistributionSpec::Exponential { rate: 0.5 },
        DistributionSpec::Pareto { alpha: 2.5, scale: 0.6 },
    )
    .with_functionals(vec![FunctionalSpec::queue_area(), FunctionalSpec::workload_area()])
}

#[test]
fn heavy_tail_pipeline() {
    let params = pareto_queue();
    let sample = run_cycles(&params, 200_000, 11).unwrap();
    let w = Quantity::area(FunctionalSpec::workload_area());
    let est = empirical_tail_default(&sample, w).unwrap();
    assert_eq!(est.len(), 40);
    assert_eq!(est.n_cycles, 200_000);

    let curve = AsymptoticCurve::evaluate(CurveName::AreaWConjecture, &params, &est.grid).unwrap();
    let to_curve = ratio_diagnostic(&est, &curve).unwrap();
    assert_eq!(to_curve.len(), est.len());
    assert!(to_curve.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));

    let tau = mapped_tail(&sample, Quantity::Tau, CurveName::AreaWConjecture, &est.grid).unwrap();
    let to_tau = ratio_to_empirical(&est, &tau).unwrap();
    let confident: Vec<f64> = to_tau.iter().filter(|r| !r.low_confidence).map(|r| r.ratio).collect();
    assert!(confident.len() > 20);
    assert!(confident.iter().all(|r| (0.3..3.0).contains(r)), "{confident:?}");

    let fit = fit_tail(&est, FitModel::LogLogSlope, WindowPolicy::Default).unwrap();
    let slope = fit.slope().unwrap().value;
    assert!(slope < -0.8 && slope > -2.5, "{slope}");

    let values = sample.completed_values(&w).unwrap();
    let hill = hill_estimator(&values, default_hill_k(values.len())).unwrap();
    assert!(hill.alpha > 1.0 && hill.alpha < 2.0, "{}", hill.alpha);
}

#[test]
fn streamed_and_stored_tails_agree() {
    let params = pareto_queue();
    let q = Quantity::area(FunctionalSpec::queue_area());
    let grid = log_grid(1.0, 500.0, 25).unwrap();
    let stored = run_cycles(&params, 50_000, 3).unwrap();
    let a = empirical_tail(&stored, q, &grid).unwrap();
    let b = stream_tails(&params, None, 50_000, 3, &[(q, grid)]).unwrap().remove(0);
    assert_eq!(a.p_hat, b.p_hat);
    assert_eq!(a.exceed_count, b.exceed_count);
}

#[test]
fn tilted_area_estimates_match_plain_sampling() {
    let params = QueueParams::mm1(0.5, 1.0)
        .with_functionals(vec![FunctionalSpec::workload_area()])
        .with_caps(CycleCaps {
            max_customers: None,
            max_time: Some(1e4),
            early_stop_threshold: None,
        });
    let w = Quantity::area(FunctionalSpec::workload_area());
    let grid = vec![5.0, 20.0, 50.0];
    let plain = stream_tails(&params, None, 2_000_000, 21, &[(w, grid.clone())])
        .unwrap()
        .remove(0);
    let gamma = busy_period_tilt(&params.interarrival, &params.service).unwrap();
    let tilted = tilted_run(&params, TiltSpec::new(gamma), 400_000, &[(w, grid)], 22)
        .unwrap()
        .remove(0);
    for j in 0..plain.len() {
        assert!(plain.p_hat[j] >= 1e-3, "{}", plain.p_hat[j]);
        assert!(
            plain.ci_lo[j] <= tilted.ci_hi[j] && tilted.ci_lo[j] <= plain.ci_hi[j],
            "x = {}: plain [{}, {}], tilted [{}, {}]",
            plain.grid[j],
            plain.ci_lo[j],
            plain.ci_hi[j],
            tilted.ci_lo[j],
            tilted.ci_hi[j]
        );
    }
}

#[test]
fn heavy_tail_profile_peaks_early() {
    let params = pareto_queue().with_path_capture(PathCapture::AreaAbove {
        functional: 1,
        level: 100.0,
    });
    let sample = run_cycles(&params, 300_000, 5).unwrap();
    let prof = conditional_path_profile(&sample, Quantity::area(FunctionalSpec::workload_area()), 100.0, 40).unwrap();
    assert!(prof.n_paths >= 30);
    assert!(
        prof.peak_fraction > 0.2 && prof.peak_fraction < 0.8,
        "{}",
        prof.peak_fraction
    );
}
