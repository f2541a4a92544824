//! Monte Carlo estimation over cycle samples.

pub mod fit;
pub mod hill;
pub mod joint;
pub mod profile;
pub mod ratio;
pub mod risk;
pub mod sample;
pub mod tail;
pub mod tilted;

pub use fit::{fit_tail, Coefficient, FitModel, FitReport, WindowPolicy};
pub use hill::{default_hill_k, hill_estimator, HillEstimate};
pub use joint::{joint_tail, run_bivariate, BivariateSample, JointTail};
pub use profile::{conditional_path_profile, profile_from_paths, PathProfile};
pub use ratio::{outside_band, ratio_diagnostic, ratio_to_empirical, ratios_to_csv, RatioPoint};
pub use risk::{risk_summary, RiskParams, RiskSummary, RiskTailPoint};
pub use sample::{map_chunks, run_cycles, run_cycles_with, CycleSample, Quantity, CHUNK_CYCLES};
pub use tail::{
    default_grid, empirical_tail, empirical_tail_default, log_grid, mapped_tail, stream_tails, weighted_quantile,
    wilson_interval, MappedLevels, TailAccumulator, TailEstimate,
};
pub use tilted::{tilted_run, TiltSpec};
