//! Exact simulation of GI/GI/1 busy cycles and of the finite-horizon risk integral.

mod engine;
mod integrate;
mod params;
mod risk;

pub use engine::{
    replay_bivariate_cycle, replay_cycle, simulate_bivariate_cycle, simulate_cycle, CyclePath, CycleRecord,
    CycleSimulator, SwitchRule, TiltPlan,
};
pub use integrate::{integrate_queue_segment, integrate_workload_segment};
pub use params::{CensorCause, CycleCaps, FunctionalSpec, PathCapture, QueueParams, Regime, Target};
pub use risk::{negative_part_integral, risk_negative_part_integral};
