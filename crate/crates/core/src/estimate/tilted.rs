//! Importance sampling of rare cycles by exponential tilting.

use serde::{Deserialize, Serialize};

use super::sample::Quantity;
use super::tail::{stream_tails, TailEstimate};
use crate::cycle::{QueueParams, SwitchRule, TiltPlan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltSpec {
    pub gamma: f64,
    #[serde(default = "never")]
    pub switch: SwitchRule,
}

fn never() -> SwitchRule {
    SwitchRule::Never
}

impl TiltSpec {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            switch: SwitchRule::Never,
        }
    }
}

/// Weighted tail estimates of `targets` from `n` cycles drawn under the tilt.
///
/// Each pair `(S, T)` is drawn from the tilted laws and contributes
/// `ln E[e^{gamma S}] + ln E[e^{-gamma T}] - gamma (S - T)` to the log
/// likelihood ratio until the switch rule fires. The ratio is attached at the
/// end of the cycle. Caps are required because the tilted queue may be unstable.
pub fn tilted_run(
    params: &QueueParams,
    tilt: TiltSpec,
    n: u64,
    targets: &[(Quantity, Vec<f64>)],
    master_seed: u64,
) -> Result<Vec<TailEstimate>> {
    if !params.caps.is_bounded() {
        return Err(Error::InvalidParams(vec![
            "CycleCaps: tilted runs require max_customers or max_time".into(),
        ]));
    }
    if !(tilt.gamma.is_finite()) {
        return Err(Error::TiltOutOfDomain { gamma: tilt.gamma });
    }
    let plan = TiltPlan::new(params, tilt.gamma, tilt.switch)?;
    stream_tails(params, Some(plan), n, master_seed, targets)
}
