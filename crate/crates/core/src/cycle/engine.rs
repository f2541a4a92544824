use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::integrate::{queue_segment, workload_segment};
use super::params::{CensorCause, CycleCaps, FunctionalSpec, PathCapture, QueueParams, Target};
use crate::dist::DistributionSpec;
use crate::error::Result;
use crate::rng::RandomStream;

/// Queue length and workload right after every event of a cycle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CyclePath {
    pub times: Vec<f64>,
    pub queue: Vec<u32>,
    pub workload: Vec<f64>,
}

impl CyclePath {
    fn push(&mut self, t: f64, q: usize, w: f64) {
        self.times.push(t);
        self.queue.push(q as u32);
        self.workload.push(w);
    }

    /// Queue length at time `t` (right-continuous reconstruction).
    pub fn queue_at(&self, t: f64) -> u32 {
        let idx = self.times.partition_point(|&e| e <= t);
        if idx == 0 {
            0
        } else {
            self.queue[idx - 1]
        }
    }

    /// Workload at time `t`: linear decay with unit slope from the last event.
    pub fn workload_at(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&e| e <= t);
        if idx == 0 {
            0.0
        } else {
            (self.workload[idx - 1] - (t - self.times[idx - 1])).max(0.0)
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// One busy cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    /// Busy period length (elapsed time if censored).
    pub tau: f64,
    pub n_customers: u64,
    pub max_queue: u64,
    pub max_workload: f64,
    /// One entry per requested functional, in request order.
    pub areas: Vec<f64>,
    /// Sum of sojourn times `D_i - A_i`.
    pub sojourn_sum: f64,
    /// Sum of service times `Σ S_i`.
    pub total_work: f64,
    /// `Σ S_i A_i`.
    pub work_moment: f64,
    /// Likelihood ratio `dP/dP~`; 1 for plain sampling.
    pub weight: f64,
    pub censored: Option<CensorCause>,
    pub path: Option<CyclePath>,
}

impl CycleRecord {
    pub fn is_censored(&self) -> bool {
        self.censored.is_some()
    }

    /// `Σ S_i (tau - A_i) - tau^2 / 2`, the workload area of an uncensored cycle.
    pub fn workload_area_identity(&self) -> f64 {
        self.tau * self.total_work - self.work_moment - 0.5 * self.tau * self.tau
    }
}

/// Exponential change of measure applied pair-by-pair to `(S_n, T_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltPlan {
    pub gamma: f64,
    pub service: DistributionSpec,
    pub interarrival: DistributionSpec,
    /// `ln E[e^{gamma S}] + ln E[e^{-gamma T}]`; zero at the Lundberg root.
    pub log_mgf_product: f64,
    pub switch: SwitchRule,
}

impl TiltPlan {
    /// Tilts service by `gamma` and interarrivals by `-gamma`.
    pub fn new(params: &QueueParams, gamma: f64, switch: SwitchRule) -> Result<Self> {
        let service = params.service.tilt(gamma)?;
        let interarrival = params.interarrival.tilt(-gamma)?;
        let log_mgf_product = if gamma == 0.0 {
            0.0
        } else {
            params.service.mgf(gamma).ln() + params.interarrival.mgf(-gamma).ln()
        };
        Ok(Self {
            gamma,
            service,
            interarrival,
            log_mgf_product,
            switch,
        })
    }

    /// Traffic intensity `E~[S] / E~[T]` under the tilted laws.
    pub fn tilted_rho(&self) -> f64 {
        self.service.mean() / self.interarrival.mean()
    }
}

/// When to stop tilting and continue under the original laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SwitchRule {
    /// Tilt the whole cycle.
    Never,
    /// Revert once the cumulative work `Σ S_i` exceeds the level.
    WorkAbove { level: f64 },
    /// Revert once functional `functional` has accumulated more than `level`.
    AreaAbove { functional: usize, level: f64 },
}

/// Event-driven state of one single-server queue inside a busy cycle.
struct Track<'a> {
    functionals: &'a [FunctionalSpec],
    t: f64,
    w: f64,
    departures: VecDeque<f64>,
    areas: Vec<f64>,
    max_q: u64,
    max_w: f64,
    n: u64,
    sojourn_sum: f64,
    total_work: f64,
    work_moment: f64,
    path: Option<CyclePath>,
}

impl<'a> Track<'a> {
    fn new(functionals: &'a [FunctionalSpec], departures: VecDeque<f64>, capture: bool) -> Self {
        Self {
            functionals,
            t: 0.0,
            w: 0.0,
            departures,
            areas: vec![0.0; functionals.len()],
            max_q: 0,
            max_w: 0.0,
            n: 0,
            sojourn_sum: 0.0,
            total_work: 0.0,
            work_moment: 0.0,
            path: capture.then(CyclePath::default),
        }
    }

    #[inline]
    fn arrive(&mut self, service: f64) {
        self.w += service;
        self.departures.push_back(self.t + self.w);
        self.n += 1;
        self.sojourn_sum += self.w;
        self.total_work += service;
        self.work_moment += service * self.t;
        let q = self.departures.len();
        self.max_q = self.max_q.max(q as u64);
        self.max_w = self.max_w.max(self.w);
        if let Some(p) = self.path.as_mut() {
            p.push(self.t, q, self.w);
        }
    }

    /// Advances time by `dt <= w`. With `drain` every pending departure happens by the end.
    #[inline]
    fn advance(&mut self, dt: f64, drain: bool) {
        for (f, area) in self.functionals.iter().zip(self.areas.iter_mut()) {
            if f.target == Target::W {
                *area += workload_segment(self.w, dt, f.k, f.theta, self.t);
            }
        }
        let end = self.t + dt;
        let mut cur = self.t;
        while let Some(&d) = self.departures.front() {
            if !drain && d > end {
                break;
            }
            let next = d.min(end);
            let q = self.departures.len();
            self.add_queue_segment(q, cur, next);
            self.departures.pop_front();
            cur = next;
            if let Some(p) = self.path.as_mut() {
                let w = if self.departures.is_empty() && drain {
                    0.0
                } else {
                    (self.w - (next - self.t)).max(0.0)
                };
                p.push(next, q - 1, w);
            }
        }
        if cur < end {
            let q = self.departures.len();
            self.add_queue_segment(q, cur, end);
        }
        self.t = end;
        self.w = if drain { 0.0 } else { self.w - dt };
    }

    #[inline]
    fn add_queue_segment(&mut self, q: usize, from: f64, to: f64) {
        if q == 0 {
            return;
        }
        for (f, area) in self.functionals.iter().zip(self.areas.iter_mut()) {
            if f.target == Target::Q {
                *area += queue_segment(q as f64, to - from, f.k, f.theta, from);
            }
        }
    }

    fn all_above(&self, level: f64) -> bool {
        !self.areas.is_empty() && self.areas.iter().all(|&a| a > level)
    }

    fn into_record(self, weight: f64, censored: Option<CensorCause>) -> (CycleRecord, VecDeque<f64>) {
        let record = CycleRecord {
            tau: self.t,
            n_customers: self.n,
            max_queue: self.max_q,
            max_workload: self.max_w,
            areas: self.areas,
            sojourn_sum: self.sojourn_sum,
            total_work: self.total_work,
            work_moment: self.work_moment,
            weight,
            censored,
            path: self.path,
        };
        (record, self.departures)
    }
}

/// Reusable simulator for one parameter set. Holds scratch buffers between cycles.
pub struct CycleSimulator<'a> {
    params: &'a QueueParams,
    tilt: Option<TiltPlan>,
    scratch: VecDeque<f64>,
}

impl<'a> CycleSimulator<'a> {
    pub fn new(params: &'a QueueParams) -> Self {
        Self {
            params,
            tilt: None,
            scratch: VecDeque::new(),
        }
    }

    pub fn with_tilt(params: &'a QueueParams, tilt: TiltPlan) -> Self {
        Self {
            params,
            tilt: Some(tilt),
            scratch: VecDeque::new(),
        }
    }

    /// Simulates one busy cycle started by an arrival at an empty system at time 0.
    pub fn run(&mut self, rng: &mut RandomStream) -> CycleRecord {
        let params = self.params;
        let capture = params.path_capture != PathCapture::Off;
        let mut buf = std::mem::take(&mut self.scratch);
        buf.clear();
        let mut track = Track::new(&params.functionals, buf, capture);
        let max_customers = params.caps.customer_limit();
        let max_time = params.caps.time_limit();
        let early_stop = params.caps.early_stop_threshold;

        let mut log_lr = 0.0;
        let mut tilting = self.tilt.is_some();
        let censored = loop {
            let (s, t) = match (&self.tilt, tilting) {
                (Some(plan), true) => {
                    let s = plan.service.sample(rng);
                    let t = plan.interarrival.sample(rng);
                    log_lr += plan.log_mgf_product - plan.gamma * (s - t);
                    (s, t)
                }
                _ => (params.service.sample(rng), params.interarrival.sample(rng)),
            };
            track.arrive(s);
            if track.w <= t {
                let w = track.w;
                track.advance(w, true);
                break None;
            }
            track.advance(t, false);
            if track.n >= max_customers {
                break Some(CensorCause::MaxCustomers);
            }
            if track.t >= max_time {
                break Some(CensorCause::MaxTime);
            }
            if let Some(level) = early_stop {
                if track.all_above(level) {
                    break Some(CensorCause::EarlyStop);
                }
            }
            if tilting {
                if let Some(plan) = &self.tilt {
                    tilting = match plan.switch {
                        SwitchRule::Never => true,
                        SwitchRule::WorkAbove { level } => track.total_work <= level,
                        SwitchRule::AreaAbove { functional, level } => track.areas[functional] <= level,
                    };
                }
            }
        };
        let (mut record, buf) = track.into_record(log_lr.exp(), censored);
        self.scratch = buf;
        if let PathCapture::AreaAbove { functional, level } = params.path_capture {
            if record.areas[functional] <= level {
                record.path = None;
            }
        }
        record
    }
}

/// Simulates one busy cycle of `params`.
pub fn simulate_cycle(params: &QueueParams, rng: &mut RandomStream) -> CycleRecord {
    CycleSimulator::new(params).run(rng)
}

/// Replays a cycle from given service and interarrival sequences.
///
/// `services[i]` and `interarrivals[i]` form pair `i`; the replay ends when
/// the cycle does or the sequences run out (then the record is censored).
pub fn replay_cycle(
    functionals: &[FunctionalSpec],
    services: &[f64],
    interarrivals: &[f64],
    capture_path: bool,
) -> CycleRecord {
    let mut track = Track::new(functionals, VecDeque::new(), capture_path);
    for (&s, &t) in services.iter().zip(interarrivals) {
        track.arrive(s);
        if track.w <= t {
            let w = track.w;
            track.advance(w, true);
            return track.into_record(1.0, None).0;
        }
        track.advance(t, false);
    }
    track.into_record(1.0, Some(CensorCause::MaxCustomers)).0
}

/// Two servers fed by the same arrivals; server 1 receives `b` times the work of server 2.
///
/// Both records are integrated on `[0, tau_min]` and carry `tau = tau_min`.
pub fn simulate_bivariate_cycle(params: &QueueParams, b: f64, rng: &mut RandomStream) -> (CycleRecord, CycleRecord) {
    let capture = params.path_capture != PathCapture::Off;
    bivariate(&params.functionals, &params.caps, b, capture, || {
        let s = params.service.sample(rng);
        let t = params.interarrival.sample(rng);
        Some((s, t))
    })
}

/// Bivariate counterpart of [`replay_cycle`]; `services` are the server-2 amounts.
pub fn replay_bivariate_cycle(
    functionals: &[FunctionalSpec],
    b: f64,
    services: &[f64],
    interarrivals: &[f64],
) -> (CycleRecord, CycleRecord) {
    let mut pairs = services.iter().copied().zip(interarrivals.iter().copied());
    bivariate(functionals, &CycleCaps::default(), b, false, || pairs.next())
}

fn bivariate(
    functionals: &[FunctionalSpec],
    caps: &CycleCaps,
    b: f64,
    capture: bool,
    mut next_pair: impl FnMut() -> Option<(f64, f64)>,
) -> (CycleRecord, CycleRecord) {
    let mut first = Track::new(functionals, VecDeque::new(), capture);
    let mut second = Track::new(functionals, VecDeque::new(), capture);
    let max_customers = caps.customer_limit();
    let max_time = caps.time_limit();
    let censored = loop {
        let Some((s, t)) = next_pair() else {
            break Some(CensorCause::MaxCustomers);
        };
        first.arrive(b * s);
        second.arrive(s);
        let w_min = first.w.min(second.w);
        if w_min <= t {
            first.advance(w_min, first.w <= w_min);
            second.advance(w_min, second.w <= w_min);
            break None;
        }
        first.advance(t, false);
        second.advance(t, false);
        if first.n >= max_customers {
            break Some(CensorCause::MaxCustomers);
        }
        if first.t >= max_time {
            break Some(CensorCause::MaxTime);
        }
    };
    (first.into_record(1.0, censored).0, second.into_record(1.0, censored).0)
}
