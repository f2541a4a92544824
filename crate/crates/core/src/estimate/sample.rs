//! Parallel cycle generation and columnar cycle samples.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cycle::{CensorCause, CyclePath, CycleRecord, CycleSimulator, FunctionalSpec, QueueParams, TiltPlan};
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Cycles per work unit. Chunk `j` always draws from substream `j` of the
/// master seed, so results do not depend on how many workers run the chunks.
pub const CHUNK_CYCLES: u64 = 4096;

/// Scalar of a cycle that tails can be estimated for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    Tau,
    Customers,
    MaxQueue,
    MaxWorkload,
    Area { functional: FunctionalSpec },
}

impl Quantity {
    pub fn area(functional: FunctionalSpec) -> Self {
        Self::Area { functional }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Tau => "tau".into(),
            Self::Customers => "n".into(),
            Self::MaxQueue => "max_q".into(),
            Self::MaxWorkload => "max_w".into(),
            Self::Area { functional } => functional.id(),
        }
    }

    pub(crate) fn resolve(&self, params: &QueueParams) -> Result<Column> {
        Ok(match self {
            Self::Tau => Column::Tau,
            Self::Customers => Column::Customers,
            Self::MaxQueue => Column::MaxQueue,
            Self::MaxWorkload => Column::MaxWorkload,
            Self::Area { functional } => Column::Area(
                params
                    .functional_index(functional)
                    .ok_or_else(|| Error::DomainError(format!("functional {} was not simulated", functional.id())))?,
            ),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Column {
    Tau,
    Customers,
    MaxQueue,
    MaxWorkload,
    Area(usize),
}

impl Column {
    #[inline]
    pub(crate) fn of(&self, r: &CycleRecord) -> f64 {
        match *self {
            Column::Tau => r.tau,
            Column::Customers => r.n_customers as f64,
            Column::MaxQueue => r.max_queue as f64,
            Column::MaxWorkload => r.max_workload,
            Column::Area(i) => r.areas[i],
        }
    }
}

/// Independent busy cycles stored column by column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleSample {
    pub params: Option<QueueParams>,
    pub tau: Vec<f64>,
    pub n_customers: Vec<u64>,
    pub max_queue: Vec<u64>,
    pub max_workload: Vec<f64>,
    /// One column per functional of `params`.
    pub areas: Vec<Vec<f64>>,
    pub sojourn_sum: Vec<f64>,
    /// Likelihood ratios; `None` when every weight is one.
    pub weight: Option<Vec<f64>>,
    pub censored: Vec<Option<CensorCause>>,
    /// Captured paths, keyed by cycle index.
    pub paths: Vec<(usize, CyclePath)>,
}

impl CycleSample {
    pub fn new(params: &QueueParams) -> Self {
        Self {
            params: Some(params.clone()),
            areas: vec![Vec::new(); params.functionals.len()],
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn params(&self) -> &QueueParams {
        self.params.as_ref().expect("sample carries its parameters")
    }

    pub fn push(&mut self, mut r: CycleRecord) {
        let i = self.len();
        self.tau.push(r.tau);
        self.n_customers.push(r.n_customers);
        self.max_queue.push(r.max_queue);
        self.max_workload.push(r.max_workload);
        for (col, a) in self.areas.iter_mut().zip(&r.areas) {
            col.push(*a);
        }
        self.sojourn_sum.push(r.sojourn_sum);
        if r.weight != 1.0 && self.weight.is_none() {
            self.weight = Some(vec![1.0; i]);
        }
        if let Some(w) = self.weight.as_mut() {
            w.push(r.weight);
        }
        self.censored.push(r.censored);
        if let Some(p) = r.path.take() {
            self.paths.push((i, p));
        }
    }

    /// Appends `other`, renumbering its path indices.
    pub fn extend(&mut self, other: CycleSample) {
        let offset = self.len();
        if other.weight.is_some() && self.weight.is_none() {
            self.weight = Some(vec![1.0; offset]);
        }
        match (self.weight.as_mut(), other.weight) {
            (Some(w), Some(o)) => w.extend(o),
            (Some(w), None) => w.extend(std::iter::repeat_n(1.0, other.tau.len())),
            _ => {}
        }
        self.tau.extend(other.tau);
        self.n_customers.extend(other.n_customers);
        self.max_queue.extend(other.max_queue);
        self.max_workload.extend(other.max_workload);
        for (col, o) in self.areas.iter_mut().zip(other.areas) {
            col.extend(o);
        }
        self.sojourn_sum.extend(other.sojourn_sum);
        self.censored.extend(other.censored);
        self.paths.extend(other.paths.into_iter().map(|(i, p)| (i + offset, p)));
    }

    #[inline]
    pub fn weight_at(&self, i: usize) -> f64 {
        self.weight.as_ref().map_or(1.0, |w| w[i])
    }

    pub(crate) fn column(&self, c: Column) -> ColumnRef<'_> {
        match c {
            Column::Tau => ColumnRef::F64(&self.tau),
            Column::Customers => ColumnRef::U64(&self.n_customers),
            Column::MaxQueue => ColumnRef::U64(&self.max_queue),
            Column::MaxWorkload => ColumnRef::F64(&self.max_workload),
            Column::Area(i) => ColumnRef::F64(&self.areas[i]),
        }
    }

    /// Values of `quantity`, one per cycle.
    pub fn values(&self, quantity: &Quantity) -> Result<Vec<f64>> {
        let c = quantity.resolve(self.params())?;
        Ok(match self.column(c) {
            ColumnRef::F64(v) => v.to_vec(),
            ColumnRef::U64(v) => v.iter().map(|&x| x as f64).collect(),
        })
    }

    /// Values of `quantity` over uncensored cycles only.
    pub fn completed_values(&self, quantity: &Quantity) -> Result<Vec<f64>> {
        let all = self.values(quantity)?;
        Ok(all
            .into_iter()
            .zip(&self.censored)
            .filter(|(_, c)| c.is_none())
            .map(|(v, _)| v)
            .collect())
    }

    pub fn censored_count(&self) -> usize {
        self.censored.iter().filter(|c| c.is_some()).count()
    }

    /// Fraction of cycles stopped by a cap; "escaped" cycles in transient runs.
    pub fn escaped_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.censored_count() as f64 / self.len() as f64
        }
    }

    /// Sub-sample of uncensored cycles, used for tails conditional on completion.
    pub fn completed_only(&self) -> CycleSample {
        let mut out = CycleSample {
            params: self.params.clone(),
            areas: vec![Vec::new(); self.areas.len()],
            ..CycleSample::default()
        };
        let mut paths = self.paths.iter().peekable();
        for i in 0..self.len() {
            let path = loop {
                match paths.peek() {
                    Some((j, _)) if *j < i => {
                        paths.next();
                    }
                    Some((j, p)) if *j == i => break Some(p.clone()),
                    _ => break None,
                }
            };
            if self.censored[i].is_some() {
                continue;
            }
            out.push(self.record(i, path));
        }
        out
    }

    fn record(&self, i: usize, path: Option<CyclePath>) -> CycleRecord {
        CycleRecord {
            tau: self.tau[i],
            n_customers: self.n_customers[i],
            max_queue: self.max_queue[i],
            max_workload: self.max_workload[i],
            areas: self.areas.iter().map(|c| c[i]).collect(),
            sojourn_sum: self.sojourn_sum[i],
            total_work: f64::NAN,
            work_moment: f64::NAN,
            weight: self.weight_at(i),
            censored: self.censored[i],
            path,
        }
    }

    pub fn mean(&self, quantity: &Quantity) -> Result<f64> {
        let v = self.values(quantity)?;
        if v.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Per-cycle dump: `cycle_id,tau,n,max_q,max_w,censored,weight,<functional ids>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycle_id,tau,n,max_q,max_w,censored,weight");
        for f in &self.params().functionals {
            out.push(',');
            out.push_str(&f.id());
        }
        out.push('\n');
        for i in 0..self.len() {
            let censored = match self.censored[i] {
                None => "",
                Some(CensorCause::MaxCustomers) => "max_customers",
                Some(CensorCause::MaxTime) => "max_time",
                Some(CensorCause::EarlyStop) => "early_stop",
            };
            let _ = write!(
                out,
                "{i},{},{},{},{},{censored},{}",
                self.tau[i],
                self.n_customers[i],
                self.max_queue[i],
                self.max_workload[i],
                self.weight_at(i)
            );
            for col in &self.areas {
                let _ = write!(out, ",{}", col[i]);
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) enum ColumnRef<'a> {
    F64(&'a [f64]),
    U64(&'a [u64]),
}

impl ColumnRef<'_> {
    #[inline]
    pub(crate) fn get(&self, i: usize) -> f64 {
        match self {
            ColumnRef::F64(v) => v[i],
            ColumnRef::U64(v) => v[i] as f64,
        }
    }
}

/// Splits `n` cycles into fixed chunks and maps each on the current rayon pool.
///
/// `f(rng, count)` handles one chunk; results come back in chunk order.
pub fn map_chunks<T, F>(n: u64, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RandomStream, u64) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK_CYCLES);
    (0..chunks)
        .into_par_iter()
        .map(|j| {
            let count = CHUNK_CYCLES.min(n - j * CHUNK_CYCLES);
            let mut rng = RandomStream::substream(master_seed, j);
            f(&mut rng, count)
        })
        .collect()
}

/// Simulates `n` cycles of `params`, optionally under an exponential tilt.
pub fn run_cycles_with(params: &QueueParams, tilt: Option<TiltPlan>, n: u64, master_seed: u64) -> Result<CycleSample> {
    params.validate()?;
    if n == 0 {
        return Err(Error::DomainError("number of cycles must be at least 1".into()));
    }
    let parts = map_chunks(n, master_seed, |rng, count| {
        let mut sim = match tilt {
            Some(plan) => CycleSimulator::with_tilt(params, plan),
            None => CycleSimulator::new(params),
        };
        let mut part = CycleSample::new(params);
        for _ in 0..count {
            part.push(sim.run(rng));
        }
        part
    });
    let mut sample = CycleSample::new(params);
    for part in parts {
        sample.extend(part);
    }
    Ok(sample)
}

/// Simulates `n` independent cycles of `params` on the current rayon pool.
/// The output depends only on `(params, n, master_seed)`.
pub fn run_cycles(params: &QueueParams, n: u64, master_seed: u64) -> Result<CycleSample> {
    run_cycles_with(params, None, n, master_seed)
}
