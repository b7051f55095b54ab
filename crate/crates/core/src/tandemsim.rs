//! Discrete-event simulation of the tandem with reused service times.
//!
//! Jobs arrive to Q1 as a Poisson(λ) stream, are served FIFO, then join Q2
//! carrying the same service requirement. Busy periods of Q1 are built
//! directly from the workload random walk; the right-continuous workload
//! path of both stations is materialised only on request.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{domain, Error, Result};
use crate::heavytail::ServiceDistribution;
use crate::rng::SimRng;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new(start: f64) -> Self {
        CompensatedSum {
            sum: start,
            comp: 0.0,
        }
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Keep per-job records and build the workload path.
    pub keep_path: bool,
    /// Abort when a single busy period exceeds this many jobs.
    pub job_cap: u64,
    /// Permit `ρ > 1`.
    pub allow_unstable: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            keep_path: false,
            job_cap: 100_000_000,
            allow_unstable: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JobRecord {
    pub index: u64,
    /// 1-based busy period of Q1 the job belongs to.
    pub busy_period: usize,
    pub arrival_q1: f64,
    pub service: f64,
    /// Departure from Q1.
    pub arrival_q2: f64,
    pub sojourn_q2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyPeriodRecord {
    /// 1-based index `k`.
    pub index: usize,
    pub start: f64,
    /// `t_k`, arrival time of the last job.
    pub last_arrival: f64,
    /// `t̃_k = t_k + W₁(t_k)`.
    pub last_q2_arrival: f64,
    /// `M_k`.
    pub max_service: f64,
    /// `I_k`.
    pub idle_after: f64,
    /// `R_k = W₂(t̃_k)`.
    pub r_value: f64,
    pub jobs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    /// Departure from Q1, which is also the arrival to Q2.
    Departure,
    Arrival,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEvent {
    pub time: f64,
    pub kind: EventKind,
    pub job: u64,
    /// Values just after the event.
    pub w1: f64,
    pub w2: f64,
}

/// Right-continuous workload path of both stations.
#[derive(Debug, Clone, Default)]
pub struct WorkloadPath {
    pub events: Vec<PathEvent>,
}

impl WorkloadPath {
    /// Replays the job log as an event sweep. Departures precede arrivals
    /// at equal times.
    pub fn from_jobs(jobs: &[JobRecord]) -> Self {
        let mut raw: Vec<(f64, EventKind, usize)> = Vec::with_capacity(2 * jobs.len());
        for (i, j) in jobs.iter().enumerate() {
            raw.push((j.arrival_q1, EventKind::Arrival, i));
            raw.push((j.arrival_q2, EventKind::Departure, i));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let (mut now, mut w1, mut w2) = (0.0, 0.0f64, 0.0f64);
        let events = raw
            .into_iter()
            .map(|(time, kind, i)| {
                let dt = time - now;
                w1 = (w1 - dt).max(0.0);
                w2 = (w2 - dt).max(0.0);
                now = time;
                match kind {
                    EventKind::Arrival => w1 += jobs[i].service,
                    EventKind::Departure => w2 += jobs[i].service,
                }
                PathEvent {
                    time,
                    kind,
                    job: jobs[i].index,
                    w1,
                    w2,
                }
            })
            .collect();
        WorkloadPath { events }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub periods: Vec<BusyPeriodRecord>,
    pub jobs: Option<Vec<JobRecord>>,
    pub path: Option<WorkloadPath>,
}

fn check_load(lambda: f64, dist: &ServiceDistribution, allow_unstable: bool) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain("lambda", lambda, "arrival rate must be positive and finite"));
    }
    let rho = lambda * dist.mean();
    if rho > 1.0 + 1e-12 && !allow_unstable {
        return Err(Error::Unstable { rho });
    }
    Ok(())
}

#[inline]
fn exponential(rng: &mut SimRng, lambda: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / lambda
}

/// Simulates `n_busy_periods` complete Q1 busy periods from an empty
/// system.
pub fn simulate(
    lambda: f64,
    dist: &ServiceDistribution,
    n_busy_periods: usize,
    rng: &mut SimRng,
    options: SimOptions,
) -> Result<SimOutput> {
    check_load(lambda, dist, options.allow_unstable)?;
    let mut periods = Vec::with_capacity(n_busy_periods);
    let mut jobs = options.keep_path.then(Vec::new);
    let mut clock = CompensatedSum::new(0.0);
    clock.add(exponential(rng, lambda));
    let mut w2 = 0.0f64;
    // Time from the last Q2 arrival of the previous period to the end of it.
    let mut gap_before = 0.0;
    let mut job_index = 0u64;
    for k in 1..=n_busy_periods {
        let start = clock.value();
        let v = dist.sample(rng);
        let mut w1 = v;
        let mut max_service = v;
        let mut count = 1u64;
        w2 = (w2 - (gap_before + v)).max(0.0) + v;
        let mut arrival = start;
        if let Some(j) = jobs.as_mut() {
            j.push(JobRecord {
                index: job_index,
                busy_period: k,
                arrival_q1: arrival,
                service: v,
                arrival_q2: arrival + w1,
                sojourn_q2: w2,
            });
        }
        job_index += 1;
        let gap = loop {
            let a = exponential(rng, lambda);
            if a >= w1 {
                break a;
            }
            clock.add(a);
            arrival = clock.value();
            let v = dist.sample(rng);
            w1 = w1 - a + v;
            max_service = max_service.max(v);
            // consecutive Q2 arrivals within a busy period are `v` apart
            w2 = (w2 - v).max(0.0) + v;
            count += 1;
            if count > options.job_cap {
                return Err(Error::JobCap {
                    period: k,
                    cap: options.job_cap,
                });
            }
            if let Some(j) = jobs.as_mut() {
                j.push(JobRecord {
                    index: job_index,
                    busy_period: k,
                    arrival_q1: arrival,
                    service: v,
                    arrival_q2: arrival + w1,
                    sojourn_q2: w2,
                });
            }
            job_index += 1;
        };
        let idle = gap - w1;
        periods.push(BusyPeriodRecord {
            index: k,
            start,
            last_arrival: arrival,
            last_q2_arrival: arrival + w1,
            max_service,
            idle_after: idle,
            r_value: w2,
            jobs: count,
        });
        clock.add(gap);
        gap_before = idle;
    }
    let path = jobs.as_deref().map(WorkloadPath::from_jobs);
    Ok(SimOutput {
        periods,
        jobs,
        path,
    })
}

/// Draws busy-period maxima by simulating single Q1 busy periods.
#[derive(Debug, Clone, Copy)]
pub struct BusyPeriodSampler {
    lambda: f64,
    dist: ServiceDistribution,
    job_cap: u64,
}

impl BusyPeriodSampler {
    pub fn new(lambda: f64, dist: ServiceDistribution) -> Result<Self> {
        check_load(lambda, &dist, false)?;
        Ok(BusyPeriodSampler {
            lambda,
            dist,
            job_cap: SimOptions::default().job_cap,
        })
    }

    /// Maximum service time of one fresh busy period.
    pub fn sample_max(&self, rng: &mut SimRng) -> f64 {
        let mut w1 = self.dist.sample(rng);
        let mut max_service = w1;
        let mut count = 1u64;
        loop {
            let a = exponential(rng, self.lambda);
            if a >= w1 || count >= self.job_cap {
                return max_service;
            }
            let v = self.dist.sample(rng);
            w1 = w1 - a + v;
            max_service = max_service.max(v);
            count += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionViolation {
    /// 1-based busy period.
    pub n: usize,
    pub des: f64,
    pub formula: f64,
    pub record: BusyPeriodRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionReport {
    pub checked: usize,
    pub max_relative_error: f64,
    pub violations: Vec<RecursionViolation>,
}

/// `max_{k <= n} (M_k - Σ_{j=k}^{n-1} I_j)` for every `n`, evaluated
/// directly from the records.
pub fn recursion_values(records: &[BusyPeriodRecord]) -> Vec<f64> {
    let mut prefix_max = Vec::with_capacity(records.len());
    let mut running = f64::NEG_INFINITY;
    for r in records {
        running = running.max(r.max_service);
        prefix_max.push(running);
    }
    (0..records.len())
        .map(|n| {
            let mut best = records[n].max_service;
            let mut idle = 0.0;
            for k in (0..n).rev() {
                idle += records[k].idle_after;
                // no earlier term can exceed the running maximum minus idle
                if prefix_max[k] - idle <= best {
                    break;
                }
                best = best.max(records[k].max_service - idle);
            }
            best
        })
        .collect()
}

/// Compares the simulated `R_n` with the explicit maximum formula.
pub fn verify_recursion(records: &[BusyPeriodRecord], relative_tolerance: f64) -> RecursionReport {
    let formula = recursion_values(records);
    let mut max_relative_error: f64 = 0.0;
    let mut violations = Vec::new();
    for (r, &f) in records.iter().zip(&formula) {
        let err = (r.r_value - f).abs() / (1.0 + r.r_value.abs());
        max_relative_error = max_relative_error.max(err);
        if err > relative_tolerance {
            violations.push(RecursionViolation {
                n: r.index,
                des: r.r_value,
                formula: f,
                record: *r,
            });
        }
    }
    RecursionReport {
        checked: records.len(),
        max_relative_error,
        violations,
    }
}

/// Per busy period, the largest Q2 sojourn, recomputed from a FIFO replay
/// of the Q2 arrival log.
pub fn q2_sojourn_max(records: &[BusyPeriodRecord], jobs: &[JobRecord]) -> Result<Vec<f64>> {
    if jobs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut out = vec![f64::NEG_INFINITY; records.len()];
    let mut departure = f64::NEG_INFINITY;
    for j in jobs {
        departure = departure.max(j.arrival_q2) + j.service;
        let slot = &mut out[j.busy_period - 1];
        *slot = slot.max(departure - j.arrival_q2);
    }
    Ok(out)
}

/// Largest gap between `W₁` after each arrival and
/// `Σ_{i ≤ E(t)} V_i - t + I(t)`, with the idle time `I(t)` rebuilt from
/// the busy-period records.
pub fn work_conservation_error(output: &SimOutput) -> Result<f64> {
    let (Some(jobs), Some(path)) = (&output.jobs, &output.path) else {
        return Err(Error::EmptySample);
    };
    // idle time accumulated before busy period k
    let mut idle_before = Vec::with_capacity(output.periods.len());
    let mut acc = CompensatedSum::new(output.periods.first().map_or(0.0, |p| p.start));
    for p in &output.periods {
        idle_before.push(acc.value());
        acc.add(p.idle_after);
    }
    let mut work = CompensatedSum::new(0.0);
    let mut worst: f64 = 0.0;
    for e in path.events.iter().filter(|e| e.kind == EventKind::Arrival) {
        let job = &jobs[e.job as usize];
        work.add(job.service);
        let expected = work.value() - e.time + idle_before[job.busy_period - 1];
        worst = worst.max((e.w1 - expected).abs() / (1.0 + e.w1));
    }
    Ok(worst)
}
